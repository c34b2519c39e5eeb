//! Generates a labeled query corpus, writes it to disk and splits it 70/10/20.
//!
//! `cargo run --example synthetic_dataset -- [OUT.jsonl|OUT.csv]`

use std::path::PathBuf;

use template_router::dataset::{label_histogram, load_dataset, stratified_split, write_dataset, DatasetFormat, SplitSpec};
use template_router::domain::TemplateId;
use template_router::fixtures::SyntheticQueries;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("queries_1000.jsonl"));
    let format = DatasetFormat::from_path(&out);

    let items = SyntheticQueries::default().generate();
    write_dataset(&items, &out, format)?;
    let loaded = load_dataset(&out, format)?;
    println!("wrote {} queries to {}", loaded.items.len(), out.display());
    for (t, n) in TemplateId::CANONICAL.iter().zip(label_histogram(&loaded.items)) {
        println!("  {:<10} {n}", t.as_str());
    }

    let split = stratified_split(&loaded.items, &SplitSpec::default())?;
    println!(
        "split train/validation/test = {}/{}/{}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    Ok(())
}
