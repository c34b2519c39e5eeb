//! Trains the MLP on the Gaussian cluster fixture and round-trips the model file.

use template_router::classifier::{accuracy, load_model, save_model, train_mlp_with_validation, TrainConfig};
use template_router::dataset::{stratified_split_indices, SplitSpec};
use template_router::fixtures::GaussianClusters;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = GaussianClusters {
        per_class: 200,
        ..GaussianClusters::default()
    }
    .generate();
    let [tr, va, te] = stratified_split_indices(&data.labels, &SplitSpec::default())?;
    let (train, val, test) = (data.subset(&tr), data.subset(&va), data.subset(&te));
    let (model, report) = train_mlp_with_validation(&train, &val, &TrainConfig::default())?;
    println!(
        "{} epochs, best {} (validation CE {:.4}), {:.1}s",
        report.epochs_run, report.best_epoch, report.best_validation_loss, report.wall_clock_seconds
    );
    println!("held-out accuracy {:.2}% on {} samples", accuracy(&model, &test) * 100.0, test.len());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("router.bin");
    save_model(&model, &path)?;
    let loaded = load_model(&path)?;
    println!("model file {} bytes, reload identical: {}", std::fs::metadata(&path)?.len(), loaded == model);
    Ok(())
}
