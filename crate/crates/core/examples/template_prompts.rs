//! Renders the five templates and applies a TOML override file.

use template_router::domain::{Query, TemplateId};
use template_router::templates::TemplateRegistry;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let q = Query::new("demo", "Why is the sky blue?")?;
    let registry = TemplateRegistry::default();
    let mut ids = TemplateId::CANONICAL.to_vec();
    ids.push(TemplateId::Unknown("experimental".into()));
    for id in &ids {
        let b = registry.render_prompt(&q, id);
        println!("{:<13} max_tokens {:>4}  {:?}", id.as_str(), b.max_tokens, b.system_prompt);
    }

    let custom = TemplateRegistry::from_toml(
        r#"
[templates.minimal]
system_prompt = "One sentence, no preamble."
mean_tokens = 35.0
"#,
    )?;
    println!("override: {:?}", custom.render_prompt(&q, &TemplateId::Minimal));
    match TemplateRegistry::from_toml("[templates.verbose]\nmax_tokens = 2000\n") {
        Ok(_) => println!("unexpected: cap override accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
