//! Cache-first embedding with the offline hashing backend, persisted to disk.

use template_router::domain::Query;
use template_router::embedding::{embed, EmbeddingCache, LocalHashEmbedder};

#[tokio::main(flavor = "current_thread")]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("embeddings.bin");
    {
        let cache = EmbeddingCache::open(&path)?;
        for (i, text) in ["What is 2+2?", "  What is   2+2? ", "Explain photosynthesis."].iter().enumerate() {
            let v = embed(&Query::new(format!("q{i}"), *text)?, &LocalHashEmbedder, &cache).await?;
            let nonzero = v.values().iter().filter(|x| **x != 0.0).count();
            println!("{text:?}: {} dims, {nonzero} nonzero", v.values().len());
        }
        println!("stats {:?}", cache.stats());
    }
    let reopened = EmbeddingCache::load(&path)?;
    println!("reloaded {} entries from {}", reopened.len(), path.display());
    Ok(())
}
