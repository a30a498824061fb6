//! Embed a report with the hashed provider and write it in the
//! precomputed format.

use vte_pipeline::embed::{write_embeddings, Embedder, EmbeddingProviderSpec};
use vte_pipeline::tokenizer::{tokenize, TokenizerConfig};

fn main() -> vte_pipeline::Result<()> {
    let config = TokenizerConfig { max_len: 16, ..TokenizerConfig::pe() };
    let seq = tokenize("Acute pulmonary embolism in the right lower lobe.", &config);
    let embedder = Embedder::new(EmbeddingProviderSpec::hashed(8, 42))?;
    let m = embedder.embed("r1", &seq)?;
    println!("{} rows ({} padding) of width {}", m.len(), m.pad_rows(), m.dim());
    for (token, row) in seq.valid_tokens().iter().zip(m.rows()).take(4) {
        println!("{token:>10} {row:.3?}");
    }
    let path = std::env::temp_dir().join("vte-example-embeddings.bin");
    write_embeddings(&path, [("r1", &m)])?;
    let back = Embedder::new(EmbeddingProviderSpec::precomputed(8, &path))?.embed("r1", &seq)?;
    println!("precomputed round trip identical: {}", back == m);
    Ok(())
}
