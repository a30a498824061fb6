//! Pick among embedding x classifier candidates by summed validation metrics.

use vte_pipeline::apms::{run_selection, Candidate, MetricSuite};
use vte_pipeline::classifier::{ClassifierSpec, TrainConfig};
use vte_pipeline::corpus::{generate_synthetic, split_corpus, LabelScheme, SplitSpec, SynthSpec};
use vte_pipeline::embed::EmbeddingProviderSpec;
use vte_pipeline::tokenizer::TokenizerConfig;

fn main() -> vte_pipeline::Result<()> {
    let scheme = LabelScheme::pe();
    let reports = generate_synthetic(
        &SynthSpec { n_reports: 240, mean_length_tokens: 60, ..SynthSpec::pe_default(8) },
        &scheme,
    )?;
    let corpus = split_corpus(&reports, &SplitSpec { seed: 9, ..SplitSpec::default() })?;
    let train = TrainConfig { learning_rate: 0.5, epochs: 12, batch_size: 4, ..TrainConfig::default() };
    let candidate = |id: &str, embedding, classifier| Candidate {
        id: id.into(),
        embedding,
        classifier,
        train_config: train.clone(),
    };
    let candidates = [
        candidate("hashed-bilstm", EmbeddingProviderSpec::hashed(32, 1), ClassifierSpec::bilstm(32, 8, 1, 2)),
        candidate("hashed-linear", EmbeddingProviderSpec::hashed(32, 1), ClassifierSpec::linear(32, 8, 2)),
        candidate("constant-bilstm", EmbeddingProviderSpec::constant(32), ClassifierSpec::bilstm(32, 8, 1, 2)),
    ];
    let tokenizer = TokenizerConfig { max_len: 128, ..TokenizerConfig::pe() };
    let result = run_selection(&candidates, &corpus, &MetricSuite::standard(), &tokenizer, &scheme)?;
    print!("{}", result.leaderboard());
    println!("winner {} test accuracy {:.3}", result.winner, result.winner_test_metrics.accuracy);
    Ok(())
}
