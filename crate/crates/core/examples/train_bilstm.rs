//! Train a small Bi-LSTM on a synthetic DVT corpus and report test metrics.

use vte_pipeline::classifier::{evaluate, examples_from_reports, train, ClassifierSpec, TrainConfig};
use vte_pipeline::corpus::{generate_synthetic, in_split, split_corpus, LabelScheme, Split, SplitSpec, SynthSpec};
use vte_pipeline::embed::{Embedder, EmbeddingProviderSpec};
use vte_pipeline::metrics::render_table;
use vte_pipeline::tokenizer::TokenizerConfig;

fn main() -> vte_pipeline::Result<()> {
    let scheme = LabelScheme::dvt();
    let reports = generate_synthetic(&SynthSpec { n_reports: 400, ..SynthSpec::dvt_default(5) }, &scheme)?;
    let corpus = split_corpus(&reports, &SplitSpec::default())?;
    let tokenizer = TokenizerConfig { max_len: 96, ..TokenizerConfig::dvt() };
    let embedder = Embedder::new(EmbeddingProviderSpec::hashed(32, 1))?;
    let set = |s| examples_from_reports(&in_split(&corpus, s), &tokenizer, &embedder);
    let (train_set, val_set, test_set) = (set(Split::Train)?, set(Split::Validation)?, set(Split::Test)?);

    let spec = ClassifierSpec::bilstm(32, 16, 1, scheme.num_classes());
    let config = TrainConfig { learning_rate: 1.0, epochs: 20, batch_size: 4, ..TrainConfig::default() };
    let outcome = train(&spec, &train_set, &val_set, &config)?;
    for e in &outcome.history {
        println!("epoch {:>2} loss {:.4} val F1 {:.3}", e.epoch, e.train_loss, e.val_weighted_f1);
    }
    let (_, report) = evaluate(&outcome.params, &test_set)?;
    println!("best epoch {}\n{}", outcome.best_epoch, render_table(&[("Bi-LSTM".into(), report)]));
    Ok(())
}
