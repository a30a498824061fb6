//! Synonym replacement and random swapping on the minority class.

use vte_pipeline::augment::{augment_corpus, target_edit_count, AugmentConfig, SynonymLexicon};
use vte_pipeline::corpus::{generate_synthetic, LabelScheme, SynthSpec};

fn main() -> vte_pipeline::Result<()> {
    let scheme = LabelScheme::pe();
    let reports = generate_synthetic(&SynthSpec { n_reports: 200, ..SynthSpec::pe_default(3) }, &scheme)?;
    let lexicon = SynonymLexicon::demo();
    for mut config in [AugmentConfig::synonym(1), AugmentConfig::swap(1)] {
        config.n = 3;
        println!("== {:?}, target edits for 200 tokens: {}", config.mode, target_edit_count(200, &config));
        for r in augment_corpus(&reports, &scheme, &config, &lexicon)? {
            println!("{} (label {:?})\n  {}", r.id, r.label, r.text);
        }
    }
    Ok(())
}
