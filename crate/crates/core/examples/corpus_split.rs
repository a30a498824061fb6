//! Generate a synthetic PE corpus and split it with stratification.

use vte_pipeline::corpus::{generate_synthetic, in_split, split_corpus, LabelScheme, Split, SplitSpec, SynthSpec};

fn main() -> vte_pipeline::Result<()> {
    let scheme = LabelScheme::pe();
    let reports = generate_synthetic(&SynthSpec::pe_default(7), &scheme)?;
    let split = split_corpus(&reports, &SplitSpec::default())?;
    for s in [Split::Train, Split::Validation, Split::Test] {
        let members = in_split(&split, s);
        let positives = members.iter().filter(|r| r.label == Some(1)).count();
        println!("{s:<10} {:>4} reports, {positives:>3} positive", members.len());
    }
    println!("\nfirst report:\n{}", reports[0].text);
    Ok(())
}
