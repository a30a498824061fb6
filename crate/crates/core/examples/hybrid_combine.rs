//! The DL + rules override policy on a few hand-made cases.

use vte_pipeline::classifier::Prediction;
use vte_pipeline::hybrid::{combine, HybridConfig};
use vte_pipeline::rules::RuleSet;

fn main() -> vte_pipeline::Result<()> {
    let rules = RuleSet::demo_pe();
    let config = HybridConfig::default();
    let cases = [
        (0.90, "Acute pulmonary embolism."),
        (0.97, "Acute pulmonary embolism."),
        (0.97, "Acute pulmonary embolism. Filling defect in a segmental artery."),
        (0.40, "No acute findings."),
    ];
    for (p_neg, text) in cases {
        let dl = Prediction::from_probabilities(vec![p_neg, 1.0 - p_neg]);
        let d = combine(&dl, &rules.score_report(text), &config)?;
        println!(
            "p_neg {p_neg:.2} rule score {} -> class {} ({})",
            d.rule_verdict.report_score, d.final_class, d.source
        );
    }
    Ok(())
}
