//! Score sentences and reports with the bundled PE rules.

use vte_pipeline::rules::{Rule, RuleSet};

fn main() -> vte_pipeline::Result<()> {
    let negations = ["no", "negative", "without", "question", "unchanged"];
    let rule = Rule::new(&["segmental", "filling"], 1, &negations).map_err(vte_pipeline::Error::Config)?;
    let example = RuleSet::new("example", vec![rule], 0)?;
    for s in ["small filling defect within the subsegmental branch", "No filling defect in the segmental arteries"] {
        println!("{:>2}  {s}", example.score_sentence(s).0);
    }

    let demo = RuleSet::demo_pe();
    let report = "Technique: CT angiography. Acute embolus in the right lower lobe artery. \
                  Chronic thrombus in the left lobar artery is unchanged. No pleural effusion.";
    let verdict = demo.score_report(report);
    println!("\nreport score {} -> positive: {}", verdict.report_score, verdict.positive);
    for (score, spans) in verdict.sentence_scores.iter().zip(&verdict.matched_spans) {
        println!("  {score:>2} {spans:?}");
    }
    Ok(())
}
