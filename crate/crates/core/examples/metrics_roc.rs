//! Confusion-matrix metrics, a ROC curve and the CSV exports.

use vte_pipeline::corpus::LabelScheme;
use vte_pipeline::metrics::{compute_metrics, render_table, roc_curve, table_csv};

fn main() -> vte_pipeline::Result<()> {
    let truths = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
    let scores = [0.9, 0.8, 0.4, 0.6, 0.3, 0.2, 0.2, 0.1, 0.1, 0.05];
    let preds: Vec<usize> = scores.iter().map(|&s| usize::from(s > 0.5)).collect();
    let probs: Vec<Vec<f64>> = scores.iter().map(|&s| vec![1.0 - s, s]).collect();
    let report = compute_metrics(&truths, &preds, &LabelScheme::pe())?.with_roc(&truths, &probs)?;
    let rows = vec![("threshold 0.5".to_string(), report)];
    print!("{}", render_table(&rows));
    print!("\n{}", table_csv(&rows)?);
    let roc = roc_curve(&truths, &scores, 1)?;
    println!("\nAUC {:.3}", roc.auc);
    for (fpr, tpr) in roc.points {
        println!("  fpr {fpr:.3} tpr {tpr:.3}");
    }
    Ok(())
}
