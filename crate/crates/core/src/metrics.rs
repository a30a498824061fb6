//! Confusion-matrix metrics, ROC curves and comparison tables.
//!
//! Multi-class sensitivity is the support-weighted one-vs-rest recall (which
//! always equals accuracy) and specificity is the support-weighted
//! one-vs-rest true-negative rate. Precision of a class that is never
//! predicted is 0; such classes are listed in
//! [`MetricsReport::zero_division_classes`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelScheme;
use crate::{Error, Result};

/// Table columns, in display order.
pub const COLUMNS: [&str; 6] = ["Accuracy", "Sensitivity", "Specificity", "Precision", "Recall", "F1"];

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn new(truths: &[usize], predictions: &[usize], num_classes: usize) -> Result<Self> {
        if truths.len() != predictions.len() {
            return Err(Error::MetricInput(format!(
                "{} truths but {} predictions",
                truths.len(),
                predictions.len()
            )));
        }
        if truths.is_empty() {
            return Err(Error::MetricInput("no predictions to evaluate".into()));
        }
        let mut counts = vec![0; num_classes * num_classes];
        for (&t, &p) in truths.iter().zip(predictions) {
            if t >= num_classes || p >= num_classes {
                return Err(Error::MetricInput(format!(
                    "label pair ({t}, {p}) outside 0..{num_classes}"
                )));
            }
            counts[t * num_classes + p] += 1;
        }
        Ok(ConfusionMatrix { num_classes, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> usize {
        self.counts[truth * self.num_classes + predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn support(&self, class: usize) -> usize {
        (0..self.num_classes).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted(&self, class: usize) -> usize {
        (0..self.num_classes).map(|t| self.get(t, class)).sum()
    }

    pub fn true_positives(&self, class: usize) -> usize {
        self.get(class, class)
    }

    pub fn false_positives(&self, class: usize) -> usize {
        self.predicted(class) - self.true_positives(class)
    }

    pub fn false_negatives(&self, class: usize) -> usize {
        self.support(class) - self.true_positives(class)
    }

    pub fn true_negatives(&self, class: usize) -> usize {
        self.total() - self.support(class) - self.false_positives(class)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    #[serde(default)]
    pub per_class_auc: BTreeMap<usize, f64>,
    #[serde(default)]
    pub roc_points: BTreeMap<usize, Vec<(f64, f64)>>,
    /// Classes that were never predicted (precision taken as 0).
    #[serde(default)]
    pub zero_division_classes: Vec<usize>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let total = cm.total() as f64;
        let mut report = MetricsReport::default();
        let mut correct = 0;
        for c in 0..cm.num_classes() {
            let weight = cm.support(c) as f64 / total;
            let tp = cm.true_positives(c);
            correct += tp;
            let precision = ratio(tp, cm.predicted(c)).unwrap_or_else(|| {
                report.zero_division_classes.push(c);
                0.0
            });
            let recall = ratio(tp, cm.support(c)).unwrap_or(0.0);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            // With no negatives at all there is nothing to get wrong.
            let tnr = ratio(cm.true_negatives(c), cm.true_negatives(c) + cm.false_positives(c)).unwrap_or(1.0);
            report.weighted_precision += weight * precision;
            report.weighted_recall += weight * recall;
            report.weighted_f1 += weight * f1;
            report.specificity += weight * tnr;
        }
        report.accuracy = correct as f64 / total;
        report.sensitivity = report.weighted_recall;
        report
    }

    /// The six table values in [`COLUMNS`] order.
    pub fn columns(&self) -> [f64; 6] {
        [
            self.accuracy,
            self.sensitivity,
            self.specificity,
            self.weighted_precision,
            self.weighted_recall,
            self.weighted_f1,
        ]
    }

    /// Adds one-vs-rest ROC curves from per-report class probabilities.
    /// Classes without both positive and negative reports are skipped.
    pub fn with_roc(mut self, truths: &[usize], probabilities: &[Vec<f64>]) -> Result<Self> {
        if truths.len() != probabilities.len() {
            return Err(Error::MetricInput("truths and probabilities differ in length".into()));
        }
        let k = probabilities.first().map_or(0, Vec::len);
        for c in 0..k {
            let positives = truths.iter().filter(|&&t| t == c).count();
            if positives == 0 || positives == truths.len() {
                continue;
            }
            let scores: Vec<f64> = probabilities.iter().map(|p| p[c]).collect();
            let roc = roc_curve(truths, &scores, c)?;
            self.per_class_auc.insert(c, roc.auc);
            self.roc_points.insert(c, roc.points);
        }
        Ok(self)
    }
}

/// Point metrics of `predictions` against `truths`.
pub fn compute_metrics(truths: &[usize], predictions: &[usize], scheme: &LabelScheme) -> Result<MetricsReport> {
    let cm = ConfusionMatrix::new(truths, predictions, scheme.num_classes())?;
    Ok(MetricsReport::from_confusion(&cm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), from (0, 0) to (1, 1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// One-vs-rest ROC of `positive_class`, sweeping the threshold over the
/// distinct scores from high to low. Tied scores move the curve diagonally,
/// so the trapezoidal area counts ties as half.
pub fn roc_curve(truths: &[usize], scores: &[f64], positive_class: usize) -> Result<RocCurve> {
    if truths.len() != scores.len() {
        return Err(Error::MetricInput("truths and scores differ in length".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::MetricInput(format!("score {s} outside [0, 1]")));
    }
    let positives = truths.iter().filter(|&&t| t == positive_class).count();
    let negatives = truths.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedRoc(format!(
            "class {positive_class} needs both positive and negative reports ({positives} / {negatives})"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if truths[order[i]] == positive_class {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let point = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        let (x0, y0) = *points.last().expect("curve starts at the origin");
        auc += (point.0 - x0) * (point.1 + y0) / 2.0;
        points.push(point);
    }
    Ok(RocCurve { points, auc })
}

/// Fixed-width comparison table, values to three decimals.
pub fn render_table(rows: &[(String, MetricsReport)]) -> String {
    let name_width = rows
        .iter()
        .map(|(n, _)| n.chars().count())
        .chain(std::iter::once("Method".len()))
        .max()
        .unwrap_or(6);
    let mut out = format!("{:<name_width$}", "Method");
    for c in COLUMNS {
        out.push_str(&format!("  {c:>11}"));
    }
    out.push('\n');
    for (name, report) in rows {
        out.push_str(&format!("{name:<name_width$}"));
        for v in report.columns() {
            out.push_str(&format!("  {v:>11.3}"));
        }
        out.push('\n');
    }
    out
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// Machine-readable table: `method` then the six columns at full precision.
pub fn table_csv(rows: &[(String, MetricsReport)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method"];
    header.extend(COLUMNS);
    w.write_record(&header).map_err(csv_error)?;
    for (name, report) in rows {
        let mut record = vec![name.clone()];
        record.extend(report.columns().iter().map(|v| v.to_string()));
        w.write_record(&record).map_err(csv_error)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)
}

/// Parses [`table_csv`] output back into (method, columns).
pub fn parse_table_csv(text: &str) -> Result<Vec<(String, [f64; 6])>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        if record.len() != 7 {
            return Err(Error::Format(format!("expected 7 fields, got {}", record.len())));
        }
        let mut values = [0.0; 6];
        for (v, field) in values.iter_mut().zip(record.iter().skip(1)) {
            *v = field.parse().map_err(csv_error)?;
        }
        rows.push((record[0].to_string(), values));
    }
    Ok(rows)
}

/// ROC points as `method,class,fpr,tpr` rows for external plotting.
pub fn roc_csv(rows: &[(String, MetricsReport)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "class", "fpr", "tpr"]).map_err(csv_error)?;
    for (name, report) in rows {
        for (class, points) in &report.roc_points {
            for (fpr, tpr) in points {
                w.write_record([name.clone(), class.to_string(), fpr.to_string(), tpr.to_string()])
                    .map_err(csv_error)?;
            }
        }
    }
    String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binary_worked_example() {
        let r = compute_metrics(&[1, 1, 0, 0], &[1, 0, 0, 0], &LabelScheme::pe()).unwrap();
        assert_abs_diff_eq!(r.accuracy, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sensitivity, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(r.weighted_f1, (0.8 + 2.0 / 3.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.specificity, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn perfect_predictions() {
        let t = [0, 1, 2, 2, 1, 0];
        let r = compute_metrics(&t, &t, &LabelScheme::dvt()).unwrap();
        for v in r.columns() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_predictions_on_balanced_truths() {
        let r = compute_metrics(&[0, 0, 1, 1], &[0, 0, 0, 0], &LabelScheme::pe()).unwrap();
        assert_abs_diff_eq!(r.accuracy, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.specificity, 0.5, epsilon = 1e-12);
        assert_eq!(r.zero_division_classes, vec![1]);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            compute_metrics(&[0, 1], &[0], &LabelScheme::pe()),
            Err(Error::MetricInput(_))
        ));
    }

    #[test]
    fn roc_edge_cases() {
        let sep = roc_curve(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9], 1).unwrap();
        assert_abs_diff_eq!(sep.auc, 1.0, epsilon = 1e-9);
        let flat = roc_curve(&[0, 1, 0, 1], &[0.5; 4], 1).unwrap();
        assert_abs_diff_eq!(flat.auc, 0.5, epsilon = 1e-9);
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(roc_curve(&[1, 1], &[0.2, 0.3], 1), Err(Error::UndefinedRoc(_))));
        assert!(roc_curve(&[0, 1], &[0.2, 1.3], 1).is_err());
    }

    #[test]
    fn table_layout_and_csv_round_trip() {
        let t = [0, 1, 1, 0];
        let perfect = compute_metrics(&t, &t, &LabelScheme::pe()).unwrap();
        let table = render_table(&[("Perfect".into(), perfect.clone())]);
        let header = table.lines().next().unwrap();
        let positions: Vec<usize> = COLUMNS.iter().map(|c| header.find(c).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(table.lines().nth(1).unwrap().matches("1.000").count(), 6);

        let other = compute_metrics(&[1, 1, 0, 0], &[1, 0, 0, 0], &LabelScheme::pe()).unwrap();
        let rows = vec![("Perfect".to_string(), perfect), ("DL, rules".to_string(), other.clone())];
        let parsed = parse_table_csv(&table_csv(&rows).unwrap()).unwrap();
        assert_eq!(parsed[1].0, "DL, rules");
        assert_eq!(parsed[1].1, other.columns());
    }
}
