mod common;

use proptest::prelude::*;

use common::{metrics_oracle, rule_oracle, wilcoxon_auc};
use vte_pipeline::classifier::Prediction;
use vte_pipeline::corpus::{generate_synthetic, LabelScheme, SynthSpec};
use vte_pipeline::hybrid::{combine, DecisionSource, HybridConfig};
use vte_pipeline::metrics::{compute_metrics, parse_table_csv, roc_curve, table_csv};
use vte_pipeline::rules::{load_ruleset, Rule, RuleSet};
use vte_pipeline::Error;

const SENTENCES: &[&str] = &[
    "Small filling defect within the subsegmental branch.",
    "No filling defect in the segmental arteries.",
    "Acute pulmonary embolism in the right lower lobe.",
    "Chronic thrombus in the left lobar artery is unchanged.",
    "Chronic embolus is again seen.",
    "Suboptimal bolus timing.",
    "The heart is normal in size.",
    "Question of embolus in a segmental branch.",
    "Mild bibasilar atelectasis.",
];

fn report_strategy() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(SENTENCES), 0..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sentence_order_does_not_change_the_score(mut sentences in report_strategy(), seed in any::<u64>()) {
        let rules = RuleSet::demo_pe();
        let before = rules.score_report(&sentences.join(" ")).report_score;
        let n = sentences.len();
        if n > 1 {
            sentences.rotate_left((seed as usize) % n);
            sentences.swap(0, (seed as usize / 7) % n);
        }
        prop_assert_eq!(rules.score_report(&sentences.join(" ")).report_score, before);
    }

    #[test]
    fn appending_a_silent_sentence_changes_nothing(sentences in report_strategy(), filler in "[a-z]{1,6}( [a-z]{1,6}){0,4}") {
        let rules = RuleSet::demo_pe();
        prop_assume!(rules.score_sentence(&filler).1.is_empty());
        let text = sentences.join(" ");
        let before = rules.score_report(&text).report_score;
        let after = rules.score_report(&format!("{text} {filler}.")).report_score;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn verdicts_match_the_brute_force_oracle(sentences in report_strategy()) {
        let rules = RuleSet::demo_pe();
        let text = sentences.join(" ");
        let v = rules.score_report(&text);
        let (score, per_sentence) = rule_oracle(&text, &rules);
        prop_assert_eq!(v.report_score, score);
        prop_assert_eq!(v.sentence_scores.iter().sum::<i32>(), v.report_score);
        prop_assert_eq!(v.sentence_scores, per_sentence);
        prop_assert_eq!(v.positive, score > 0);
    }

    #[test]
    fn negation_only_voids_positive_rules(score in -1i32..=1, negated in any::<bool>()) {
        let rule = Rule::new(&["clot"], score, &["no"]).unwrap();
        let set = RuleSet::new("t", vec![rule], 0).unwrap();
        let text = if negated { "no clot" } else { "clot" };
        let expected = if negated && score == 1 { 0 } else { score };
        prop_assert_eq!(set.score_sentence(text).0, expected);
    }

    #[test]
    fn metrics_are_permutation_invariant(
        pairs in prop::collection::vec((0usize..3, 0usize..3), 1..50),
        seed in any::<u64>(),
    ) {
        let scheme = LabelScheme::dvt();
        let (t, p): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let a = compute_metrics(&t, &p, &scheme).unwrap().columns();
        let mut shuffled = pairs.clone();
        let n = shuffled.len();
        for i in 0..n {
            shuffled.swap(i, (seed as usize).wrapping_mul(i + 1) % n);
        }
        let (t2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        let b = compute_metrics(&t2, &p2, &scheme).unwrap().columns();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        // sensitivity is support-weighted recall, which is accuracy
        prop_assert!((a[0] - a[1]).abs() < 1e-12);
        let oracle = metrics_oracle(&t, &p, 3);
        for (x, y) in a.iter().zip(&oracle) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_auc_is_the_pair_count(
        pairs in prop::collection::vec((0usize..2, 0u8..20), 2..80),
    ) {
        let truths: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        prop_assume!(truths.contains(&0) && truths.contains(&1));
        let scores: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 19.0).collect();
        let curve = roc_curve(&truths, &scores, 1).unwrap();
        prop_assert!((curve.auc - wilcoxon_auc(&truths, &scores, 1)).abs() < 1e-9);
        prop_assert_eq!(curve.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(curve.points.last().copied(), Some((1.0, 1.0)));
    }

    #[test]
    fn negative_rule_verdict_keeps_the_dl_output(p_neg in 0.0f64..=1.0, dl in 0usize..2, score in -3i32..=0) {
        let rules = RuleSet::new("t", vec![Rule::new(&["x"], 1, &[] as &[&str]).unwrap()], 0).unwrap();
        let mut verdict = rules.score_report("");
        verdict.report_score = score;
        verdict.positive = false;
        let prediction = Prediction { probabilities: vec![p_neg, 1.0 - p_neg], predicted_class: dl };
        let d = combine(&prediction, &verdict, &HybridConfig::default()).unwrap();
        prop_assert_eq!(d.final_class, dl);
        prop_assert_eq!(d.source, DecisionSource::Dl);
    }
}

#[test]
fn worked_metric_examples() {
    let pe = LabelScheme::pe();
    let r = compute_metrics(&[1, 1, 0, 0], &[1, 0, 0, 0], &pe).unwrap();
    assert!((r.accuracy - 0.75).abs() < 1e-12);
    assert!((r.sensitivity - 0.75).abs() < 1e-12);
    // per-class F1: 2/3 for class 1 (p 1, r 1/2) and 4/5 for class 0 (p 2/3, r 1)
    assert!((r.weighted_f1 - (0.5 * 2.0 / 3.0 + 0.5 * 0.8)).abs() < 1e-12);

    let single = compute_metrics(&[0, 0, 1, 1], &[1, 1, 1, 1], &pe).unwrap();
    assert!((single.accuracy - 0.5).abs() < 1e-12);
    // class 0: TNR 1 (never predicted), class 1: TNR 0
    assert!((single.specificity - 0.5).abs() < 1e-12);
    assert_eq!(single.zero_division_classes, vec![0]);
    assert_eq!(single.weighted_precision, 0.25);

    let perfect = compute_metrics(&[0, 1, 2, 1], &[0, 1, 2, 1], &LabelScheme::dvt()).unwrap();
    assert_eq!(perfect.columns(), [1.0; 6]);
}

#[test]
fn roc_edge_cases() {
    let sep = roc_curve(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9], 1).unwrap();
    assert!((sep.auc - 1.0).abs() < 1e-9);
    let flat = roc_curve(&[0, 1, 0, 1], &[0.5; 4], 1).unwrap();
    assert!((flat.auc - 0.5).abs() < 1e-9);
    assert_eq!(flat.points.len(), 2);
    assert!(matches!(roc_curve(&[1, 1], &[0.3, 0.4], 1), Err(Error::UndefinedRoc(_))));
}

#[test]
fn csv_table_round_trip() {
    let pe = LabelScheme::pe();
    let rows = vec![
        ("DL".to_string(), compute_metrics(&[1, 0, 0, 1, 0], &[1, 0, 1, 0, 0], &pe).unwrap()),
        ("DL + Rules".to_string(), compute_metrics(&[1, 0, 0, 1, 0], &[1, 0, 0, 1, 0], &pe).unwrap()),
    ];
    let parsed = parse_table_csv(&table_csv(&rows).unwrap()).unwrap();
    assert_eq!(parsed.len(), 2);
    for ((name, report), (pname, values)) in rows.iter().zip(&parsed) {
        assert_eq!(name, pname);
        assert_eq!(&report.columns(), values);
    }
}

#[test]
fn worked_hybrid_examples() {
    let config = HybridConfig::default();
    let rules = RuleSet::demo_pe();
    let one = rules.score_report("Acute pulmonary embolism.");
    let two = rules.score_report("Acute pulmonary embolism. Filling defect in a segmental artery.");
    let clean = rules.score_report("Normal heart.");
    assert_eq!((one.report_score, two.report_score, clean.report_score), (1, 2, 0));
    let neg = |p: f64| Prediction::from_probabilities(vec![p, 1.0 - p]);
    let cases = [
        (neg(0.90), &one, 1, DecisionSource::RuleOverride),
        (neg(0.97), &one, 0, DecisionSource::DlConfidentException),
        (neg(0.97), &two, 1, DecisionSource::RuleOverride),
        (neg(0.40), &clean, 1, DecisionSource::Dl),
    ];
    for (prediction, verdict, class, source) in cases {
        let d = combine(&prediction, verdict, &config).unwrap();
        assert_eq!((d.final_class, d.source), (class, source));
    }
    let three = Prediction::from_probabilities(vec![0.2, 0.3, 0.5]);
    assert!(matches!(combine(&three, &one, &config), Err(Error::UnsupportedScheme(_))));
}

#[test]
fn ruleset_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_score = dir.path().join("score.txt");
    std::fs::write(&bad_score, "required: clot; score: 2\n").unwrap();
    assert!(matches!(load_ruleset(&bad_score), Err(Error::Validation(_))));
    let bad_regex = dir.path().join("regex.txt");
    std::fs::write(&bad_regex, "required: (; score: 1\n").unwrap();
    assert!(matches!(load_ruleset(&bad_regex), Err(Error::RuleLoad { rule: 1, .. })));
    assert!(RuleSet::demo_pe().rules.len() >= 3);
}

#[test]
fn demo_rules_agree_with_the_oracle_on_synthetic_reports() {
    let rules = RuleSet::demo_pe();
    let reports = generate_synthetic(
        &SynthSpec {
            n_reports: 50,
            ..SynthSpec::pe_default(77)
        },
        &LabelScheme::pe(),
    )
    .unwrap();
    for r in &reports {
        let v = rules.score_report(&r.text);
        assert_eq!((v.report_score, v.sentence_scores.clone()), rule_oracle(&r.text, &rules), "{}", r.id);
    }
}
