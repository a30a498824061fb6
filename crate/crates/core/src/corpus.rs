//! Reports, label schemes, splitting and the synthetic report generator.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::{rng_from_seed, Error, Result};

/// Which partition a report belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Validation(format!("unknown split `{other}`"))),
        }
    }
}

/// One de-identified free-text report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

impl Report {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<usize>) -> Self {
        Report {
            id: id.into(),
            text: text.into(),
            label,
            split: None,
        }
    }
}

/// Ordered classes of a classification task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelScheme {
    pub name: String,
    /// Human-readable class names, indexed by class id.
    pub classes: Vec<String>,
    pub minority_class: usize,
}

impl LabelScheme {
    pub fn new(name: impl Into<String>, classes: Vec<String>, minority_class: usize) -> Result<Self> {
        let scheme = LabelScheme {
            name: name.into(),
            classes,
            minority_class,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Ultrasound DVT task: no acute DVT / upper extremity / lower extremity.
    pub fn dvt() -> Self {
        LabelScheme {
            name: "dvt".into(),
            classes: vec![
                "No acute DVT".into(),
                "Upper extremity acute DVT".into(),
                "Lower extremity acute DVT".into(),
            ],
            minority_class: 1,
        }
    }

    /// CT angiography PE task: no PE / PE.
    pub fn pe() -> Self {
        LabelScheme {
            name: "pe".into(),
            classes: vec!["No PE".into(), "PE".into()],
            minority_class: 1,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "dvt" => Ok(Self::dvt()),
            "pe" => Ok(Self::pe()),
            other => Err(Error::UnsupportedScheme(other.to_string())),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Validation(format!(
                "label scheme `{}` needs at least two classes",
                self.name
            )));
        }
        if self.minority_class >= self.classes.len() {
            return Err(Error::Validation(format!(
                "minority class {} is not a class of `{}`",
                self.minority_class, self.name
            )));
        }
        Ok(())
    }
}

/// How to partition a labeled corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub validation_fraction_of_train: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    /// 80/20 train/test, then 90/10 train/validation, stratified.
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.2,
            validation_fraction_of_train: 0.1,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("test_fraction", self.test_fraction),
            ("validation_fraction_of_train", self.validation_fraction_of_train),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Validation(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Parameters of the synthetic report generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_reports: usize,
    pub class_proportions: Vec<f64>,
    pub mean_length_tokens: usize,
    /// Probability that a report carries explicitly negated finding sentences.
    pub negation_rate: f64,
    /// Probability that a report closes with an impression line. Ignored
    /// for report types without one.
    #[serde(default)]
    pub impression_rate: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// 900 PE reports at 88/12.
    pub fn pe_default(seed: u64) -> Self {
        SynthSpec {
            n_reports: 900,
            class_proportions: vec![0.88, 0.12],
            mean_length_tokens: 120,
            negation_rate: 0.6,
            impression_rate: 0.5,
            seed,
        }
    }

    /// 1000 DVT reports at 78/11/11.
    pub fn dvt_default(seed: u64) -> Self {
        SynthSpec {
            n_reports: 1000,
            class_proportions: vec![0.78, 0.11, 0.11],
            mean_length_tokens: 60,
            negation_rate: 0.6,
            impression_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self, scheme: &LabelScheme) -> Result<()> {
        let k = scheme.num_classes();
        if self.class_proportions.len() != k {
            return Err(Error::Validation(format!(
                "{} class proportions given for a {k}-class scheme",
                self.class_proportions.len()
            )));
        }
        if self.class_proportions.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Validation("class proportions must lie in [0, 1]".into()));
        }
        let total: f64 = self.class_proportions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "class proportions sum to {total}, expected 1"
            )));
        }
        if self.n_reports < k {
            return Err(Error::Validation(format!(
                "n_reports = {} is below one report per class ({k})",
                self.n_reports
            )));
        }
        if !(0.0..=1.0).contains(&self.negation_rate) {
            return Err(Error::Validation("negation_rate must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.impression_rate) {
            return Err(Error::Validation("impression_rate must lie in [0, 1]".into()));
        }
        if self.mean_length_tokens == 0 {
            return Err(Error::Validation("mean_length_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Checks id uniqueness, non-empty text, and labels against `scheme`.
pub fn validate_reports(reports: &[Report], scheme: &LabelScheme) -> Result<()> {
    let mut seen = HashSet::with_capacity(reports.len());
    for r in reports {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::Validation(format!("duplicate report id `{}`", r.id)));
        }
        if r.text.trim().is_empty() {
            return Err(Error::Validation(format!("report `{}` has empty text", r.id)));
        }
        if let Some(label) = r.label {
            if label >= scheme.num_classes() {
                return Err(Error::Validation(format!(
                    "report `{}` has label {label}, outside scheme `{}` (0..{})",
                    r.id,
                    scheme.name,
                    scheme.num_classes()
                )));
            }
        }
    }
    Ok(())
}

/// Reads a line-delimited JSON corpus.
pub fn load_corpus(path: impl AsRef<Path>, scheme: &LabelScheme) -> Result<Vec<Report>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reports = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let report: Report = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        reports.push(report);
    }
    validate_reports(&reports, scheme)?;
    Ok(reports)
}

pub fn write_corpus(path: impl AsRef<Path>, reports: &[Report]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_records(&mut w, reports).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Serializes reports one JSON object per line.
pub fn write_records<W: Write>(w: &mut W, reports: &[Report]) -> std::io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reports assigned to `split`, in corpus order.
pub fn in_split(reports: &[Report], split: Split) -> Vec<Report> {
    reports
        .iter()
        .filter(|r| r.split == Some(split))
        .cloned()
        .collect()
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Split sizes (train, validation, test) for a corpus of `n` reports.
pub fn split_sizes(n: usize, spec: &SplitSpec) -> (usize, usize, usize) {
    let test = round_half_up(spec.test_fraction * n as f64).min(n);
    let val = round_half_up(spec.validation_fraction_of_train * (n - test) as f64);
    (n - test - val, val, test)
}

/// Assigns every report to train, validation or test.
///
/// The test size is `round_half_up(test_fraction * N)`; validation is then
/// `round_half_up(validation_fraction_of_train * (N - test))`. Under
/// stratification every class receives, per split, a count within one sample
/// of its proportional share. The assignment depends only on report ids,
/// labels and the seed, never on input order.
pub fn split_corpus(reports: &[Report], spec: &SplitSpec) -> Result<Vec<Report>> {
    spec.validate()?;
    let mut labels = Vec::with_capacity(reports.len());
    for r in reports {
        labels.push(r.label.ok_or_else(|| {
            Error::Validation(format!("report `{}` is unlabeled and cannot be split", r.id))
        })?);
    }
    let n = reports.len();
    let (n_train, n_val, n_test) = split_sizes(n, spec);
    let mut rng = rng_from_seed(spec.seed);
    let mut assignment = vec![Split::Train; n];

    let by_id = |a: &usize, b: &usize| reports[*a].id.cmp(&reports[*b].id);

    if spec.stratified {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &label) in labels.iter().enumerate() {
            groups.entry(label).or_default().push(i);
        }
        for (&class, members) in &groups {
            if members.len() < 3 {
                return Err(Error::Stratification {
                    class,
                    count: members.len(),
                });
            }
        }
        let class_sizes: Vec<usize> = groups.values().map(Vec::len).collect();
        let counts = stratified_counts(&class_sizes, n_train, n_val, n_test)?;
        for (members, (test_c, val_c)) in groups.values_mut().zip(counts) {
            members.sort_by(by_id);
            members.shuffle(&mut rng);
            for (pos, &i) in members.iter().enumerate() {
                assignment[i] = if pos < test_c {
                    Split::Test
                } else if pos < test_c + val_c {
                    Split::Validation
                } else {
                    Split::Train
                };
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(by_id);
        order.shuffle(&mut rng);
        for (pos, &i) in order.iter().enumerate() {
            assignment[i] = if pos < n_test {
                Split::Test
            } else if pos < n_test + n_val {
                Split::Validation
            } else {
                Split::Train
            };
        }
    }

    Ok(reports
        .iter()
        .zip(assignment)
        .map(|(r, split)| Report {
            split: Some(split),
            ..r.clone()
        })
        .collect())
}

const EPS: f64 = 1e-9;

/// Per-class (test, validation) counts. Each count stays within one sample
/// of `split_size * class_size / N` and the column totals are exact.
fn stratified_counts(
    class_sizes: &[usize],
    n_train: usize,
    n_val: usize,
    n_test: usize,
) -> Result<Vec<(usize, usize)>> {
    let n: usize = class_sizes.iter().sum();
    let share = |size: usize, c: usize| size as f64 * class_sizes[c] as f64 / n as f64;
    let k = class_sizes.len();

    // Test column: largest remainder.
    let tq: Vec<f64> = (0..k).map(|c| share(n_test, c)).collect();
    let mut test: Vec<usize> = tq.iter().map(|q| (q + EPS).floor() as usize).collect();
    let mut missing = n_test - test.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = tq[a] - test[a] as f64;
        let rb = tq[b] - test[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().cycle().take(k * 2) {
        if missing == 0 {
            break;
        }
        if test[c] < class_sizes[c] {
            test[c] += 1;
            missing -= 1;
        }
    }

    // Validation column, keeping the implied train count inside its window too.
    let mut lo = vec![0usize; k];
    let mut hi = vec![0usize; k];
    let mut val = vec![0usize; k];
    let vq: Vec<f64> = (0..k).map(|c| share(n_val, c)).collect();
    for c in 0..k {
        let rem = (class_sizes[c] - test[c]) as f64;
        let trq = share(n_train, c);
        let low = (vq[c] - 1.0 - EPS).ceil().max((rem - trq - 1.0 - EPS).ceil()).max(0.0);
        let high = (vq[c] + 1.0 + EPS).floor().min((rem - trq + 1.0 + EPS).floor()).min(rem);
        lo[c] = low as usize;
        hi[c] = (high.max(low)) as usize;
        val[c] = ((vq[c] + EPS).floor() as usize).clamp(lo[c], hi[c]);
    }
    loop {
        let total: usize = val.iter().sum();
        if total == n_val {
            break;
        }
        let pick = if total < n_val {
            (0..k)
                .filter(|&c| val[c] < hi[c])
                .max_by(|&a, &b| (vq[a] - val[a] as f64).total_cmp(&(vq[b] - val[b] as f64)).then(b.cmp(&a)))
                .map(|c| (c, true))
        } else {
            (0..k)
                .filter(|&c| val[c] > lo[c])
                .max_by(|&a, &b| (val[a] as f64 - vq[a]).total_cmp(&(val[b] as f64 - vq[b])).then(b.cmp(&a)))
                .map(|c| (c, false))
        };
        match pick {
            Some((c, true)) => val[c] += 1,
            Some((c, false)) => val[c] -= 1,
            None => {
                return Err(Error::Validation(
                    "no stratified allocation satisfies the split sizes".into(),
                ))
            }
        }
    }
    Ok(test.into_iter().zip(val).collect())
}

/// Integer class counts for `n` items at the given proportions (largest
/// remainder, ties to the lower class id), at least one per class.
pub fn class_counts(n: usize, proportions: &[f64]) -> Vec<usize> {
    let k = proportions.len();
    let quotas: Vec<f64> = proportions.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + EPS).floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        (quotas[b] - counts[b] as f64)
            .total_cmp(&(quotas[a] - counts[a] as f64))
            .then(a.cmp(&b))
    });
    let mut assigned: usize = counts.iter().sum();
    for &c in order.iter().cycle() {
        if assigned >= n {
            break;
        }
        counts[c] += 1;
        assigned += 1;
    }
    // guarantee one of each class by borrowing from the largest
    for c in 0..k {
        if counts[c] == 0 {
            let donor = (0..k).max_by_key(|&d| (counts[d], std::cmp::Reverse(d))).unwrap();
            counts[donor] -= 1;
            counts[c] = 1;
        }
    }
    counts
}

const SIDES: &[&str] = &["right", "left"];
const LOBES: &[&str] = &["upper", "middle", "lower"];

const PE_FINDINGS: &[&str] = &[
    "There is a small filling defect within the subsegmental branch of the {side} {lobe} lobe pulmonary artery.",
    "Filling defects are seen in the segmental arteries of the {side} {lobe} lobe.",
    "Findings are consistent with acute pulmonary embolism.",
    "Occlusive thrombus is present in the {side} main pulmonary artery.",
    "Acute emboli are identified in the {side} {lobe} lobar arteries.",
    "A saddle embolus straddles the pulmonary trunk bifurcation.",
];

const PE_NEGATED: &[&str] = &[
    "No filling defect is identified in the segmental or subsegmental arteries.",
    "There is no evidence of pulmonary embolism.",
    "Negative for acute pulmonary embolism.",
    "The pulmonary arteries are well opacified without filling defect.",
    "Chronic thrombus in the {side} {lobe} lobar pulmonary artery is unchanged.",
];

const PE_IMPRESSION_POSITIVE: &[&str] = &[
    "Impression: acute pulmonary embolism.",
    "Impression: acute pulmonary emboli in the {side} {lobe} lobe.",
    "Impression: findings consistent with acute pulmonary embolism as described above.",
];

const PE_IMPRESSION_NEGATIVE: &[&str] = &[
    "Impression: no evidence of pulmonary embolism.",
    "Impression: no acute cardiopulmonary process.",
    "Impression: negative for pulmonary embolism.",
];

const PE_FILLER: &[&str] = &[
    "The heart is normal in size.",
    "There is mild bibasilar atelectasis.",
    "Small {side} pleural effusion.",
    "The thyroid gland is unremarkable.",
    "Degenerative changes of the thoracic spine.",
    "Scattered calcified granulomas are present.",
    "The visualized upper abdomen is within normal limits.",
    "Mediastinal lymph nodes are not enlarged.",
    "Indication: shortness of breath and tachycardia, rule out PE.",
    "Contrast bolus timing is adequate for evaluation of the pulmonary arteries.",
    "Mild emphysematous changes in the {side} {lobe} lobe.",
    "A 4 mm nodule in the {side} {lobe} lobe measures 0.4 cm.",
    "The aorta is normal in caliber.",
    "Coronary artery calcifications are noted.",
    "Airways are patent.",
    "Technique: contrast enhanced CT of the chest.",
    "Comparison is made with the prior study.",
];

const UPPER_VEINS: &[&str] = &["subclavian", "axillary", "brachial", "basilic", "internal jugular", "cephalic"];
const LOWER_VEINS: &[&str] = &["gastrocnemius", "soleal", "peroneal", "posterior tibial", "popliteal", "femoral"];

const DVT_UPPER: &[&str] = &[
    "There is occlusive thrombus in the {side} {upper} vein.",
    "Acute deep venous thrombosis of the {side} {upper} vein.",
    "The {side} {upper} vein is noncompressible with intraluminal thrombus.",
];

const DVT_LOWER: &[&str] = &[
    "There is persistent occlusive thrombus visualized at {side} {lower} veins.",
    "Acute deep venous thrombosis of the {side} {lower} vein.",
    "The {side} {lower} vein is noncompressible with intraluminal thrombus.",
];

const DVT_NEGATED: &[&str] = &[
    "No evidence of deep venous thrombosis in the {side} extremity.",
    "No acute DVT.",
    "The {side} {lower} vein is compressible without thrombus.",
];

const DVT_FILLER: &[&str] = &[
    "Normal flow and augmentation.",
    "The {side} common femoral, femoral and popliteal veins are compressible.",
    "Doppler waveforms are phasic.",
    "The {side} {upper} vein demonstrates normal color flow.",
    "Examination: duplex ultrasound of the {side} extremity.",
    "Some segments were not visualized due to the ECMO cannula.",
    "Subcutaneous edema is noted.",
    "Comparison: none.",
];

fn fill_template(template: &str, rng: &mut impl Rng) -> String {
    let mut out = template.to_string();
    for (key, options) in [
        ("{side}", SIDES),
        ("{lobe}", LOBES),
        ("{upper}", UPPER_VEINS),
        ("{lower}", LOWER_VEINS),
    ] {
        while let Some(pos) = out.find(key) {
            let choice = options[rng.random_range(0..options.len())];
            out.replace_range(pos..pos + key.len(), choice);
        }
    }
    out
}

fn pick<'a>(pool: &[&'a str], rng: &mut impl Rng) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

struct Templates {
    /// Finding sentences per class; empty for the negative class.
    findings: Vec<&'static [&'static str]>,
    negated: &'static [&'static str],
    filler: &'static [&'static str],
    /// Closing summary line per class; empty when the report type has none.
    impressions: Vec<&'static [&'static str]>,
}

fn templates_for(scheme: &LabelScheme) -> Result<Templates> {
    match (scheme.name.as_str(), scheme.num_classes()) {
        ("dvt", 3) => Ok(Templates {
            findings: vec![&[], DVT_UPPER, DVT_LOWER],
            negated: DVT_NEGATED,
            filler: DVT_FILLER,
            impressions: Vec::new(),
        }),
        (_, 2) => Ok(Templates {
            findings: vec![&[], PE_FINDINGS],
            negated: PE_NEGATED,
            filler: PE_FILLER,
            impressions: vec![PE_IMPRESSION_NEGATIVE, PE_IMPRESSION_POSITIVE],
        }),
        _ => Err(Error::UnsupportedScheme(format!(
            "no synthetic templates for `{}` with {} classes",
            scheme.name,
            scheme.num_classes()
        ))),
    }
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Draws a seeded synthetic corpus.
///
/// Class 0 reports contain only background sentences and negated findings.
/// Every other class has one or two unnegated finding sentences placed at a
/// random position. CT (PE) reports may close with an impression line that
/// restates the finding or its absence, at `impression_rate`. Report lengths follow a log-normal law around
/// `mean_length_tokens`, so a small share of reports is long enough to be
/// truncated by the tokenizer.
pub fn generate_synthetic(spec: &SynthSpec, scheme: &LabelScheme) -> Result<Vec<Report>> {
    scheme.validate()?;
    spec.validate(scheme)?;
    let templates = templates_for(scheme)?;
    let mut rng = rng_from_seed(spec.seed);

    let counts = class_counts(spec.n_reports, &spec.class_proportions);
    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    labels.shuffle(&mut rng);

    let sigma = 0.6f64;
    let mu = (spec.mean_length_tokens as f64).ln() - sigma * sigma / 2.0;
    let lengths = LogNormal::new(mu, sigma).expect("finite log-normal parameters");

    let width = spec.n_reports.to_string().len().max(4);
    let mut reports = Vec::with_capacity(spec.n_reports);
    for (i, &label) in labels.iter().enumerate() {
        let target = (lengths.sample(&mut rng).round() as usize).max(8);
        let mut sentences: Vec<String> = Vec::new();
        if rng.random_bool(spec.negation_rate) {
            let n_neg = rng.random_range(1..=2);
            for _ in 0..n_neg {
                sentences.push(fill_template(pick(templates.negated, &mut rng), &mut rng));
            }
        }
        let mut len: usize = sentences.iter().map(|s| word_count(s)).sum();
        let findings = templates.findings[label];
        let mut finding_sentences = Vec::new();
        if !findings.is_empty() {
            for _ in 0..rng.random_range(1..=2) {
                let s = fill_template(pick(findings, &mut rng), &mut rng);
                len += word_count(&s);
                finding_sentences.push(s);
            }
        }
        let impression = templates
            .impressions
            .get(label)
            .filter(|_| rng.random_bool(spec.impression_rate))
            .map(|pool| fill_template(pick(pool, &mut rng), &mut rng));
        len += impression.as_deref().map_or(0, word_count);
        while len < target {
            let s = fill_template(pick(templates.filler, &mut rng), &mut rng);
            len += word_count(&s);
            sentences.push(s);
        }
        sentences.shuffle(&mut rng);
        for s in finding_sentences {
            let at = rng.random_range(0..=sentences.len());
            sentences.insert(at, s);
        }
        sentences.extend(impression);
        reports.push(Report::new(
            format!("syn-{i:0width$}"),
            sentences.join(" "),
            Some(label),
        ));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(n: usize, label: usize) -> Vec<Report> {
        (0..n)
            .map(|i| Report::new(format!("r{i:03}"), "text", Some(label)))
            .collect()
    }

    fn count(reports: &[Report], split: Split) -> usize {
        reports.iter().filter(|r| r.split == Some(split)).count()
    }

    #[test]
    fn hundred_reports_split_72_8_20() {
        let mut reports = labeled(88, 0);
        reports.extend(
            (0..12).map(|i| Report::new(format!("p{i:03}"), "text", Some(1))),
        );
        let spec = SplitSpec {
            seed: 3,
            ..SplitSpec::default()
        };
        let out = split_corpus(&reports, &spec).unwrap();
        assert_eq!(count(&out, Split::Train), 72);
        assert_eq!(count(&out, Split::Validation), 8);
        assert_eq!(count(&out, Split::Test), 20);
        assert_eq!(out, split_corpus(&reports, &spec).unwrap());
    }

    #[test]
    fn single_class_split_7_1_2() {
        let reports = labeled(10, 0);
        let out = split_corpus(&reports, &SplitSpec::default()).unwrap();
        assert_eq!(count(&out, Split::Train), 7);
        assert_eq!(count(&out, Split::Validation), 1);
        assert_eq!(count(&out, Split::Test), 2);
        assert!(out.iter().all(|r| r.label == Some(0)));
    }

    #[test]
    fn stratification_needs_three_per_class() {
        let mut reports = labeled(10, 0);
        reports.push(Report::new("x", "text", Some(1)));
        reports.push(Report::new("y", "text", Some(1)));
        let err = split_corpus(&reports, &SplitSpec::default()).unwrap_err();
        assert!(matches!(err, Error::Stratification { class: 1, count: 2 }));
        let loose = SplitSpec {
            stratified: false,
            ..SplitSpec::default()
        };
        assert!(split_corpus(&reports, &loose).is_ok());
    }

    #[test]
    fn split_ignores_input_order() {
        let mut reports = labeled(30, 0);
        reports.extend((0..9).map(|i| Report::new(format!("q{i}"), "t", Some(1))));
        let spec = SplitSpec::default();
        let a = split_corpus(&reports, &spec).unwrap();
        let mut rev = reports.clone();
        rev.reverse();
        let mut b = split_corpus(&rev, &spec).unwrap();
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_fractions_and_unlabeled() {
        let spec = SplitSpec {
            test_fraction: 1.0,
            ..SplitSpec::default()
        };
        assert!(split_corpus(&labeled(10, 0), &spec).is_err());
        let reports = vec![Report::new("a", "t", None)];
        assert!(split_corpus(&reports, &SplitSpec::default()).is_err());
    }

    #[test]
    fn synthetic_class_counts_follow_proportions() {
        let spec = SynthSpec {
            n_reports: 100,
            class_proportions: vec![0.88, 0.12],
            mean_length_tokens: 40,
            negation_rate: 0.5,
            impression_rate: 0.0,
            seed: 7,
        };
        let reports = generate_synthetic(&spec, &LabelScheme::pe()).unwrap();
        assert_eq!(reports.iter().filter(|r| r.label == Some(0)).count(), 88);
        assert_eq!(reports.iter().filter(|r| r.label == Some(1)).count(), 12);
        assert_eq!(reports, generate_synthetic(&spec, &LabelScheme::pe()).unwrap());
    }

    #[test]
    fn synthetic_rejects_empty_and_bad_proportions() {
        let mut spec = SynthSpec::pe_default(1);
        spec.n_reports = 0;
        assert!(generate_synthetic(&spec, &LabelScheme::pe()).is_err());
        let mut spec = SynthSpec::pe_default(1);
        spec.class_proportions = vec![0.5, 0.4];
        assert!(generate_synthetic(&spec, &LabelScheme::pe()).is_err());
    }

    #[test]
    fn dvt_synthetic_has_three_classes() {
        let reports = generate_synthetic(&SynthSpec::dvt_default(2), &LabelScheme::dvt()).unwrap();
        assert_eq!(reports.len(), 1000);
        for c in 0..3 {
            assert!(reports.iter().any(|r| r.label == Some(c)));
        }
    }

    #[test]
    fn class_counts_largest_remainder() {
        assert_eq!(class_counts(100, &[0.78, 0.11, 0.11]), vec![78, 11, 11]);
        assert_eq!(class_counts(10, &[0.5, 0.25, 0.25]), vec![5, 3, 2]);
        assert_eq!(class_counts(2, &[0.99, 0.01]), vec![1, 1]);
    }

    #[test]
    fn scheme_validation() {
        assert!(LabelScheme::new("x", vec!["a".into()], 0).is_err());
        assert!(LabelScheme::new("x", vec!["a".into(), "b".into()], 2).is_err());
        assert!(LabelScheme::preset("pe").is_ok());
        assert!(LabelScheme::preset("other").is_err());
    }
}
