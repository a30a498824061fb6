//! Independent reference implementations used by the integration and
//! acceptance tests. None of these call into the code they check.

#![allow(dead_code)]

use regex::Regex;

use vte_pipeline::classifier::{ClassifierSpec, ModelParams};
use vte_pipeline::embed::EmbeddingMatrix;
use vte_pipeline::rules::RuleSet;
use vte_pipeline::tokenizer::split_sentences;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Hand-chosen weights for a one-layer Bi-LSTM with 3 inputs, 2 hidden
/// units and 2 classes. Gate index: 0 input, 1 forget, 2 cell, 3 output.
pub struct HandLstm {
    pub w: [[[[f64; 3]; 2]; 4]; 2],
    pub u: [[[[f64; 2]; 2]; 4]; 2],
    pub b: [[[f64; 2]; 4]; 2],
    pub head_w: [[f64; 4]; 2],
    pub head_b: [f64; 2],
}

impl HandLstm {
    pub fn new() -> Self {
        let mut m = HandLstm {
            w: [[[[0.0; 3]; 2]; 4]; 2],
            u: [[[[0.0; 2]; 2]; 4]; 2],
            b: [[[0.0; 2]; 4]; 2],
            head_w: [[0.0; 4]; 2],
            head_b: [0.1, -0.2],
        };
        for d in 0..2 {
            for g in 0..4 {
                for j in 0..2 {
                    for k in 0..3 {
                        m.w[d][g][j][k] = (((1 + 5 * d + 3 * g + 2 * j + k) % 7) as f64 - 3.0) / 4.0;
                    }
                    for k in 0..2 {
                        m.u[d][g][j][k] = (((2 + d + 2 * g + j + 3 * k) % 5) as f64 - 2.0) / 5.0;
                    }
                    m.b[d][g][j] = (g as f64 - 1.5) / 10.0 + 0.05 * j as f64 - 0.02 * d as f64;
                }
            }
        }
        for c in 0..2 {
            for f in 0..4 {
                m.head_w[c][f] = (((4 * c + f) % 5) as f64 - 2.0) / 3.0;
            }
        }
        m
    }

    /// Writes the weights into a library parameter vector: gate blocks are
    /// stacked row-wise in the order input, forget, cell, output.
    pub fn to_params(&self) -> ModelParams {
        let spec = ClassifierSpec::bilstm(3, 2, 1, 2);
        let mut p = ModelParams::zeros(&spec).unwrap();
        for (d, tag) in ["fwd", "bwd"].iter().enumerate() {
            let w = p.tensor_mut(&format!("lstm0.{tag}.w_ih")).unwrap();
            for g in 0..4 {
                for j in 0..2 {
                    for k in 0..3 {
                        w[(g * 2 + j) * 3 + k] = self.w[d][g][j][k];
                    }
                }
            }
            let u = p.tensor_mut(&format!("lstm0.{tag}.w_hh")).unwrap();
            for g in 0..4 {
                for j in 0..2 {
                    for k in 0..2 {
                        u[(g * 2 + j) * 2 + k] = self.u[d][g][j][k];
                    }
                }
            }
            let b = p.tensor_mut(&format!("lstm0.{tag}.bias")).unwrap();
            for g in 0..4 {
                for j in 0..2 {
                    b[g * 2 + j] = self.b[d][g][j];
                }
            }
        }
        let hw = p.tensor_mut("head.weight").unwrap();
        for c in 0..2 {
            for f in 0..4 {
                hw[c * 4 + f] = self.head_w[c][f];
            }
        }
        p.tensor_mut("head.bias").unwrap().copy_from_slice(&self.head_b);
        p
    }
}

/// Gates, cell and hidden state for one (direction, time) pair.
#[derive(Debug, Clone)]
pub struct OracleStep {
    pub direction: usize,
    pub time: usize,
    pub gates: [[f64; 2]; 4],
    pub c: [f64; 2],
    pub h: [f64; 2],
}

/// Step-by-step evaluation of the gate equations for `xs`.
pub fn lstm_oracle(m: &HandLstm, xs: &[[f64; 3]]) -> (Vec<OracleStep>, [f64; 4], [f64; 2]) {
    let mut steps = Vec::new();
    let mut finals = [[0.0; 2]; 2];
    for d in 0..2 {
        let order: Vec<usize> = if d == 0 {
            (0..xs.len()).collect()
        } else {
            (0..xs.len()).rev().collect()
        };
        let mut h = [0.0; 2];
        let mut c = [0.0; 2];
        for t in order {
            let x = xs[t];
            let mut a = [[0.0; 2]; 4];
            for g in 0..4 {
                for j in 0..2 {
                    let mut s = m.b[d][g][j];
                    for k in 0..3 {
                        s += m.w[d][g][j][k] * x[k];
                    }
                    for k in 0..2 {
                        s += m.u[d][g][j][k] * h[k];
                    }
                    a[g][j] = s;
                }
            }
            let mut gates = [[0.0; 2]; 4];
            for j in 0..2 {
                gates[0][j] = sigmoid(a[0][j]);
                gates[1][j] = sigmoid(a[1][j]);
                gates[2][j] = a[2][j].tanh();
                gates[3][j] = sigmoid(a[3][j]);
                c[j] = gates[1][j] * c[j] + gates[0][j] * gates[2][j];
                h[j] = gates[3][j] * c[j].tanh();
            }
            steps.push(OracleStep {
                direction: d,
                time: t,
                gates,
                c,
                h,
            });
        }
        finals[d] = h;
    }
    let features = [finals[0][0], finals[0][1], finals[1][0], finals[1][1]];
    let mut logits = [0.0; 2];
    for c in 0..2 {
        logits[c] = m.head_b[c] + (0..4).map(|f| m.head_w[c][f] * features[f]).sum::<f64>();
    }
    let z = logits[0].exp() + logits[1].exp();
    (steps, features, [logits[0].exp() / z, logits[1].exp() / z])
}

/// Largest relative deviation between analytic and central-difference
/// gradients, with deviations below `floor` measured absolutely.
pub fn gradient_check(params: &ModelParams, batch: &[(&EmbeddingMatrix, usize)], h: f64, floor: f64) -> f64 {
    let (_, analytic) = params.gradient(batch).unwrap();
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let v = params.values()[i];
        probe.values_mut()[i] = v + h;
        let up = probe.loss(batch).unwrap();
        probe.values_mut()[i] = v - h;
        let down = probe.loss(batch).unwrap();
        probe.values_mut()[i] = v;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

/// Rule scoring by direct enumeration of every (sentence, rule, negation)
/// combination, compiling each pattern afresh.
pub fn rule_oracle(text: &str, rules: &RuleSet) -> (i32, Vec<i32>) {
    let mut sentence_scores = Vec::new();
    for sentence in split_sentences(text) {
        let mut score = 0;
        for rule in &rules.rules {
            let mut all = true;
            for term in &rule.required_terms {
                if !Regex::new(&format!("(?i){term}")).unwrap().is_match(&sentence) {
                    all = false;
                }
            }
            if !all {
                continue;
            }
            let mut negated = false;
            if rule.score == 1 {
                for term in &rule.negation_terms {
                    if Regex::new(&format!("(?i){term}")).unwrap().is_match(&sentence) {
                        negated = true;
                    }
                }
            }
            if !negated {
                score += rule.score;
            }
        }
        sentence_scores.push(score);
    }
    (sentence_scores.iter().sum(), sentence_scores)
}

/// Point metrics recomputed by counting, in table column order:
/// accuracy, sensitivity, specificity, precision, recall, F1.
pub fn metrics_oracle(truths: &[usize], preds: &[usize], k: usize) -> [f64; 6] {
    let n = truths.len() as f64;
    let correct = truths.iter().zip(preds).filter(|(t, p)| t == p).count() as f64;
    let mut out = [correct / n, 0.0, 0.0, 0.0, 0.0, 0.0];
    for c in 0..k {
        let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
        for (&t, &p) in truths.iter().zip(preds) {
            match (t == c, p == c) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                (false, false) => tn += 1.0,
            }
        }
        let w = (tp + fn_) / n;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let tnr = if tn + fp > 0.0 { tn / (tn + fp) } else { 1.0 };
        out[1] += w * recall;
        out[2] += w * tnr;
        out[3] += w * precision;
        out[4] += w * recall;
        out[5] += w * f1;
    }
    out
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half.
pub fn wilcoxon_auc(truths: &[usize], scores: &[f64], positive: usize) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &ti) in truths.iter().enumerate() {
        if ti != positive {
            continue;
        }
        for (j, &tj) in truths.iter().enumerate() {
            if tj == positive {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
