//! Independent reference computations and random fixtures shared by the
//! property tests and the acceptance runner. Nothing here calls into the
//! library's metric or mitigation code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use fairaudit::data::protected_spec_from_levels;
use fairaudit::{AuditDataset, MetricId, ProtectedSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const LEVELS: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Confusion counts of one subgroup by direct scan over rows.
pub fn counts_for(y: &[u8], protected: &[String], scores: &[f64], level: &str, cutoff: f64) -> Counts {
    let mut c = Counts::default();
    for i in 0..y.len() {
        if protected[i] != level {
            continue;
        }
        let predicted = scores[i] >= cutoff;
        match (y[i] == 1, predicted) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    c
}

fn frac(num: u64, den: u64) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Metric by its count formula; F1 from PPV and TPR as `2·PPV·TPR / (PPV + TPR)`.
pub fn metric_oracle(c: Counts, id: MetricId) -> Option<f64> {
    let Counts { tp, fp, tn, fn_ } = c;
    match id {
        MetricId::TPR => frac(tp, tp + fn_),
        MetricId::TNR => frac(tn, tn + fp),
        MetricId::PPV => frac(tp, tp + fp),
        MetricId::NPV => frac(tn, tn + fn_),
        MetricId::FNR => frac(fn_, tp + fn_),
        MetricId::FPR => frac(fp, tn + fp),
        MetricId::FDR => frac(fp, tp + fp),
        MetricId::FOR => frac(fn_, tn + fn_),
        MetricId::TS => frac(tp, tp + fp + fn_),
        MetricId::STP => frac(tp + fp, tp + fp + tn + fn_),
        MetricId::ACC => frac(tp + tn, tp + fp + tn + fn_),
        MetricId::F1 => {
            let ppv = frac(tp, tp + fp)?;
            let tpr = frac(tp, tp + fn_)?;
            if ppv + tpr == 0.0 {
                None
            } else {
                Some(2.0 * ppv * tpr / (ppv + tpr))
            }
        }
    }
}

/// F1 in count form `2·TP / (2·TP + FP + FN)`; algebraically equal to the
/// PPV/TPR form, not bit-identical.
pub fn f1_count_form(c: Counts) -> Option<f64> {
    if c.tp == 0 {
        None
    } else {
        frac(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
    }
}

/// Parity loss of one metric from per-level metric values: summed
/// `|ln(unprivileged / privileged)|`, undefined if any ratio is undefined
/// or zero.
pub fn parity_loss_oracle(values: &BTreeMap<String, Option<f64>>, spec: &ProtectedSpec) -> Option<f64> {
    let p = values[&spec.privileged]?;
    if p == 0.0 {
        return None;
    }
    let mut total = 0.0;
    for level in &spec.unprivileged {
        let r = values[level]? / p;
        if r == 0.0 {
            return None;
        }
        total += r.ln().abs();
    }
    Some(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub cutoff: f64,
    pub loss: f64,
    pub skipped: usize,
}

/// Recomputes the summed parity loss at every grid point from raw rows.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_sweep(
    y: &[u8],
    protected: &[String],
    scores: &[f64],
    spec: &ProtectedSpec,
    base_cutoffs: &BTreeMap<String, f64>,
    subgroup: &str,
    metrics: &[MetricId],
    grid: &[f64],
) -> Vec<GridPoint> {
    grid.iter()
        .map(|&c| {
            let cutoff_of = |level: &str| if level == subgroup { c } else { base_cutoffs[level] };
            let counts: BTreeMap<String, Counts> = spec
                .levels()
                .map(|l| (l.clone(), counts_for(y, protected, scores, l, cutoff_of(l))))
                .collect();
            let mut loss = 0.0;
            let mut skipped = 0;
            for &id in metrics {
                let values = counts.iter().map(|(l, c)| (l.clone(), metric_oracle(*c, id))).collect();
                match parity_loss_oracle(&values, spec) {
                    Some(v) => loss += v,
                    None => skipped += 1,
                }
            }
            GridPoint { cutoff: c, loss, skipped }
        })
        .collect()
}

/// Grid point with the fewest undefined metrics, then lowest loss, then
/// smallest cutoff, found by a linear scan.
pub fn brute_force_best(points: &[GridPoint]) -> &GridPoint {
    let mut best = &points[0];
    for p in &points[1..] {
        let better = p.skipped < best.skipped
            || (p.skipped == best.skipped && p.loss < best.loss)
            || (p.skipped == best.skipped && p.loss == best.loss && p.cutoff < best.cutoff);
        if better {
            best = p;
        }
    }
    best
}

/// AUC by counting every positive/negative pair; ties count one half.
pub fn auc_pairs(scores: &[f64], y: &[u8]) -> f64 {
    let mut twice = 0u64;
    let pos = y.iter().filter(|&&l| l == 1).count() as u64;
    let neg = y.len() as u64 - pos;
    for i in 0..y.len() {
        if y[i] != 1 {
            continue;
        }
        for j in 0..y.len() {
            if y[j] != 0 {
                continue;
            }
            if scores[i] > scores[j] {
                twice += 2;
            } else if scores[i] == scores[j] {
                twice += 1;
            }
        }
    }
    twice as f64 / 2.0 / (pos as f64 * neg as f64)
}

/// Weight of each row so that label and protected level look independent:
/// `P(level)·P(label) / P(level, label)` in counts.
pub fn reweight_oracle(protected: &[String], y: &[u8]) -> Vec<f64> {
    let n = y.len() as f64;
    let mut level_n: BTreeMap<&str, f64> = BTreeMap::new();
    let mut label_n = [0.0f64; 2];
    let mut cell_n: BTreeMap<(&str, u8), f64> = BTreeMap::new();
    for (p, &l) in protected.iter().zip(y) {
        *level_n.entry(p).or_default() += 1.0;
        label_n[l as usize] += 1.0;
        *cell_n.entry((p, l)).or_default() += 1.0;
    }
    protected
        .iter()
        .zip(y)
        .map(|(p, &l)| level_n[p.as_str()] * label_n[l as usize] / (n * cell_n[&(p.as_str(), l)]))
        .collect()
}

pub struct Fixture {
    pub y: Vec<u8>,
    pub protected: Vec<String>,
    pub scores: Vec<f64>,
}

impl Fixture {
    pub fn dataset(&self) -> AuditDataset {
        AuditDataset::new(self.y.clone(), self.protected.clone())
            .unwrap()
            .with_model("m", self.scores.clone())
            .unwrap()
    }

    pub fn spec(&self) -> ProtectedSpec {
        let mut levels: Vec<String> = self.protected.clone();
        levels.sort();
        levels.dedup();
        protected_spec_from_levels(&levels, &levels[0]).unwrap()
    }
}

/// Random fixture with `levels` subgroups, every (level, label) cell
/// non-empty, scores on a 1/`resolution` lattice (0 for continuous).
pub fn random_fixture(r: &mut ChaCha8Rng, levels: usize, rows: usize, resolution: u32) -> Fixture {
    assert!(rows >= 2 * levels);
    let mut y = Vec::with_capacity(rows);
    let mut protected = Vec::with_capacity(rows);
    // seed every cell once
    for level in LEVELS.iter().take(levels) {
        y.push(0);
        protected.push(level.to_string());
        y.push(1);
        protected.push(level.to_string());
    }
    while y.len() < rows {
        protected.push(LEVELS[r.random_range(0..levels)].to_string());
        y.push(u8::from(r.random_bool(0.55)));
    }
    let scores = (0..rows)
        .map(|i| {
            let tilt = if y[i] == 1 { 0.15 } else { -0.15 };
            let raw: f64 = (r.random::<f64>() + tilt).clamp(0.0, 1.0);
            if resolution == 0 {
                raw
            } else {
                (raw * resolution as f64).round() / resolution as f64
            }
        })
        .collect();
    Fixture { y, protected, scores }
}
