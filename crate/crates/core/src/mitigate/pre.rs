//! Pre-processing mitigation: reweighting, uniform and preferential
//! resampling, and geometric repair of numeric features.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{partition_levels, AuditDataset, FeatureColumn};
use crate::error::{Error, Result};

/// `(level, label)` cell key.
pub type Cell = (String, u8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub weights: Vec<f64>,
    pub cell_weights: BTreeMap<String, [f64; 2]>,
}

impl WeightVector {
    pub fn cell(&self, level: &str, label: u8) -> Option<f64> {
        self.cell_weights.get(level).map(|w| w[usize::from(label)])
    }
}

struct CellCounts {
    total: usize,
    label_totals: [usize; 2],
    /// level -> rows of label 0 and label 1
    rows: BTreeMap<String, [Vec<usize>; 2]>,
}

fn cell_counts(protected: &[String], y_true: &[u8]) -> Result<CellCounts> {
    if protected.len() != y_true.len() {
        return Err(Error::InvalidParameter("protected and label lengths differ".into()));
    }
    let mut rows: BTreeMap<String, [Vec<usize>; 2]> = BTreeMap::new();
    let mut label_totals = [0usize; 2];
    for (i, (level, &y)) in protected.iter().zip(y_true).enumerate() {
        if y > 1 {
            return Err(Error::InvalidParameter(format!("label {y} at row {} is not binary", i + 1)));
        }
        rows.entry(level.clone()).or_default()[usize::from(y)].push(i);
        label_totals[usize::from(y)] += 1;
    }
    for (level, cells) in &rows {
        for label in 0..2u8 {
            if cells[usize::from(label)].is_empty() {
                return Err(Error::EmptyCell {
                    level: level.clone(),
                    label,
                });
            }
        }
    }
    Ok(CellCounts {
        total: y_true.len(),
        label_totals,
        rows,
    })
}

impl CellCounts {
    fn weight(&self, level: &str, label: u8) -> f64 {
        let cells = &self.rows[level];
        let n_s = (cells[0].len() + cells[1].len()) as f64;
        let n_y = self.label_totals[usize::from(label)] as f64;
        let n_sy = cells[usize::from(label)].len() as f64;
        (n_s * n_y) / (self.total as f64 * n_sy)
    }
}

/// `w(s, y) = n_s · n_y / (N · n_{s,y})`: expected over observed frequency
/// of each (subgroup, label) cell.
pub fn reweight(protected: &[String], y_true: &[u8]) -> Result<WeightVector> {
    let counts = cell_counts(protected, y_true)?;
    let cell_weights: BTreeMap<String, [f64; 2]> = counts
        .rows
        .keys()
        .map(|l| (l.clone(), [counts.weight(l, 0), counts.weight(l, 1)]))
        .collect();
    let weights = protected
        .iter()
        .zip(y_true)
        .map(|(l, &y)| cell_weights[l][usize::from(y)])
        .collect();
    Ok(WeightVector { weights, cell_weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    Uniform,
    Preferential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPlan {
    pub level: String,
    pub label: u8,
    pub weight: f64,
    pub original: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub cells: Vec<CellPlan>,
    /// Selected rows, ascending, with repeats for duplicates.
    pub indices: Vec<usize>,
}

/// Resamples each (subgroup, label) cell to `round(w · n)` rows.
///
/// Preferential mode orders a cell's rows by `|ranker − cutoff|` (row index
/// breaks ties) and removes or duplicates the most borderline rows first,
/// cycling through the cell when more duplicates than rows are needed.
pub fn resample(
    protected: &[String],
    y_true: &[u8],
    mode: ResampleMode,
    ranker: Option<&[f64]>,
    cutoff: f64,
    seed: u64,
) -> Result<ResamplePlan> {
    let counts = cell_counts(protected, y_true)?;
    let ranker = match mode {
        ResampleMode::Preferential => {
            let r = ranker.ok_or_else(|| {
                Error::InvalidParameter("preferential resampling needs ranker scores".into())
            })?;
            if r.len() != y_true.len() {
                return Err(Error::InvalidParameter("ranker length differs from dataset".into()));
            }
            if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidParameter("ranker scores must lie in [0, 1]".into()));
            }
            Some(r)
        }
        ResampleMode::Uniform => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    let mut indices = Vec::new();
    for (level, by_label) in &counts.rows {
        for label in 0..2u8 {
            let rows = &by_label[usize::from(label)];
            let weight = counts.weight(level, label);
            let n = rows.len();
            // f64::round is half away from zero
            let target = (weight * n as f64).round() as usize;
            cells.push(CellPlan {
                level: level.clone(),
                label,
                weight,
                original: n,
                target,
            });
            match ranker {
                None => indices.extend(uniform_cell(rows, target, &mut rng)),
                Some(r) => indices.extend(preferential_cell(rows, target, r, cutoff)),
            }
        }
    }
    indices.sort_unstable();
    Ok(ResamplePlan { cells, indices })
}

fn uniform_cell(rows: &[usize], target: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = rows.len();
    if target >= n {
        let mut out = rows.to_vec();
        out.extend((0..target - n).map(|_| rows[rng.random_range(0..n)]));
        out
    } else {
        index::sample(rng, n, target).into_iter().map(|k| rows[k]).collect()
    }
}

fn preferential_cell(rows: &[usize], target: usize, ranker: &[f64], cutoff: f64) -> Vec<usize> {
    let mut order = rows.to_vec();
    order.sort_by(|&a, &b| {
        (ranker[a] - cutoff)
            .abs()
            .total_cmp(&(ranker[b] - cutoff).abs())
            .then(a.cmp(&b))
    });
    let n = rows.len();
    if target >= n {
        let mut out = rows.to_vec();
        out.extend(order.iter().cycle().take(target - n));
        out
    } else {
        order[n - target..].to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairedFeature {
    pub values: Vec<f64>,
    pub lambda: f64,
}

/// Linear-interpolated empirical quantile function of sorted values:
/// constant `sorted[0]` on `[0, 1/n]`, through `(k/n, sorted[k-1])`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * n as f64;
    if pos <= 1.0 {
        return sorted[0];
    }
    if pos >= n as f64 {
        return sorted[n - 1];
    }
    let k = pos.floor() as usize;
    let frac = pos - k as f64;
    sorted[k - 1] + frac * (sorted[k] - sorted[k - 1])
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Mid-rank of each value divided by the subgroup size, so ties share one
/// quantile in `(0, 1]`.
fn empirical_quantiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut q = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let mid_rank = (start + end + 2) as f64 / 2.0;
        for &i in &order[start..=end] {
            q[i] = mid_rank / n as f64;
        }
        start = end + 1;
    }
    q
}

/// Geometric repair: pulls each subgroup's distribution toward the
/// per-quantile median of all subgroup quantile functions.
///
/// The target is tabulated on a grid with step `1 / max(1000, N)` and read
/// by linear interpolation; `λ = 0` returns the input unchanged.
pub fn repair_feature(feature: &[f64], protected: &[String], lambda: f64) -> Result<RepairedFeature> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} must lie in [0, 1]")));
    }
    if feature.len() != protected.len() {
        return Err(Error::InvalidParameter("feature and protected lengths differ".into()));
    }
    if feature.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("feature has non-finite values".into()));
    }
    let partition = partition_levels(protected);
    let mut sorted_groups = Vec::with_capacity(partition.len());
    let mut group_quantiles = Vec::with_capacity(partition.len());
    for rows in partition.values() {
        let values: Vec<f64> = rows.iter().map(|&i| feature[i]).collect();
        group_quantiles.push(empirical_quantiles(&values));
        let mut sorted = values;
        sorted.sort_by(f64::total_cmp);
        sorted_groups.push(sorted);
    }

    let grid_size = feature.len().max(1000);
    let target: Vec<f64> = (0..=grid_size)
        .map(|k| {
            let q = k as f64 / grid_size as f64;
            let mut at_q: Vec<f64> = sorted_groups.iter().map(|s| quantile(s, q)).collect();
            median(&mut at_q)
        })
        .collect();
    let target_at = |q: f64| -> f64 {
        let pos = q * grid_size as f64;
        let k = (pos.floor() as usize).min(grid_size - 1);
        let frac = (pos - k as f64).clamp(0.0, 1.0);
        target[k] + frac * (target[k + 1] - target[k])
    };

    let mut values = feature.to_vec();
    for (rows, quantiles) in partition.values().zip(&group_quantiles) {
        for (&i, &q) in rows.iter().zip(quantiles) {
            let x = feature[i];
            let target = target_at(q);
            values[i] = if target == x { x } else { (1.0 - lambda) * x + lambda * target };
        }
    }
    Ok(RepairedFeature { values, lambda })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PreProcess {
    Reweight,
    ResampleUniform { seed: u64 },
    ResamplePreferential { ranker: String, cutoff: f64 },
    DisparateImpactRemover { feature: String, lambda: f64 },
}

/// Applies a pre-processing method and returns the transformed dataset.
/// Reweighting attaches a `_weights_` column; resampling materializes the
/// plan's rows; the remover replaces the named feature.
pub fn pre_process_data(dataset: &AuditDataset, method: &PreProcess) -> Result<AuditDataset> {
    match method {
        PreProcess::Reweight => {
            let w = reweight(dataset.protected(), dataset.y_true())?;
            let mut out = dataset.clone();
            out.set_weights(w.weights)?;
            Ok(out)
        }
        PreProcess::ResampleUniform { seed } => {
            let plan = resample(
                dataset.protected(),
                dataset.y_true(),
                ResampleMode::Uniform,
                None,
                0.5,
                *seed,
            )?;
            dataset.select_rows(&plan.indices)
        }
        PreProcess::ResamplePreferential { ranker, cutoff } => {
            let scores = &dataset.model(ranker)?.scores;
            let plan = resample(
                dataset.protected(),
                dataset.y_true(),
                ResampleMode::Preferential,
                Some(scores),
                *cutoff,
                0,
            )?;
            dataset.select_rows(&plan.indices)
        }
        PreProcess::DisparateImpactRemover { feature, lambda } => {
            let column = &dataset
                .feature(feature)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown feature `{feature}`")))?
                .column;
            let values = column.as_numeric().ok_or_else(|| {
                Error::InvalidParameter(format!("feature `{feature}` is categorical; repair needs numeric values"))
            })?;
            let repaired = repair_feature(values, dataset.protected(), *lambda)?;
            let mut out = dataset.clone();
            if let Some(f) = out.feature_mut(feature) {
                f.column = FeatureColumn::Numeric(repaired.values);
            }
            Ok(out)
        }
    }
}
