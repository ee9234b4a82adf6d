//! Post-processing mitigation: reject-option pivot and per-subgroup cutoff
//! search.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{partition_subgroups, AuditDataset, CutoffMap, Partition, ProtectedSpec};
use crate::error::{Error, Result};
use crate::metrics::{model_metrics, parity_loss, MetricId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotParams {
    pub theta: f64,
    pub cutoff: f64,
}

impl PivotParams {
    pub fn new(theta: f64, cutoff: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!("theta {theta} must lie in (0, 1)")));
        }
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return Err(Error::InvalidParameter(format!("cutoff {cutoff} must lie in (0, 1)")));
        }
        Ok(Self { theta, cutoff })
    }

    /// Open interval `(cutoff − θ, cutoff + θ)`.
    pub fn in_region(&self, score: f64) -> bool {
        score > self.cutoff - self.theta && score < self.cutoff + self.theta
    }
}

/// Mirrors borderline scores across the cutoff: privileged rows at or above
/// the cutoff move below it, unprivileged rows below it move above it.
/// A score equal to the cutoff is on the favorable side.
pub fn roc_pivot(scores: &[f64], protected: &[String], spec: &ProtectedSpec, params: PivotParams) -> Result<Vec<f64>> {
    let params = PivotParams::new(params.theta, params.cutoff)?;
    if scores.len() != protected.len() {
        return Err(Error::InvalidParameter("scores and protected lengths differ".into()));
    }
    let c = params.cutoff;
    Ok(scores
        .iter()
        .zip(protected)
        .map(|(&s, level)| {
            if !params.in_region(s) {
                return s;
            }
            let privileged = *level == spec.privileged;
            let flip = if privileged { s >= c } else { s < c };
            if flip {
                (2.0 * c - s).clamp(0.0, 1.0)
            } else {
                s
            }
        })
        .collect())
}

/// `0.01, 0.02, …, 0.99` for step `0.01`: `k / n` with `n = round(1 / step)`.
pub fn cutoff_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::InvalidParameter(format!("grid step {step} must lie in (0, 1)")));
    }
    let n = (1.0 / step).round() as usize;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("grid step {step} leaves no interior cutoffs")));
    }
    Ok((1..n).map(|k| k as f64 / n as f64).collect())
}

pub fn default_grid() -> Vec<f64> {
    (1..100).map(|k| k as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLoss {
    pub cutoff: f64,
    pub per_metric: BTreeMap<MetricId, Option<f64>>,
    /// Sum over the defined entries of `per_metric`.
    pub cumulated: f64,
    pub skipped: usize,
}

/// Parity losses of one model at one cutoff map.
pub(crate) fn grid_loss(
    dataset: &AuditDataset,
    partition: &Partition,
    spec: &ProtectedSpec,
    scores: &[f64],
    cutoffs: &CutoffMap,
    metrics: &[MetricId],
    cutoff: f64,
) -> Result<GridLoss> {
    let m = model_metrics(dataset, partition, "", scores, cutoffs)?;
    let mut per_metric = BTreeMap::new();
    let mut cumulated = 0.0;
    let mut skipped = 0;
    for &id in metrics {
        let loss = parity_loss(&m.values, spec, id);
        match loss {
            Some(v) => cumulated += v,
            None => skipped += 1,
        }
        per_metric.insert(id, loss);
    }
    Ok(GridLoss {
        cutoff,
        per_metric,
        cumulated,
        skipped,
    })
}

/// Index of the best grid point: fewest skipped metrics first, then the
/// lowest cumulated loss, then the smallest cutoff.
pub fn best_index(losses: &[GridLoss]) -> Option<usize> {
    let min_skipped = losses.iter().map(|l| l.skipped).min()?;
    losses
        .iter()
        .enumerate()
        .filter(|(_, l)| l.skipped == min_skipped)
        .min_by(|(_, a), (_, b)| a.cumulated.total_cmp(&b.cumulated).then(a.cutoff.total_cmp(&b.cutoff)))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSearchResult {
    pub model: String,
    pub subgroup: String,
    pub metrics: Vec<MetricId>,
    pub grid: Vec<f64>,
    pub losses: Vec<GridLoss>,
    pub best_cutoff: f64,
    pub best_loss: f64,
    /// Metrics undefined at the best cutoff.
    pub best_skipped: usize,
}

/// Sweeps the cutoff of one subgroup over `grid`, other subgroups keeping
/// their cutoffs from `cutoffs`, and picks the minimal summed parity loss.
pub fn cutoff_search(
    dataset: &AuditDataset,
    spec: &ProtectedSpec,
    cutoffs: &CutoffMap,
    model: &str,
    subgroup: &str,
    metrics: &[MetricId],
    grid: &[f64],
) -> Result<CutoffSearchResult> {
    if metrics.is_empty() {
        return Err(Error::InvalidParameter("cutoff search needs at least one metric".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("cutoff grid is empty".into()));
    }
    let levels = dataset.levels();
    if !levels.iter().any(|l| l == subgroup) {
        return Err(Error::UnknownLevel {
            level: subgroup.to_string(),
            available: levels,
        });
    }
    cutoffs.covers(&levels)?;
    let scores = &dataset.model(model)?.scores;
    let partition = partition_subgroups(dataset);

    let losses = grid
        .iter()
        .map(|&c| {
            let map = cutoffs.clone().with(subgroup, c)?;
            grid_loss(dataset, &partition, spec, scores, &map, metrics, c)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = best_index(&losses).expect("grid is non-empty");
    Ok(CutoffSearchResult {
        model: model.to_string(),
        subgroup: subgroup.to_string(),
        metrics: metrics.to_vec(),
        grid: grid.to_vec(),
        best_cutoff: losses[best].cutoff,
        best_loss: losses[best].cumulated,
        best_skipped: losses[best].skipped,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::protected_spec_from_levels;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn spec() -> ProtectedSpec {
        protected_spec_from_levels(&s(&["a", "b"]), "a").unwrap()
    }

    #[test]
    fn pivot_examples() {
        let p = PivotParams::new(0.05, 0.5).unwrap();
        let out = roc_pivot(&[0.48, 0.52, 0.30, 0.52, 0.48], &s(&["b", "a", "a", "b", "a"]), &spec(), p).unwrap();
        assert!((out[0] - 0.52).abs() < 1e-15);
        assert!((out[1] - 0.48).abs() < 1e-15);
        assert_eq!(out[2], 0.30);
        assert_eq!(out[3], 0.52);
        assert_eq!(out[4], 0.48);
    }

    #[test]
    fn pivot_region_bounds() {
        let p = PivotParams::new(0.1, 0.6).unwrap();
        assert!(!p.in_region(0.5) && !p.in_region(0.7));
        assert!(p.in_region(0.51) && p.in_region(0.69));
        assert!(PivotParams::new(0.0, 0.5).is_err());
        assert!(PivotParams::new(1.0, 0.5).is_err());
    }

    #[test]
    fn pivot_at_cutoff_is_fixed_point() {
        let p = PivotParams::new(0.2, 0.5).unwrap();
        let out = roc_pivot(&[0.5, 0.5], &s(&["a", "b"]), &spec(), p).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn pivot_clamps() {
        let p = PivotParams::new(0.5, 0.7).unwrap();
        let out = roc_pivot(&[0.3], &s(&["b"]), &spec(), p).unwrap();
        assert_eq!(out, vec![1.0]);
    }

    #[test]
    fn grid_generation() {
        let g = cutoff_grid(0.01).unwrap();
        assert_eq!(g.len(), 99);
        assert_eq!(g, default_grid());
        assert_eq!(cutoff_grid(0.25).unwrap(), vec![0.25, 0.5, 0.75]);
        assert!(cutoff_grid(0.0).is_err());
    }

    #[test]
    fn symmetric_groups_pick_smallest_cutoff() {
        let d = AuditDataset::new(vec![1, 0, 1, 0], s(&["a", "a", "b", "b"]))
            .unwrap()
            .with_model("m", vec![0.8, 0.3, 0.8, 0.3])
            .unwrap();
        let cut = CutoffMap::for_dataset(&d);
        let r = cutoff_search(&d, &spec(), &cut, "m", "b", &[MetricId::ACC, MetricId::STP], &default_grid()).unwrap();
        assert_eq!(r.best_loss, 0.0);
        // grid points 0.31..=0.80 reproduce group a's predictions; 0.31 is smallest
        assert_eq!(r.best_cutoff, 0.31);
    }

    #[test]
    fn single_point_grid() {
        let d = AuditDataset::new(vec![1, 0, 1, 0], s(&["a", "a", "b", "b"]))
            .unwrap()
            .with_model("m", vec![0.8, 0.3, 0.6, 0.1])
            .unwrap();
        let cut = CutoffMap::for_dataset(&d);
        let r = cutoff_search(&d, &spec(), &cut, "m", "b", &[MetricId::TPR], &[0.42]).unwrap();
        assert_eq!(r.best_cutoff, 0.42);
        assert!(cutoff_search(&d, &spec(), &cut, "m", "b", &[], &[0.42]).is_err());
        assert!(cutoff_search(&d, &spec(), &cut, "m", "z", &[MetricId::TPR], &[0.42]).is_err());
        assert!(cutoff_search(&d, &spec(), &cut, "q", "b", &[MetricId::TPR], &[0.42]).is_err());
    }
}
