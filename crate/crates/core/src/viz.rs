//! Structured data behind the audit plots, and emission of plot bundles as
//! JSON documents with optional SVG renderings.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::audit::{FairnessAudit, ModelAudit, CHECK_METRICS};
use crate::data::{partition_subgroups, AuditDataset, CutoffMap, ProtectedSpec};
use crate::error::{Error, Result};
use crate::metrics::{metric_from_counts, Confusion, GroupMetricTable, MetricId, ModelMetrics};
use crate::mitigate::post::{best_index, grid_loss, GridLoss};
use crate::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    FairnessCheckBars,
    MetricScores,
    Radar,
    Heatmap,
    Pca,
    ChooseMetric,
    StackMetrics,
    GroupMetric,
    Density,
    PerformanceAndFairness,
    AllCutoffs,
    CeterisParibusCutoff,
}

impl PlotKind {
    pub const ALL: [PlotKind; 12] = [
        PlotKind::FairnessCheckBars,
        PlotKind::MetricScores,
        PlotKind::Radar,
        PlotKind::Heatmap,
        PlotKind::Pca,
        PlotKind::ChooseMetric,
        PlotKind::StackMetrics,
        PlotKind::GroupMetric,
        PlotKind::Density,
        PlotKind::PerformanceAndFairness,
        PlotKind::AllCutoffs,
        PlotKind::CeterisParibusCutoff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::FairnessCheckBars => "fairness_check_bars",
            PlotKind::MetricScores => "metric_scores",
            PlotKind::Radar => "radar",
            PlotKind::Heatmap => "heatmap",
            PlotKind::Pca => "pca",
            PlotKind::ChooseMetric => "choose_metric",
            PlotKind::StackMetrics => "stack_metrics",
            PlotKind::GroupMetric => "group_metric",
            PlotKind::Density => "density",
            PlotKind::PerformanceAndFairness => "performance_and_fairness",
            PlotKind::AllCutoffs => "all_cutoffs",
            PlotKind::CeterisParibusCutoff => "ceteris_paribus_cutoff",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown plot kind `{s}` (valid: {})",
                    PlotKind::ALL.map(PlotKind::name).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotAxis {
    pub name: String,
    pub unit: String,
}

fn axis(name: &str, unit: &str) -> PlotAxis {
    PlotAxis {
        name: name.into(),
        unit: unit.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub labels: BTreeMap<String, String>,
    pub values: Vec<Option<f64>>,
    pub missing: bool,
}

impl PlotPoint {
    pub fn new<'a>(labels: impl IntoIterator<Item = (&'a str, String)>, values: Vec<Option<f64>>) -> Self {
        let missing = values.iter().any(Option::is_none);
        Self {
            labels: labels.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            values,
            missing,
        }
    }

    pub fn label(&self, key: &str) -> Option<&str> {
        self.labels.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub kind: PlotKind,
    pub axes: Vec<PlotAxis>,
    pub points: Vec<PlotPoint>,
    pub annotations: BTreeMap<String, Value>,
    pub params: BTreeMap<String, Value>,
}

impl PlotSeries {
    fn new(kind: PlotKind, axes: Vec<PlotAxis>) -> Self {
        Self {
            kind,
            axes,
            points: Vec::new(),
            annotations: BTreeMap::new(),
            params: BTreeMap::new(),
        }
    }

    fn param(mut self, key: &str, value: Value) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Concatenates series of one kind (e.g. one per model). Object-valued
    /// annotations are merged key by key; params come from the first series.
    pub fn merge(series: Vec<PlotSeries>) -> Result<PlotSeries> {
        let mut iter = series.into_iter();
        let mut out = iter
            .next()
            .ok_or_else(|| Error::InvalidParameter("nothing to merge".into()))?;
        for s in iter {
            if s.kind != out.kind {
                return Err(Error::InvalidParameter(format!(
                    "cannot merge {} into {}",
                    s.kind, out.kind
                )));
            }
            out.points.extend(s.points);
            for (k, v) in s.annotations {
                match (out.annotations.get_mut(&k), v) {
                    (Some(Value::Object(dst)), Value::Object(src)) => dst.extend(src),
                    (_, v) => {
                        out.annotations.insert(k, v);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn metric_names(metrics: &[MetricId]) -> Value {
    Value::from(metrics.iter().map(|m| m.name()).collect::<Vec<_>>())
}

/// Model × metric parity losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityLossMatrix {
    pub models: Vec<String>,
    pub metrics: Vec<MetricId>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl ParityLossMatrix {
    pub fn get(&self, model: usize, metric: usize) -> Option<f64> {
        self.values[model][metric]
    }
}

pub fn parity_loss_matrix(audit: &FairnessAudit, metrics: &[MetricId]) -> ParityLossMatrix {
    let metrics = if metrics.is_empty() {
        MetricId::ALL.to_vec()
    } else {
        metrics.to_vec()
    };
    ParityLossMatrix {
        models: audit.models.iter().map(|m| m.label.clone()).collect(),
        values: audit
            .models
            .iter()
            .map(|m| metrics.iter().map(|id| m.parity_loss.get(id).copied().flatten()).collect())
            .collect(),
        metrics,
    }
}

/// Ratio bars of the five checks: values `[ratio, |ratio − 1|, sign(ratio − 1)]`.
pub fn fairness_check_bars(audit: &FairnessAudit) -> PlotSeries {
    let mut s = PlotSeries::new(
        PlotKind::FairnessCheckBars,
        vec![axis("ratio", "unprivileged/privileged"), axis("height", "|ratio - 1|"), axis("orientation", "sign")],
    )
    .param("epsilon", json!(audit.epsilon))
    .param("band", json!([audit.epsilon, 1.0 / audit.epsilon]))
    .param("privileged", json!(audit.spec.privileged));
    for m in &audit.models {
        for id in CHECK_METRICS {
            let check = &m.checks[&id];
            for (level, ratio) in &check.ratios {
                let values = match ratio {
                    Some(r) => vec![Some(*r), Some((r - 1.0).abs()), Some(sign(r - 1.0))],
                    None => vec![None, None, None],
                };
                let verdict = serde_json::to_value(check.verdicts[level]).unwrap_or_default();
                s.points.push(PlotPoint::new(
                    [
                        ("model", m.label.clone()),
                        ("metric", id.name().to_string()),
                        ("criterion", check.criterion.clone()),
                        ("subgroup", level.clone()),
                        ("verdict", verdict.as_str().unwrap_or_default().to_string()),
                    ],
                    values,
                ));
            }
        }
    }
    s
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Subgroup metric values carried by an audit, in table form.
pub fn audit_metric_table(audit: &FairnessAudit) -> GroupMetricTable {
    GroupMetricTable {
        models: audit
            .models
            .iter()
            .map(|m| ModelMetrics {
                label: m.label.clone(),
                confusion: m.confusion.clone(),
                values: m.metrics.clone(),
            })
            .collect(),
    }
}

/// Raw metric value per (model, metric, subgroup); the privileged subgroup is
/// flagged so a renderer can draw it as the reference line.
pub fn metric_scores_view(table: &GroupMetricTable, spec: &ProtectedSpec, metrics: &[MetricId]) -> PlotSeries {
    let metrics = if metrics.is_empty() { &CHECK_METRICS[..] } else { metrics };
    let mut s = PlotSeries::new(PlotKind::MetricScores, vec![axis("score", "metric value")])
        .param("metrics", metric_names(metrics))
        .param("privileged", json!(spec.privileged));
    for m in &table.models {
        for &id in metrics {
            for level in spec.levels() {
                s.points.push(PlotPoint::new(
                    [
                        ("model", m.label.clone()),
                        ("metric", id.name().to_string()),
                        ("subgroup", level.clone()),
                        ("privileged", (*level == spec.privileged).to_string()),
                    ],
                    vec![m.get(level, id)],
                ));
            }
        }
    }
    s
}

fn matrix_points(s: &mut PlotSeries, matrix: &ParityLossMatrix, values: &[Vec<Option<f64>>]) {
    for (i, model) in matrix.models.iter().enumerate() {
        for (j, id) in matrix.metrics.iter().enumerate() {
            s.points.push(PlotPoint::new(
                [("model", model.clone()), ("metric", id.name().to_string())],
                vec![values[i][j]],
            ));
        }
    }
}

pub fn radar(matrix: &ParityLossMatrix) -> PlotSeries {
    let mut s = PlotSeries::new(PlotKind::Radar, vec![axis("parity_loss", "sum |ln ratio|")])
        .param("metrics", metric_names(&matrix.metrics));
    matrix_points(&mut s, matrix, &matrix.values);
    s
}

/// Parity-loss heatmap; `normalize` z-scores each metric column over the
/// defined entries (sample sd, zero when the column is constant).
pub fn heatmap(matrix: &ParityLossMatrix, normalize: bool) -> PlotSeries {
    let mut values = matrix.values.clone();
    if normalize {
        for j in 0..matrix.metrics.len() {
            let col: Vec<f64> = values.iter().filter_map(|row| row[j]).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = if col.len() > 1 {
                (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            for row in values.iter_mut() {
                row[j] = row[j].map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
            }
        }
    }
    let mut s = PlotSeries::new(PlotKind::Heatmap, vec![axis("parity_loss", if normalize { "z-score" } else { "sum |ln ratio|" })])
        .param("metrics", metric_names(&matrix.metrics))
        .param("normalize", json!(normalize));
    matrix_points(&mut s, matrix, &values);
    s
}

pub fn choose_metric(matrix: &ParityLossMatrix, metric: MetricId) -> Result<PlotSeries> {
    let j = matrix
        .metrics
        .iter()
        .position(|m| *m == metric)
        .ok_or_else(|| Error::InvalidParameter(format!("metric {metric} not in parity-loss matrix")))?;
    let mut s = PlotSeries::new(PlotKind::ChooseMetric, vec![axis("parity_loss", "sum |ln ratio|")])
        .param("metric", json!(metric.name()));
    for (i, model) in matrix.models.iter().enumerate() {
        s.points.push(PlotPoint::new([("model", model.clone())], vec![matrix.values[i][j]]));
    }
    Ok(s)
}

/// Stacked parity losses per model: values `[loss, start, end]`. Undefined
/// entries are missing and add nothing to the stack.
pub fn stack_metrics(matrix: &ParityLossMatrix) -> PlotSeries {
    let mut s = PlotSeries::new(
        PlotKind::StackMetrics,
        vec![axis("parity_loss", "sum |ln ratio|"), axis("stack_start", ""), axis("stack_end", "")],
    )
    .param("metrics", metric_names(&matrix.metrics));
    let mut totals = serde_json::Map::new();
    for (i, model) in matrix.models.iter().enumerate() {
        let mut acc = 0.0;
        for (j, id) in matrix.metrics.iter().enumerate() {
            let labels = [("model", model.clone()), ("metric", id.name().to_string())];
            match matrix.values[i][j] {
                Some(v) => {
                    s.points.push(PlotPoint::new(labels, vec![Some(v), Some(acc), Some(acc + v)]));
                    acc += v;
                }
                None => s.points.push(PlotPoint::new(labels, vec![None, Some(acc), Some(acc)])),
            }
        }
        totals.insert(model.clone(), json!(acc));
    }
    s.annotations.insert("totals".into(), Value::Object(totals));
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Performance {
    Accuracy,
    Auc,
    F1,
}

impl FromStr for Performance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accuracy" | "acc" => Ok(Performance::Accuracy),
            "auc" => Ok(Performance::Auc),
            "f1" => Ok(Performance::F1),
            other => Err(Error::InvalidParameter(format!(
                "unknown performance metric `{other}` (valid: accuracy, auc, f1)"
            ))),
        }
    }
}

impl Performance {
    pub fn name(self) -> &'static str {
        match self {
            Performance::Accuracy => "accuracy",
            Performance::Auc => "auc",
            Performance::F1 => "f1",
        }
    }
}

/// Pooled performance over all subgroups at the model's cutoffs. AUC needs
/// the model's scores in `dataset`.
pub fn model_performance(model: &ModelAudit, dataset: Option<&AuditDataset>, perf: Performance) -> Result<Option<f64>> {
    let pooled = model
        .confusion
        .values()
        .fold(Confusion::default(), |acc, c| acc.merged(c));
    Ok(match perf {
        Performance::Accuracy => metric_from_counts(&pooled, MetricId::ACC),
        Performance::F1 => metric_from_counts(&pooled, MetricId::F1),
        Performance::Auc => {
            let Some(d) = dataset else { return Ok(None) };
            match d.model(&model.label) {
                Ok(m) => Some(crate::trainer::auc(&m.scores, d.y_true())?),
                Err(_) => None,
            }
        }
    })
}

/// One point per model at `(−Σ parity loss, performance)`, so better models
/// sit up and to the right. Undefined parity losses are skipped and listed
/// in the point's `skipped_metrics` label.
pub fn performance_vs_fairness(
    audit: &FairnessAudit,
    dataset: Option<&AuditDataset>,
    perf: Performance,
    metrics: &[MetricId],
) -> Result<PlotSeries> {
    let metrics = if metrics.is_empty() { &CHECK_METRICS[..] } else { metrics };
    let mut s = PlotSeries::new(
        PlotKind::PerformanceAndFairness,
        vec![axis("inverted_parity_loss", "-sum |ln ratio|"), axis(perf.name(), "")],
    )
    .param("x_transform", json!("negated_sum"))
    .param("performance", json!(perf.name()))
    .param("metrics", metric_names(metrics));
    for m in &audit.models {
        let mut sum = 0.0;
        let mut skipped = Vec::new();
        for id in metrics {
            match m.parity_loss.get(id).copied().flatten() {
                Some(v) => sum += v,
                None => skipped.push(id.name()),
            }
        }
        let p = model_performance(m, dataset, perf)?;
        s.points.push(PlotPoint::new(
            [("model", m.label.clone()), ("skipped_metrics", skipped.join(","))],
            vec![Some(-sum), p],
        ));
    }
    Ok(s)
}

/// Raw values of one metric per (model, subgroup) next to each model's pooled
/// performance.
pub fn group_metric(
    audit: &FairnessAudit,
    dataset: Option<&AuditDataset>,
    metric: MetricId,
    perf: Performance,
) -> Result<PlotSeries> {
    let mut s = PlotSeries::new(PlotKind::GroupMetric, vec![axis("value", "")])
        .param("metric", json!(metric.name()))
        .param("performance", json!(perf.name()))
        .param("privileged", json!(audit.spec.privileged));
    for m in &audit.models {
        for level in audit.spec.levels() {
            let v = m.metrics.get(level).and_then(|row| row.get(&metric).copied().flatten());
            s.points.push(PlotPoint::new(
                [
                    ("model", m.label.clone()),
                    ("panel", "metric".to_string()),
                    ("subgroup", level.clone()),
                    ("privileged", (*level == audit.spec.privileged).to_string()),
                ],
                vec![v],
            ));
        }
        let p = model_performance(m, dataset, perf)?;
        s.points.push(PlotPoint::new(
            [("model", m.label.clone()), ("panel", "performance".to_string())],
            vec![p],
        ));
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepTarget {
    /// Every subgroup shares the swept cutoff.
    AllSubgroups,
    /// Only this subgroup's cutoff moves.
    Subgroup(String),
}

/// Parity loss over a cutoff grid.
///
/// With `cumulated = false` there is one point per (cutoff, metric) with
/// values `[cutoff, loss]`; otherwise one point per cutoff with the summed
/// defined losses. In subgroup mode the grid argmin (smallest cutoff on
/// ties, fewest undefined metrics first) is annotated under `minimum`.
#[allow(clippy::too_many_arguments)]
pub fn cutoff_sweep(
    dataset: &AuditDataset,
    spec: &ProtectedSpec,
    cutoffs: &CutoffMap,
    model: &str,
    metrics: &[MetricId],
    target: &SweepTarget,
    grid: &[f64],
    cumulated: bool,
) -> Result<PlotSeries> {
    if metrics.is_empty() {
        return Err(Error::InvalidParameter("cutoff sweep needs at least one metric".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("cutoff grid is empty".into()));
    }
    let levels = dataset.levels();
    cutoffs.covers(&levels)?;
    let scores = &dataset.model(model)?.scores;
    if let SweepTarget::Subgroup(level) = target {
        if !levels.contains(level) {
            return Err(Error::UnknownLevel {
                level: level.clone(),
                available: levels,
            });
        }
    }
    let partition = partition_subgroups(dataset);
    let losses: Vec<GridLoss> = grid
        .iter()
        .map(|&c| {
            let map = match target {
                SweepTarget::AllSubgroups => CutoffMap::uniform(&levels, c)?,
                SweepTarget::Subgroup(level) => cutoffs.clone().with(level, c)?,
            };
            grid_loss(dataset, &partition, spec, scores, &map, metrics, c)
        })
        .collect::<Result<_>>()?;

    let kind = match target {
        SweepTarget::AllSubgroups => PlotKind::AllCutoffs,
        SweepTarget::Subgroup(_) => PlotKind::CeterisParibusCutoff,
    };
    let y_axis = if cumulated { "cumulated_parity_loss" } else { "parity_loss" };
    let mut s = PlotSeries::new(kind, vec![axis("cutoff", "probability"), axis(y_axis, "sum |ln ratio|")])
        .param("metrics", metric_names(metrics))
        .param("cumulated", json!(cumulated))
        .param("grid_size", json!(grid.len()));
    if let SweepTarget::Subgroup(level) = target {
        s = s.param("subgroup", json!(level));
    }

    for l in &losses {
        if cumulated {
            let value = (l.skipped < metrics.len()).then_some(l.cumulated);
            s.points.push(PlotPoint::new(
                [("model", model.to_string()), ("skipped", l.skipped.to_string())],
                vec![Some(l.cutoff), value],
            ));
        } else {
            for (id, loss) in &l.per_metric {
                s.points.push(PlotPoint::new(
                    [("model", model.to_string()), ("metric", id.name().to_string())],
                    vec![Some(l.cutoff), *loss],
                ));
            }
        }
    }

    if matches!(target, SweepTarget::Subgroup(_)) {
        if let Some(best) = best_index(&losses) {
            let mut by_model = serde_json::Map::new();
            by_model.insert(
                model.to_string(),
                json!({
                    "cutoff": losses[best].cutoff,
                    "loss": losses[best].cumulated,
                    "skipped": losses[best].skipped,
                }),
            );
            s.annotations.insert("minimum".into(), Value::Object(by_model));
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub models: Vec<String>,
    pub metrics: Vec<MetricId>,
    /// Per model, coordinates on the first two principal axes.
    pub coordinates: Vec<[f64; 2]>,
    /// Per metric, loadings on the first two principal axes.
    pub loadings: Vec<[f64; 2]>,
    pub explained: [f64; 2],
}

/// Principal components of the parity-loss matrix after dropping metric
/// columns with undefined entries and centering the rest.
pub fn pca(matrix: &ParityLossMatrix) -> Result<PcaResult> {
    let n = matrix.models.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("PCA needs >=2 models, got {n}")));
    }
    let keep: Vec<usize> = (0..matrix.metrics.len())
        .filter(|&j| matrix.values.iter().all(|row| row[j].is_some()))
        .collect();
    if keep.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "PCA needs >=2 fully defined metric columns, got {}",
            keep.len()
        )));
    }
    let k = keep.len();
    let mut x = DMatrix::from_fn(n, k, |i, j| matrix.values[i][keep[j]].unwrap_or_default());
    for j in 0..k {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = x.tr_mul(&x) / (n as f64 - 1.0);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut explained = [0.0; 2];
    let mut directions = Vec::with_capacity(2);
    for (slot, &idx) in order.iter().take(2).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        // Sign convention: largest-magnitude component positive.
        let pivot = v.iter().enumerate().fold(0, |best, (i, c)| if c.abs() > v[best].abs() + 1e-12 { i } else { best });
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        explained[slot] = if total > 0.0 {
            (eig.eigenvalues[idx].max(0.0) / total).clamp(0.0, 1.0)
        } else {
            0.0
        };
        directions.push(v);
    }
    let coordinates = (0..n)
        .map(|i| {
            let row = x.row(i);
            [row.dot(&directions[0].transpose()), row.dot(&directions[1].transpose())]
        })
        .collect();
    let loadings = (0..k).map(|j| [directions[0][j], directions[1][j]]).collect();
    Ok(PcaResult {
        models: matrix.models.clone(),
        metrics: keep.iter().map(|&j| matrix.metrics[j]).collect(),
        coordinates,
        loadings,
        explained,
    })
}

pub fn pca_projection(matrix: &ParityLossMatrix) -> Result<PlotSeries> {
    let r = pca(matrix)?;
    let mut s = PlotSeries::new(PlotKind::Pca, vec![axis("PC1", "coordinate"), axis("PC2", "coordinate")])
        .param("explained_variance", json!(r.explained))
        .param("metrics", metric_names(&r.metrics));
    for (model, c) in r.models.iter().zip(&r.coordinates) {
        s.points.push(PlotPoint::new(
            [("type", "model".to_string()), ("model", model.clone())],
            vec![Some(c[0]), Some(c[1])],
        ));
    }
    for (id, l) in r.metrics.iter().zip(&r.loadings) {
        s.points.push(PlotPoint::new(
            [("type", "loading".to_string()), ("metric", id.name().to_string())],
            vec![Some(l[0]), Some(l[1])],
        ));
    }
    Ok(s)
}

/// Bin of `score` among `bins` equal-width bins over `[0, 1]`. Bins are
/// closed on the left; the last bin also takes 1.
pub fn density_bin(score: f64, bins: usize) -> usize {
    let edge = |k: usize| k as f64 / bins as f64;
    let mut idx = ((score * bins as f64).floor().max(0.0) as usize).min(bins - 1);
    while idx + 1 < bins && score >= edge(idx + 1) {
        idx += 1;
    }
    while idx > 0 && score < edge(idx) {
        idx -= 1;
    }
    idx
}

/// Score histogram per subgroup, normalized to fractions: values
/// `[bin_start, bin_end, fraction]`.
pub fn score_density(dataset: &AuditDataset, spec: &ProtectedSpec, model: &str, bins: usize) -> Result<PlotSeries> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("density needs >=2 bins, got {bins}")));
    }
    let scores = &dataset.model(model)?.scores;
    let partition = partition_subgroups(dataset);
    let mut s = PlotSeries::new(
        PlotKind::Density,
        vec![axis("bin_start", "score"), axis("bin_end", "score"), axis("fraction", "share of subgroup")],
    )
    .param("bins", json!(bins))
    .param("privileged", json!(spec.privileged));
    for (level, rows) in &partition {
        let mut counts = vec![0usize; bins];
        for &i in rows {
            counts[density_bin(scores[i], bins)] += 1;
        }
        for (b, count) in counts.iter().enumerate() {
            s.points.push(PlotPoint::new(
                [
                    ("model", model.to_string()),
                    ("subgroup", level.clone()),
                    ("privileged", (*level == spec.privileged).to_string()),
                ],
                vec![
                    Some(b as f64 / bins as f64),
                    Some((b + 1) as f64 / bins as f64),
                    Some(*count as f64 / rows.len() as f64),
                ],
            ));
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: PlotKind,
    pub json: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub series: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one `<kind>.json` per series (plus `<kind>.svg` when `render`) and
/// a `manifest.json` listing them. An empty list writes nothing.
pub fn emit_plot_bundle(series: &[PlotSeries], dir: &Path, render: bool) -> Result<Manifest> {
    let mut manifest = Manifest::default();
    if series.is_empty() {
        return Ok(manifest);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut seen: BTreeMap<PlotKind, usize> = BTreeMap::new();
    for s in series {
        let count = seen.entry(s.kind).or_insert(0);
        let stem = if *count == 0 {
            s.kind.name().to_string()
        } else {
            format!("{}_{}", s.kind.name(), count)
        };
        *count += 1;
        let json_name = format!("{stem}.json");
        write_json(&dir.join(&json_name), s)?;
        let svg_name = if render {
            let name = format!("{stem}.svg");
            let path = dir.join(&name);
            fs::write(&path, svg::render(s)).map_err(|e| Error::io(&path, e))?;
            Some(name)
        } else {
            None
        };
        manifest.series.push(ManifestEntry {
            kind: s.kind,
            json: json_name,
            svg: svg_name,
        });
    }
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
