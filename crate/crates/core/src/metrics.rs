//! Confusion matrices per subgroup, the twelve confusion-matrix metrics,
//! subgroup ratios and parity loss.
//!
//! A metric whose denominator is zero is `None` (undefined). It is never
//! replaced by zero; each consumer decides how to treat it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{partition_subgroups, AuditDataset, CutoffMap, Partition, ProtectedSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricId {
    TPR,
    TNR,
    PPV,
    NPV,
    FNR,
    FPR,
    FDR,
    FOR,
    TS,
    STP,
    ACC,
    F1,
}

impl MetricId {
    pub const ALL: [MetricId; 12] = [
        MetricId::TPR,
        MetricId::TNR,
        MetricId::PPV,
        MetricId::NPV,
        MetricId::FNR,
        MetricId::FPR,
        MetricId::FDR,
        MetricId::FOR,
        MetricId::TS,
        MetricId::STP,
        MetricId::ACC,
        MetricId::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricId::TPR => "TPR",
            MetricId::TNR => "TNR",
            MetricId::PPV => "PPV",
            MetricId::NPV => "NPV",
            MetricId::FNR => "FNR",
            MetricId::FPR => "FPR",
            MetricId::FDR => "FDR",
            MetricId::FOR => "FOR",
            MetricId::TS => "TS",
            MetricId::STP => "STP",
            MetricId::ACC => "ACC",
            MetricId::F1 => "F1",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            MetricId::TPR => "True positive rate",
            MetricId::TNR => "True negative rate",
            MetricId::PPV => "Positive predictive value",
            MetricId::NPV => "Negative predictive value",
            MetricId::FNR => "False negative rate",
            MetricId::FPR => "False positive rate",
            MetricId::FDR => "False discovery rate",
            MetricId::FOR => "False omission rate",
            MetricId::TS => "Threat score",
            MetricId::STP => "Positive rate",
            MetricId::ACC => "Accuracy",
            MetricId::F1 => "F1 score",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown metric `{s}` (valid: {})",
                    MetricId::ALL.map(MetricId::name).join(", ")
                ))
            })
    }
}

/// Confusion counts of one subgroup.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, truth: u8, predicted: u8) {
        match (truth, predicted) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (0, 0) => self.tn += 1,
            _ => self.fn_ += 1,
        }
    }

    pub fn merged(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

pub type SubgroupConfusion = BTreeMap<String, Confusion>;
pub type MetricRow = BTreeMap<MetricId, Option<f64>>;
pub type SubgroupMetrics = BTreeMap<String, MetricRow>;

/// Prediction is 1 iff the score reaches the cutoff of the row's subgroup.
pub fn classify(scores: &[f64], protected: &[String], cutoffs: &CutoffMap) -> Result<Vec<u8>> {
    if scores.len() != protected.len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores for {} protected values",
            scores.len(),
            protected.len()
        )));
    }
    scores
        .iter()
        .zip(protected)
        .map(|(&s, level)| {
            let cutoff = cutoffs
                .get(level)
                .ok_or_else(|| Error::InvalidParameter(format!("no cutoff for level `{level}`")))?;
            Ok(u8::from(s >= cutoff))
        })
        .collect()
}

pub fn confusion_by_subgroup(y_true: &[u8], y_pred: &[u8], partition: &Partition) -> SubgroupConfusion {
    partition
        .iter()
        .map(|(level, rows)| {
            let mut c = Confusion::default();
            for &i in rows {
                c.add(y_true[i], y_pred[i]);
            }
            (level.clone(), c)
        })
        .collect()
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

pub fn metric_from_counts(c: &Confusion, id: MetricId) -> Option<f64> {
    let Confusion { tp, fp, tn, fn_ } = *c;
    match id {
        MetricId::TPR => ratio(tp, tp + fn_),
        MetricId::TNR => ratio(tn, tn + fp),
        MetricId::PPV => ratio(tp, tp + fp),
        MetricId::NPV => ratio(tn, tn + fn_),
        MetricId::FNR => ratio(fn_, fn_ + tp),
        MetricId::FPR => ratio(fp, fp + tn),
        MetricId::FDR => ratio(fp, fp + tp),
        MetricId::FOR => ratio(fn_, fn_ + tn),
        MetricId::TS => ratio(tp, tp + fn_ + fp),
        MetricId::STP => ratio(tp + fp, tp + fp + tn + fn_),
        MetricId::ACC => ratio(tp + tn, tp + tn + fp + fn_),
        MetricId::F1 => {
            let ppv = metric_from_counts(c, MetricId::PPV)?;
            let tpr = metric_from_counts(c, MetricId::TPR)?;
            let sum = ppv + tpr;
            (sum != 0.0).then(|| 2.0 * ppv * tpr / sum)
        }
    }
}

pub fn metric_row(c: &Confusion) -> MetricRow {
    MetricId::ALL
        .into_iter()
        .map(|id| (id, metric_from_counts(c, id)))
        .collect()
}

pub fn subgroup_metrics(confusion: &SubgroupConfusion) -> SubgroupMetrics {
    confusion
        .iter()
        .map(|(level, c)| (level.clone(), metric_row(c)))
        .collect()
}

/// Confusion matrices and metric values of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub label: String,
    pub confusion: SubgroupConfusion,
    pub values: SubgroupMetrics,
}

impl ModelMetrics {
    pub fn from_confusion(label: impl Into<String>, confusion: SubgroupConfusion) -> Self {
        let values = subgroup_metrics(&confusion);
        Self {
            label: label.into(),
            confusion,
            values,
        }
    }

    pub fn get(&self, level: &str, id: MetricId) -> Option<f64> {
        self.values.get(level).and_then(|row| row.get(&id).copied().flatten())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetricTable {
    pub models: Vec<ModelMetrics>,
}

impl GroupMetricTable {
    pub fn model(&self, label: &str) -> Result<&ModelMetrics> {
        self.models
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::UnknownModel(label.to_string()))
    }
}

/// Confusion matrices and metrics of one model's scores.
pub fn model_metrics(
    dataset: &AuditDataset,
    partition: &Partition,
    label: &str,
    scores: &[f64],
    cutoffs: &CutoffMap,
) -> Result<ModelMetrics> {
    let predicted = classify(scores, dataset.protected(), cutoffs)?;
    let confusion = confusion_by_subgroup(dataset.y_true(), &predicted, partition);
    Ok(ModelMetrics::from_confusion(label, confusion))
}

pub fn group_metric_table(dataset: &AuditDataset, cutoffs: &CutoffMap) -> Result<GroupMetricTable> {
    cutoffs.covers(&dataset.levels())?;
    let partition = partition_subgroups(dataset);
    let models = dataset
        .models()
        .iter()
        .map(|m| model_metrics(dataset, &partition, &m.label, &m.scores, cutoffs))
        .collect::<Result<_>>()?;
    Ok(GroupMetricTable { models })
}

/// `metric(unprivileged) / metric(privileged)` for each unprivileged level, in
/// the spec's order. Undefined when either side is undefined or the
/// privileged value is zero.
pub fn metric_ratios(metrics: &SubgroupMetrics, spec: &ProtectedSpec, id: MetricId) -> Vec<(String, Option<f64>)> {
    let lookup = |level: &str| metrics.get(level).and_then(|row| row.get(&id).copied().flatten());
    let privileged = lookup(&spec.privileged);
    spec.unprivileged
        .iter()
        .map(|level| {
            let r = match (lookup(level), privileged) {
                (Some(u), Some(p)) if p != 0.0 => Some(u / p),
                _ => None,
            };
            (level.clone(), r)
        })
        .collect()
}

/// Sum of `|ln ratio|` over unprivileged levels; undefined when any ratio is
/// undefined or zero.
pub fn parity_loss(metrics: &SubgroupMetrics, spec: &ProtectedSpec, id: MetricId) -> Option<f64> {
    parity_loss_from_ratios(metric_ratios(metrics, spec, id).iter().map(|(_, r)| *r))
}

pub fn parity_loss_from_ratios(ratios: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut total = 0.0;
    for r in ratios {
        let r = r?;
        if r == 0.0 {
            return None;
        }
        total += r.ln().abs();
    }
    Some(total)
}
