//! The fairness check: five ratio criteria judged against the `(ε, 1/ε)`
//! window, parity-loss totals, and aggregation of several models into one
//! audit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{partition_subgroups, AuditDataset, CutoffMap, ProtectedSpec};
use crate::error::{Error, Result};
use crate::metrics::{metric_ratios, model_metrics, parity_loss, MetricId, ModelMetrics, SubgroupConfusion};

pub const DEFAULT_EPSILON: f64 = 0.8;

/// The metrics behind the five checks, in report order.
pub const CHECK_METRICS: [MetricId; 5] = [
    MetricId::ACC,
    MetricId::FPR,
    MetricId::PPV,
    MetricId::STP,
    MetricId::TPR,
];

pub fn criterion_name(id: MetricId) -> Option<&'static str> {
    match id {
        MetricId::ACC => Some("Accuracy equality"),
        MetricId::FPR => Some("Predictive equality"),
        MetricId::PPV => Some("Predictive parity"),
        MetricId::STP => Some("Statistical parity"),
        MetricId::TPR => Some("Equal opportunity"),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// `ε < ratio < 1/ε`, strict on both ends, no tolerance band.
pub fn judge(ratio: Option<f64>, epsilon: f64) -> Verdict {
    match ratio {
        None => Verdict::Inconclusive,
        Some(r) if epsilon < r && r < 1.0 / epsilon => Verdict::Pass,
        Some(_) => Verdict::Fail,
    }
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon {epsilon} must lie in (0, 1]")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub criterion: String,
    pub ratios: BTreeMap<String, Option<f64>>,
    pub verdicts: BTreeMap<String, Verdict>,
    /// Fail if any level fails, else inconclusive if any level is, else pass.
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAudit {
    pub label: String,
    pub cutoffs: CutoffMap,
    pub confusion: SubgroupConfusion,
    pub metrics: BTreeMap<String, BTreeMap<MetricId, Option<f64>>>,
    pub checks: BTreeMap<MetricId, CheckResult>,
    pub parity_loss: BTreeMap<MetricId, Option<f64>>,
    pub total_loss: f64,
    /// Check metrics whose parity loss is undefined and so left out of
    /// `total_loss`.
    pub skipped: usize,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
}

impl ModelAudit {
    /// Derives every verdict and loss from the confusion matrices.
    pub fn evaluate(
        label: impl Into<String>,
        cutoffs: CutoffMap,
        confusion: SubgroupConfusion,
        spec: &ProtectedSpec,
        epsilon: f64,
    ) -> Self {
        let ModelMetrics {
            label,
            confusion,
            values,
        } = ModelMetrics::from_confusion(label, confusion);

        let parity: BTreeMap<MetricId, Option<f64>> = MetricId::ALL
            .into_iter()
            .map(|id| (id, parity_loss(&values, spec, id)))
            .collect();

        let mut checks = BTreeMap::new();
        let (mut passed, mut failed, mut inconclusive) = (0, 0, 0);
        for id in CHECK_METRICS {
            let ratios: BTreeMap<String, Option<f64>> = metric_ratios(&values, spec, id).into_iter().collect();
            let verdicts: BTreeMap<String, Verdict> =
                ratios.iter().map(|(l, r)| (l.clone(), judge(*r, epsilon))).collect();
            let verdict = if verdicts.values().any(|v| *v == Verdict::Fail) {
                failed += 1;
                Verdict::Fail
            } else if verdicts.values().any(|v| *v == Verdict::Inconclusive) {
                inconclusive += 1;
                Verdict::Inconclusive
            } else {
                passed += 1;
                Verdict::Pass
            };
            checks.insert(
                id,
                CheckResult {
                    criterion: criterion_name(id).unwrap_or_default().to_string(),
                    ratios,
                    verdicts,
                    verdict,
                },
            );
        }

        let mut total_loss = 0.0;
        let mut skipped = 0;
        for id in CHECK_METRICS {
            match parity[&id] {
                Some(v) => total_loss += v,
                None => skipped += 1,
            }
        }

        Self {
            label,
            cutoffs,
            confusion,
            metrics: values,
            checks,
            parity_loss: parity,
            total_loss,
            skipped,
            passed,
            failed,
            inconclusive,
        }
    }

    pub fn passes(&self) -> bool {
        self.failed == 0 && self.inconclusive == 0
    }

    pub fn failing(&self) -> impl Iterator<Item = (MetricId, &CheckResult)> {
        self.checks
            .iter()
            .filter(|(_, c)| c.verdict == Verdict::Fail)
            .map(|(id, c)| (*id, c))
    }
}

/// Audit of one or more models sharing the protected vector and privileged
/// level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessAudit {
    pub epsilon: f64,
    pub spec: ProtectedSpec,
    pub group_sizes: BTreeMap<String, usize>,
    pub row_count: usize,
    pub models: Vec<ModelAudit>,
}

impl FairnessAudit {
    pub fn model(&self, label: &str) -> Result<&ModelAudit> {
        self.models
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::UnknownModel(label.to_string()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.models.iter().map(|m| m.label.as_str())
    }

    /// True when any model uses different cutoffs across subgroups.
    pub fn has_split_cutoffs(&self) -> bool {
        self.models.iter().any(|m| m.cutoffs.is_split())
    }
}

/// Audits every model in `dataset` and appends the models of `prior`,
/// re-judged at `epsilon`.
pub fn fairness_check(
    dataset: &AuditDataset,
    spec: &ProtectedSpec,
    epsilon: f64,
    cutoffs: &CutoffMap,
    prior: Option<&FairnessAudit>,
) -> Result<FairnessAudit> {
    check_epsilon(epsilon)?;
    let levels = dataset.levels();
    cutoffs.covers(&levels)?;
    let mut spec_levels: Vec<String> = spec.levels().cloned().collect();
    spec_levels.sort();
    if spec_levels != levels {
        return Err(Error::InvalidParameter(format!(
            "protected spec levels {spec_levels:?} do not match dataset levels {levels:?}"
        )));
    }
    if dataset.models().is_empty() && prior.is_none() {
        return Err(Error::InvalidData("audit needs at least one model score column".into()));
    }

    let partition = partition_subgroups(dataset);
    let group_sizes: BTreeMap<String, usize> = partition.iter().map(|(l, rows)| (l.clone(), rows.len())).collect();

    let mut models = Vec::new();
    for m in dataset.models() {
        let metrics = model_metrics(dataset, &partition, &m.label, &m.scores, cutoffs)?;
        models.push(ModelAudit::evaluate(
            m.label.clone(),
            cutoffs.clone(),
            metrics.confusion,
            spec,
            epsilon,
        ));
    }

    if let Some(prior) = prior {
        if prior.spec != *spec {
            return Err(Error::Merge(format!(
                "privileged/protected levels differ: prior {:?} vs {:?}",
                prior.spec, spec
            )));
        }
        if prior.row_count != dataset.row_count() || prior.group_sizes != group_sizes {
            return Err(Error::Merge(
                "prior audit was computed on a different protected vector".into(),
            ));
        }
        for pm in &prior.models {
            if models.iter().any(|m| m.label == pm.label) {
                return Err(Error::Merge(format!(
                    "models must have different labels; `{}` appears twice",
                    pm.label
                )));
            }
            models.push(ModelAudit::evaluate(
                pm.label.clone(),
                pm.cutoffs.clone(),
                pm.confusion.clone(),
                spec,
                epsilon,
            ));
        }
    }

    Ok(FairnessAudit {
        epsilon,
        spec: spec.clone(),
        group_sizes,
        row_count: dataset.row_count(),
        models,
    })
}

/// Summed defined parity loss over the five check metrics, with the number
/// of undefined metrics that were skipped.
pub fn total_loss(audit: &FairnessAudit, model: &str) -> Result<(f64, usize)> {
    let m = audit.model(model)?;
    Ok((m.total_loss, m.skipped))
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "undefined".to_string(), |v| format!("{v:.3}"))
}

/// Plain-text summary, one block per model.
pub fn summarize_text(audit: &FairnessAudit) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Fairness check (epsilon = {}, privileged = {}, unprivileged = {})",
        audit.epsilon,
        audit.spec.privileged,
        audit.spec.unprivileged.join(", ")
    );
    let _ = writeln!(
        out,
        "Acceptable ratio window: ({}, {:.4})",
        audit.epsilon,
        1.0 / audit.epsilon
    );
    for m in &audit.models {
        let _ = writeln!(out);
        let _ = writeln!(out, "Model: {}", m.label);
        let _ = writeln!(
            out,
            "  passed {}/{} checks, failed {}, inconclusive {}",
            m.passed,
            CHECK_METRICS.len(),
            m.failed,
            m.inconclusive
        );
        for (id, check) in &m.checks {
            if check.verdict == Verdict::Pass {
                continue;
            }
            let detail: Vec<String> = check
                .ratios
                .iter()
                .map(|(level, r)| format!("{level}: {}", fmt_ratio(*r)))
                .collect();
            let tag = match check.verdict {
                Verdict::Fail => "failing",
                _ => "inconclusive",
            };
            let _ = writeln!(out, "  {tag}: {} ({id}) [{}]", check.criterion, detail.join(", "));
        }
        let _ = writeln!(out, "  total loss: {:.6} (skipped metrics: {})", m.total_loss, m.skipped);
        let verdict = if m.passes() {
            "passes fairness check"
        } else {
            "does not pass fairness check"
        };
        let _ = writeln!(out, "  {} {verdict}", m.label);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::protected_spec_from_levels;
    use crate::metrics::Confusion;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn judge_window() {
        assert_eq!(judge(Some(0.85), 0.8), Verdict::Pass);
        assert_eq!(judge(Some(0.80), 0.8), Verdict::Fail);
        assert_eq!(judge(Some(1.25), 0.8), Verdict::Fail);
        assert_eq!(judge(Some(1.30), 0.8), Verdict::Fail);
        assert_eq!(judge(None, 0.8), Verdict::Inconclusive);
        // epsilon = 1 leaves an empty window
        assert_eq!(judge(Some(1.0), 1.0), Verdict::Fail);
    }

    #[test]
    fn epsilon_range() {
        assert!(check_epsilon(0.0).is_err());
        assert!(check_epsilon(1.2).is_err());
        assert!(check_epsilon(1.0).is_ok());
    }

    fn fixture() -> AuditDataset {
        // a: 4 rows, b: 4 rows; "fair" predicts identically in both groups.
        AuditDataset::new(vec![1, 1, 0, 0, 1, 1, 0, 0], s(&["a", "a", "a", "a", "b", "b", "b", "b"]))
            .unwrap()
            .with_model("fair", vec![0.9, 0.2, 0.8, 0.1, 0.9, 0.2, 0.8, 0.1])
            .unwrap()
            .with_model("skewed", vec![0.9, 0.8, 0.8, 0.1, 0.9, 0.2, 0.3, 0.1])
            .unwrap()
    }

    #[test]
    fn fair_model_passes_all_five() {
        let d = fixture();
        let spec = protected_spec_from_levels(&d.levels(), "a").unwrap();
        let audit = fairness_check(&d, &spec, 0.8, &CutoffMap::for_dataset(&d), None).unwrap();
        let fair = audit.model("fair").unwrap();
        assert_eq!(fair.passed, 5);
        assert_eq!(fair.total_loss, 0.0);
        let text = summarize_text(&audit);
        assert!(text.contains("passed 5/5"));
        assert!(text.contains("fair passes fairness check"));
        assert!(text.contains("skewed does not pass fairness check"));
    }

    #[test]
    fn duplicate_label_on_merge_is_error() {
        let d = fixture();
        let spec = protected_spec_from_levels(&d.levels(), "a").unwrap();
        let cut = CutoffMap::for_dataset(&d);
        let first = fairness_check(&d, &spec, 0.8, &cut, None).unwrap();
        let err = fairness_check(&d, &spec, 0.8, &cut, Some(&first)).unwrap_err();
        assert!(err.to_string().contains("must have different labels"));
    }

    #[test]
    fn merge_with_other_privileged_is_error() {
        let d = fixture();
        let only_fair = AuditDataset::new(d.y_true().to_vec(), d.protected().to_vec())
            .unwrap()
            .with_model("other", vec![0.5; 8])
            .unwrap();
        let cut = CutoffMap::for_dataset(&d);
        let a = protected_spec_from_levels(&d.levels(), "a").unwrap();
        let b = protected_spec_from_levels(&d.levels(), "b").unwrap();
        let first = fairness_check(&d, &a, 0.8, &cut, None).unwrap();
        assert!(matches!(
            fairness_check(&only_fair, &b, 0.8, &cut, Some(&first)),
            Err(Error::Merge(_))
        ));
        let merged = fairness_check(&only_fair, &a, 0.8, &cut, Some(&first)).unwrap();
        assert_eq!(merged.models.len(), 3);
    }

    #[test]
    fn total_loss_examples() {
        let spec = protected_spec_from_levels(&s(&["a", "b"]), "a").unwrap();
        let cut = CutoffMap::uniform(&s(&["a", "b"]), 0.5).unwrap();
        let c = Confusion { tp: 2, fp: 1, tn: 3, fn_: 2 };
        let mut conf = SubgroupConfusion::new();
        conf.insert("a".into(), c);
        conf.insert("b".into(), c);
        let m = ModelAudit::evaluate("m", cut.clone(), conf, &spec, 0.8);
        assert_eq!((m.total_loss, m.skipped), (0.0, 0));

        // b: no predicted positives -> PPV undefined, STP ratio 0 (parity loss undefined)
        let mut conf = SubgroupConfusion::new();
        conf.insert("a".into(), c);
        conf.insert("b".into(), Confusion { tp: 0, fp: 0, tn: 4, fn_: 4 });
        let m = ModelAudit::evaluate("m", cut, conf, &spec, 0.8);
        assert!(m.skipped >= 1);
        assert!(!m.passes());
    }
}
