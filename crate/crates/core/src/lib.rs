//! Group-fairness auditing for binary classifiers.
//!
//! A [`AuditDataset`] holds true labels, a protected attribute and the scores
//! of one or more models. [`fairness_check`] compares five subgroup metrics
//! against a privileged subgroup and reports which models stay inside the
//! `(ε, 1/ε)` ratio window. The [`mitigate`] module reduces bias either in
//! the data (reweighting, resampling, feature repair) or in the scores
//! (reject-option pivot, per-subgroup cutoffs), and [`trainer`] fits the
//! logistic baseline used to produce scores. [`viz`] turns audits into plot
//! data.

pub mod audit;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod mitigate;
mod svg;
pub mod trainer;
pub mod viz;

pub use audit::{fairness_check, summarize_text, FairnessAudit, ModelAudit, Verdict, CHECK_METRICS, DEFAULT_EPSILON};
pub use data::{load_dataset, write_csv, AuditDataset, CutoffMap, FeatureColumn, ProtectedSpec, Schema};
pub use error::{Error, Result};
pub use metrics::{Confusion, MetricId};
