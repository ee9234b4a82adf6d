//! Bias mitigation applied to the data before training or to model scores
//! afterwards.

pub mod post;
pub mod pre;

pub use post::{cutoff_search, roc_pivot, CutoffSearchResult, PivotParams};
pub use pre::{pre_process_data, repair_feature, resample, reweight, PreProcess, ResampleMode};
