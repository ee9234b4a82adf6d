//! Compare the baseline with two mitigated models: one retrained on
//! uniformly resampled data, one with its scores pivoted around the cutoff.
//!
//! cargo run --example mitigation_pipeline

use std::error::Error;
use std::fs::File;

use fairaudit::data::protected_spec_from_levels;
use fairaudit::mitigate::{pre_process_data, roc_pivot, PivotParams, PreProcess};
use fairaudit::trainer::{fit_dataset, FeatureSelection, FitOptions};
use fairaudit::{fairness_check, load_dataset, CutoffMap, Schema, DEFAULT_EPSILON};

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/german.csv");
    let mut data = load_dataset(File::open(path)?, &Schema::new("risk", "sex"))?;
    let spec = protected_spec_from_levels(&data.levels(), "male")?;
    let opts = FitOptions::default();
    let features = FeatureSelection::default();

    let base = fit_dataset(&data, &features, None, &opts)?.score(&data)?;

    // Fit on the resampled rows, score the original ones.
    let resampled = pre_process_data(&data, &PreProcess::ResampleUniform { seed: 42 })?;
    let resample = fit_dataset(&resampled, &features, None, &opts)?.score(&data)?;

    let pivoted = roc_pivot(&base, data.protected(), &spec, PivotParams::new(0.05, 0.5)?)?;

    data.add_model("base".into(), "base".into(), base)?;
    data.add_model("resample".into(), "resample".into(), resample)?;
    data.add_model("roc".into(), "roc".into(), pivoted)?;

    let audit = fairness_check(&data, &spec, DEFAULT_EPSILON, &CutoffMap::for_dataset(&data), None)?;
    println!("{:<10} {:>6} {:>10}  failing", "model", "passed", "total loss");
    for m in &audit.models {
        let failing: Vec<&str> = m.failing().map(|(id, _)| id.name()).collect();
        println!("{:<10} {:>4}/5 {:>10.4}  {}", m.label, m.passed, m.total_loss, failing.join(", "));
    }
    Ok(())
}
