//! Compute reweighting case weights, show that they equalize the weighted
//! favorable rate, and fit a weighted model with them.
//!
//! cargo run --example reweighting

use std::error::Error;
use std::fs::File;

use fairaudit::data::{partition_levels, protected_spec_from_levels};
use fairaudit::mitigate::reweight;
use fairaudit::trainer::{fit_dataset, FeatureSelection, FitOptions};
use fairaudit::{fairness_check, load_dataset, CutoffMap, Schema, DEFAULT_EPSILON};

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/german.csv");
    let mut data = load_dataset(File::open(path)?, &Schema::new("risk", "sex"))?;
    let w = reweight(data.protected(), data.y_true())?;

    for (level, [w0, w1]) in &w.cell_weights {
        println!("{level:<7} weight(y=0) {w0:.4}  weight(y=1) {w1:.4}");
    }
    for (level, rows) in partition_levels(data.protected()) {
        let total: f64 = rows.iter().map(|&i| w.weights[i]).sum();
        let favorable: f64 = rows.iter().filter(|&&i| data.y_true()[i] == 1).map(|&i| w.weights[i]).sum();
        let raw = rows.iter().filter(|&&i| data.y_true()[i] == 1).count() as f64 / rows.len() as f64;
        println!("{level:<7} favorable rate {raw:.4} -> weighted {:.4}", favorable / total);
    }

    let opts = FitOptions::default();
    let plain = fit_dataset(&data, &FeatureSelection::default(), None, &opts)?.score(&data)?;
    let weighted = fit_dataset(&data, &FeatureSelection::default(), Some(&w.weights), &opts)?.score(&data)?;
    data.add_model("plain".into(), "plain".into(), plain)?;
    data.add_model("weighted".into(), "weighted".into(), weighted)?;

    let spec = protected_spec_from_levels(&data.levels(), "male")?;
    let audit = fairness_check(&data, &spec, DEFAULT_EPSILON, &CutoffMap::for_dataset(&data), None)?;
    for m in &audit.models {
        println!("{:<9} passed {}/5, total loss {:.4}", m.label, m.passed, m.total_loss);
    }
    Ok(())
}
