//! Train the logistic baseline on German Credit and audit it by sex.
//!
//! cargo run --example german_check

use std::error::Error;
use std::fs::File;

use fairaudit::data::protected_spec_from_levels;
use fairaudit::trainer::{auc, fit_dataset, FeatureSelection, FitOptions};
use fairaudit::{fairness_check, load_dataset, summarize_text, CutoffMap, Schema, DEFAULT_EPSILON};

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/german.csv");
    let mut data = load_dataset(File::open(path)?, &Schema::new("risk", "sex"))?;

    let fitted = fit_dataset(&data, &FeatureSelection::default(), None, &FitOptions::default())?;
    let scores = fitted.score(&data)?;
    println!(
        "fitted in {} Newton steps, training AUC {:.3}",
        fitted.model.convergence.iterations,
        auc(&scores, data.y_true())?
    );
    data.add_model("logistic".into(), "logistic".into(), scores)?;

    let spec = protected_spec_from_levels(&data.levels(), "male")?;
    let audit = fairness_check(&data, &spec, DEFAULT_EPSILON, &CutoffMap::for_dataset(&data), None)?;
    print!("{}", summarize_text(&audit));
    Ok(())
}
