//! Sweep the cutoff of the unprivileged subgroup and re-audit with the
//! cutoff that minimizes the summed parity loss.
//!
//! cargo run --example cutoff_search

use std::error::Error;
use std::fs::File;

use fairaudit::data::protected_spec_from_levels;
use fairaudit::mitigate::cutoff_search;
use fairaudit::mitigate::post::default_grid;
use fairaudit::trainer::{fit_dataset, FeatureSelection, FitOptions};
use fairaudit::{fairness_check, load_dataset, summarize_text, CutoffMap, Schema, CHECK_METRICS, DEFAULT_EPSILON};

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/german.csv");
    let mut data = load_dataset(File::open(path)?, &Schema::new("risk", "sex"))?;
    let scores = fit_dataset(&data, &FeatureSelection::default(), None, &FitOptions::default())?.score(&data)?;
    data.add_model("logistic".into(), "logistic".into(), scores)?;
    let spec = protected_spec_from_levels(&data.levels(), "male")?;

    let cutoffs = CutoffMap::for_dataset(&data);
    let search = cutoff_search(&data, &spec, &cutoffs, "logistic", "female", &CHECK_METRICS, &default_grid())?;
    println!(
        "best female cutoff {:.2}: summed parity loss {:.4} ({} undefined metrics)",
        search.best_cutoff, search.best_loss, search.best_skipped
    );
    for l in search.losses.iter().step_by(10) {
        println!("  cutoff {:.2}  loss {:.4}", l.cutoff, l.cumulated);
    }

    let adjusted = cutoffs.with("female", search.best_cutoff)?;
    let audit = fairness_check(&data, &spec, DEFAULT_EPSILON, &adjusted, None)?;
    print!("{}", summarize_text(&audit));
    Ok(())
}
