//! Repair `credit_amount` towards a common distribution across sexes at
//! several strengths and show how the subgroup quartiles converge.
//!
//! cargo run --example disparate_impact

use std::error::Error;
use std::fs::File;

use fairaudit::data::partition_levels;
use fairaudit::mitigate::repair_feature;
use fairaudit::{load_dataset, Schema};

fn quartiles(mut v: Vec<f64>) -> [f64; 3] {
    v.sort_by(f64::total_cmp);
    let at = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
    [at(0.25), at(0.5), at(0.75)]
}

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/german.csv");
    let data = load_dataset(File::open(path)?, &Schema::new("risk", "sex"))?;
    let amount = data
        .feature("credit_amount")
        .and_then(|f| f.column.as_numeric())
        .ok_or("credit_amount missing")?;
    let groups = partition_levels(data.protected());

    for lambda in [0.0, 0.5, 1.0] {
        let repaired = repair_feature(amount, data.protected(), lambda)?;
        println!("lambda = {lambda}");
        for (level, rows) in &groups {
            let q = quartiles(rows.iter().map(|&i| repaired.values[i]).collect());
            println!("  {level:<7} q1 {:>8.1}  median {:>8.1}  q3 {:>8.1}", q[0], q[1], q[2]);
        }
    }
    Ok(())
}
