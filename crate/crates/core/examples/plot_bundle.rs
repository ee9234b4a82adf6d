//! Build every plot series for three models and write the bundle (JSON and
//! SVG) to a directory, by default `target/plot_bundle`.
//!
//! cargo run --example plot_bundle [-- <dir>]

use std::error::Error;
use std::fs::File;
use std::path::PathBuf;

use fairaudit::data::protected_spec_from_levels;
use fairaudit::mitigate::{pre_process_data, roc_pivot, PivotParams, PreProcess};
use fairaudit::mitigate::post::default_grid;
use fairaudit::trainer::{fit_dataset, FeatureSelection, FitOptions};
use fairaudit::viz::{self, Performance, PlotSeries, SweepTarget};
use fairaudit::{fairness_check, load_dataset, CutoffMap, MetricId, Schema, CHECK_METRICS, DEFAULT_EPSILON};

fn main() -> Result<(), Box<dyn Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../target/plot_bundle")));
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/german.csv");
    let mut data = load_dataset(File::open(path)?, &Schema::new("risk", "sex"))?;
    let spec = protected_spec_from_levels(&data.levels(), "male")?;
    let opts = FitOptions::default();
    let all = FeatureSelection::default();

    let base = fit_dataset(&data, &all, None, &opts)?.score(&data)?;
    let resampled = pre_process_data(&data, &PreProcess::ResampleUniform { seed: 42 })?;
    let resample = fit_dataset(&resampled, &all, None, &opts)?.score(&data)?;
    let roc = roc_pivot(&base, data.protected(), &spec, PivotParams::new(0.05, 0.5)?)?;
    for (label, scores) in [("base", base), ("resample", resample), ("roc", roc)] {
        data.add_model(label.into(), label.into(), scores)?;
    }

    let cutoffs = CutoffMap::for_dataset(&data);
    let audit = fairness_check(&data, &spec, DEFAULT_EPSILON, &cutoffs, None)?;
    let matrix = viz::parity_loss_matrix(&audit, &CHECK_METRICS);
    let grid = default_grid();
    let labels = ["base", "resample", "roc"];
    let per_model = |f: &dyn Fn(&str) -> fairaudit::Result<PlotSeries>| -> fairaudit::Result<PlotSeries> {
        PlotSeries::merge(labels.iter().map(|m| f(m)).collect::<fairaudit::Result<_>>()?)
    };
    let female = SweepTarget::Subgroup("female".into());

    let series = vec![
        viz::fairness_check_bars(&audit),
        viz::metric_scores_view(&viz::audit_metric_table(&audit), &spec, &CHECK_METRICS),
        viz::radar(&matrix),
        viz::heatmap(&matrix, true),
        viz::pca_projection(&matrix)?,
        viz::choose_metric(&matrix, MetricId::FPR)?,
        viz::stack_metrics(&matrix),
        viz::group_metric(&audit, Some(&data), MetricId::FPR, Performance::Auc)?,
        per_model(&|m| viz::score_density(&data, &spec, m, 20))?,
        viz::performance_vs_fairness(&audit, Some(&data), Performance::Auc, &CHECK_METRICS)?,
        per_model(&|m| viz::cutoff_sweep(&data, &spec, &cutoffs, m, &CHECK_METRICS, &SweepTarget::AllSubgroups, &grid, false))?,
        per_model(&|m| viz::cutoff_sweep(&data, &spec, &cutoffs, m, &CHECK_METRICS, &female, &grid, true))?,
    ];

    let manifest = viz::emit_plot_bundle(&series, &dir, true)?;
    println!("wrote {} series to {}", manifest.series.len(), dir.display());
    let pca = viz::pca(&matrix)?;
    println!(
        "PCA explained variance: {:.3}, {:.3}",
        pca.explained[0], pca.explained[1]
    );
    Ok(())
}
