//! Command-line front end with four commands: `check`, `mitigate`, `train`
//! and `report`.
//!
//! Exit codes: 0 when every model passes all five checks, 1 when any check
//! fails, 2 when the only deviations are inconclusive checks, 3 on usage
//! errors and 4 on runtime errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::audit::{check_epsilon, fairness_check, summarize_text, FairnessAudit, ModelAudit, Verdict, CHECK_METRICS, DEFAULT_EPSILON};
use crate::data::{
    load_dataset, protected_spec_from_levels, write_csv, AuditDataset, CutoffMap, ProtectedSpec,
    Schema, WEIGHT_COLUMN,
};
use crate::error::Error;
use crate::metrics::MetricId;
use crate::mitigate::post::{cutoff_grid, cutoff_search, default_grid, roc_pivot, PivotParams};
use crate::mitigate::pre::{pre_process_data, resample, reweight, PreProcess, ResampleMode};
use crate::trainer::{auc, fit_dataset, FeatureSelection, FitOptions};
use crate::viz::{self, PlotKind, PlotSeries, Performance, SweepTarget};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "fairaudit", version, about = "Group-fairness audit and bias mitigation for binary classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit every score column against the privileged subgroup.
    Check(CheckArgs),
    /// Transform the data or the scores to reduce bias.
    Mitigate(MitigateArgs),
    /// Fit a logistic model and append its scores as a new column.
    Train(TrainArgs),
    /// Audit and emit the full plot-data bundle.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Column holding the true label.
    #[arg(long = "label-col", visible_alias = "label")]
    label_col: String,
    /// Column holding the protected attribute.
    #[arg(long = "protected-col", visible_alias = "protected")]
    protected_col: String,
    /// Model score column as LABEL=COLUMN (or just COLUMN); repeatable.
    #[arg(long = "score", value_name = "LABEL=COLUMN")]
    scores: Vec<String>,
    /// Raw label value meaning favorable; other values map to 0.
    #[arg(long)]
    favorable: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct AuditOpts {
    /// Privileged level of the protected attribute.
    #[arg(long)]
    privileged: Option<String>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Per-subgroup cutoff as LEVEL=VALUE; repeatable. Default 0.5.
    #[arg(long = "cutoff", value_name = "LEVEL=VALUE")]
    cutoffs: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct CheckArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    audit: AuditOpts,
    /// Earlier audit JSON whose models join this audit.
    #[arg(long)]
    merge: Option<PathBuf>,
    /// Also write SVG renderings of the plots.
    #[arg(long)]
    render: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Reweight,
    ResampleUniform,
    ResamplePreferential,
    Dir,
    RocPivot,
    CutoffSearch,
}

#[derive(Debug, Args, Serialize)]
struct MitigateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    audit: AuditOpts,
    #[arg(long, value_enum)]
    method: Method,
    /// Repair strength for `dir`, in [0, 1].
    #[arg(long)]
    lambda: Option<f64>,
    /// Numeric feature repaired by `dir`.
    #[arg(long)]
    feature: Option<String>,
    /// Half-width of the critical region for `roc-pivot`.
    #[arg(long)]
    theta: Option<f64>,
    /// Decision cutoff used by `roc-pivot` and `resample-preferential`.
    #[arg(long)]
    threshold: Option<f64>,
    /// Score label transformed by `roc-pivot` or swept by `cutoff-search`.
    #[arg(long)]
    model: Option<String>,
    /// Score label ranking rows for `resample-preferential`.
    #[arg(long)]
    ranker: Option<String>,
    /// Subgroup whose cutoff `cutoff-search` moves.
    #[arg(long)]
    subgroup: Option<String>,
    /// Metrics summed by `cutoff-search`, comma separated.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    #[arg(long = "grid-step")]
    grid_step: Option<f64>,
    /// Output CSV (default: <out>/<method>.csv).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Feature columns, comma separated (default: every non-role column plus
    /// the protected attribute).
    #[arg(long, value_delimiter = ',', conflicts_with = "intercept_only")]
    features: Vec<String>,
    /// Leave the protected attribute out of the default feature set.
    #[arg(long = "exclude-protected")]
    exclude_protected: bool,
    /// Fit the intercept alone.
    #[arg(long = "intercept-only")]
    intercept_only: bool,
    /// Numeric column of case weights (e.g. `_weights_` from reweighting).
    #[arg(long)]
    weights: Option<String>,
    /// Label and column name of the new score column.
    #[arg(long = "model-label", default_value = "logistic")]
    model_label: String,
    /// Score this CSV instead of the training file.
    #[arg(long = "apply-to")]
    apply_to: Option<PathBuf>,
    /// Output CSV (default: <out>/trained.csv).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    l2: f64,
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
struct ReportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    audit: AuditOpts,
    #[arg(long)]
    merge: Option<PathBuf>,
    /// Plot kinds, comma separated (default: every applicable kind).
    #[arg(long, value_delimiter = ',')]
    plots: Vec<String>,
    #[arg(long)]
    render: bool,
    /// Performance measure: accuracy, auc or f1.
    #[arg(long, default_value = "accuracy")]
    perf: String,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Z-score the heatmap columns.
    #[arg(long)]
    normalize: bool,
    /// Metric shown by choose_metric and group_metric.
    #[arg(long = "choose-metric", default_value = "FPR")]
    choose_metric: String,
    /// Subgroup swept by ceteris_paribus_cutoff (default: first unprivileged).
    #[arg(long)]
    subgroup: Option<String>,
    /// Metrics used by the parity-loss plots, comma separated.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    #[arg(long = "grid-step")]
    grid_step: Option<f64>,
    /// Plot summed instead of per-metric loss in ceteris_paribus_cutoff.
    #[arg(long)]
    cumulated: bool,
}

/// JSON document written by `check` and `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub version: u32,
    pub config_echo: Value,
    pub seed: u64,
    pub epsilon: f64,
    pub protected: ProtectedSpec,
    pub row_count: usize,
    pub group_sizes: BTreeMap<String, usize>,
    pub models: Vec<ModelAudit>,
    pub warnings: Vec<String>,
}

impl AuditReport {
    pub fn new(audit: &FairnessAudit, config_echo: Value, seed: u64, warnings: Vec<String>) -> Self {
        Self {
            version: REPORT_VERSION,
            config_echo,
            seed,
            epsilon: audit.epsilon,
            protected: audit.spec.clone(),
            row_count: audit.row_count,
            group_sizes: audit.group_sizes.clone(),
            models: audit.models.clone(),
            warnings,
        }
    }

    pub fn to_audit(&self) -> FairnessAudit {
        FairnessAudit {
            epsilon: self.epsilon,
            spec: self.protected.clone(),
            group_sizes: self.group_sizes.clone(),
            row_count: self.row_count,
            models: self.models.clone(),
        }
    }

    pub fn read(path: &Path) -> crate::Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

/// Exit status of an audit: any failed check gives 1, otherwise any
/// inconclusive check gives 2, otherwise 0.
pub fn exit_status(audit: &FairnessAudit) -> i32 {
    let verdicts = audit.models.iter().flat_map(|m| m.checks.values().map(|c| c.verdict));
    let mut status = EXIT_PASS;
    for v in verdicts {
        match v {
            Verdict::Fail => return EXIT_FAIL,
            Verdict::Inconclusive => status = EXIT_INCONCLUSIVE,
            Verdict::Pass => {}
        }
    }
    status
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::UnknownLevel { .. } | Error::UnknownModel(_) | Error::MissingColumn(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let result = match cli.command {
        Command::Check(a) => cmd_check(&a),
        Command::Mitigate(a) => cmd_mitigate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("hint: see `fairaudit <command> --help` for the flags each command accepts");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn parse_scores(raw: &[String]) -> CliResult<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for item in raw {
        let (label, column) = match item.split_once('=') {
            Some((l, c)) => (l.trim(), c.trim()),
            None => (item.trim(), item.trim()),
        };
        if label.is_empty() || column.is_empty() {
            return usage(format!("--score `{item}` must look like LABEL=COLUMN"));
        }
        if out.iter().any(|(l, _)| l == label) {
            return usage(format!("models must have different labels; `{label}` given twice"));
        }
        out.push((label.to_string(), column.to_string()));
    }
    Ok(out)
}

fn schema(input: &InputArgs) -> CliResult<Schema> {
    let mut schema = Schema::new(input.label_col.clone(), input.protected_col.clone());
    schema.scores = parse_scores(&input.scores)?;
    schema.favorable = input.favorable.clone();
    Ok(schema)
}

fn load(path: &Path, schema: &Schema) -> CliResult<AuditDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(load_dataset(BufReader::new(file), schema)?)
}

/// Loads `path` keeping only the declared score columns its header contains,
/// so one set of `--score` flags can describe both training and scoring files.
fn load_present_scores(path: &Path, schema: &Schema) -> CliResult<AuditDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let header: Vec<String> = reader.headers().map_err(Error::from)?.iter().map(str::to_string).collect();
    let mut schema = schema.clone();
    schema.scores.retain(|(_, column)| header.contains(column));
    load(path, &schema)
}

fn require_privileged(audit: &AuditOpts, command: &str) -> CliResult<String> {
    audit.privileged.clone().ok_or_else(|| {
        CliError::Usage(format!(
            "--privileged is required for {command}; name the privileged level of the protected column, e.g. --privileged male"
        ))
    })
}

fn parse_cutoffs(raw: &[String], dataset: &AuditDataset) -> CliResult<CutoffMap> {
    let levels = dataset.levels();
    let mut map = CutoffMap::for_dataset(dataset);
    for item in raw {
        let Some((level, value)) = item.split_once('=') else {
            return usage(format!("--cutoff `{item}` must look like LEVEL=VALUE"));
        };
        let level = level.trim();
        if !levels.iter().any(|l| l == level) {
            return Err(Error::UnknownLevel {
                level: level.to_string(),
                available: levels,
            }
            .into());
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--cutoff `{item}`: `{value}` is not a number")))?;
        map.set(level, value)?;
    }
    Ok(map)
}

fn parse_metrics(raw: &[String], default: &[MetricId]) -> CliResult<Vec<MetricId>> {
    if raw.is_empty() {
        return Ok(default.to_vec());
    }
    let mut out = Vec::new();
    for m in raw {
        let id: MetricId = m
            .parse()
            .map_err(|_| CliError::Usage(format!("unknown metric `{m}` (valid: {})", MetricId::ALL.map(MetricId::name).join(", "))))?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

fn grid(step: Option<f64>) -> CliResult<Vec<f64>> {
    Ok(match step {
        Some(s) => cutoff_grid(s)?,
        None => default_grid(),
    })
}

struct Prepared {
    dataset: AuditDataset,
    spec: ProtectedSpec,
    cutoffs: CutoffMap,
    prior: Option<FairnessAudit>,
}

fn prepare(input: &InputArgs, audit: &AuditOpts, merge: Option<&Path>, command: &str) -> CliResult<Prepared> {
    let privileged = require_privileged(audit, command)?;
    check_epsilon(audit.epsilon)?;
    let schema = schema(input)?;
    let prior = merge.map(AuditReport::read).transpose()?.map(|r| r.to_audit());
    let dataset = load(&input.input, &schema)?;
    let spec = protected_spec_from_levels(&dataset.levels(), &privileged)?;
    let cutoffs = parse_cutoffs(&audit.cutoffs, &dataset)?;
    if dataset.models().is_empty() && prior.is_none() {
        return usage("no model to audit; pass at least one --score LABEL=COLUMN (or --merge an earlier audit)");
    }
    Ok(Prepared {
        dataset,
        spec,
        cutoffs,
        prior,
    })
}

fn audit_warnings(audit: &FairnessAudit) -> Vec<String> {
    let mut out = Vec::new();
    for m in &audit.models {
        if m.cutoffs.is_split() {
            let cutoffs: Vec<String> = m.cutoffs.iter().map(|(l, c)| format!("{l}={c}")).collect();
            out.push(format!(
                "model `{}` uses subgroup-specific cutoffs ({}); its checks describe the adjusted decision rule",
                m.label,
                cutoffs.join(", ")
            ));
        }
        for (id, check) in &m.checks {
            if check.verdict == Verdict::Inconclusive {
                let levels: Vec<&str> = check
                    .verdicts
                    .iter()
                    .filter(|(_, v)| **v == Verdict::Inconclusive)
                    .map(|(l, _)| l.as_str())
                    .collect();
                out.push(format!(
                    "model `{}`: {} ({}) is inconclusive; ratio undefined for {}",
                    m.label,
                    check.criterion,
                    id.name(),
                    levels.join(", ")
                ));
            }
        }
    }
    out
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(Error::io(dir, e)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    Ok(viz::write_json(path, value)?)
}

fn write_dataset(dataset: &AuditDataset, path: &Path) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(write_csv(dataset, std::io::BufWriter::new(file))?)
}

fn echo<T: Serialize>(command: &str, args: &T) -> Value {
    json!({ "command": command, "args": args })
}

fn cmd_check(args: &CheckArgs) -> CliResult<i32> {
    let p = prepare(&args.input, &args.audit, args.merge.as_deref(), "check")?;
    let audit = fairness_check(&p.dataset, &p.spec, args.audit.epsilon, &p.cutoffs, p.prior.as_ref())?;
    let out = &args.input.out;
    create_dir(out)?;
    let report = AuditReport::new(&audit, echo("check", args), args.input.seed, audit_warnings(&audit));
    write_json(&out.join("audit.json"), &report)?;
    let summary = summarize_text(&audit);
    fs::write(out.join("summary.txt"), &summary).map_err(|e| Error::io(out.join("summary.txt"), e))?;
    print!("{summary}");
    let series = [
        viz::fairness_check_bars(&audit),
        viz::metric_scores_view(&viz::audit_metric_table(&audit), &p.spec, &CHECK_METRICS),
    ];
    viz::emit_plot_bundle(&series, &out.join("plots"), args.render)?;
    Ok(exit_status(&audit))
}

fn plot_kinds(raw: &[String]) -> CliResult<Option<Vec<PlotKind>>> {
    if raw.is_empty() {
        return Ok(None);
    }
    let mut kinds = Vec::new();
    for k in raw {
        let kind: PlotKind = k.parse()?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(Some(kinds))
}

fn cmd_report(args: &ReportArgs) -> CliResult<i32> {
    let requested = plot_kinds(&args.plots)?;
    let perf: Performance = args.perf.parse()?;
    let chosen: MetricId = args
        .choose_metric
        .parse()
        .map_err(|_| CliError::Usage(format!("unknown metric `{}`", args.choose_metric)))?;
    let metrics = parse_metrics(&args.metrics, &CHECK_METRICS)?;
    if args.bins < 2 {
        return usage("--bins must be at least 2");
    }
    let grid = grid(args.grid_step)?;
    let p = prepare(&args.input, &args.audit, args.merge.as_deref(), "report")?;
    let subgroup = match &args.subgroup {
        Some(s) => {
            if !p.spec.levels().any(|l| l == s) {
                return Err(Error::UnknownLevel {
                    level: s.clone(),
                    available: p.dataset.levels(),
                }
                .into());
            }
            s.clone()
        }
        None => p.spec.unprivileged[0].clone(),
    };
    let audit = fairness_check(&p.dataset, &p.spec, args.audit.epsilon, &p.cutoffs, p.prior.as_ref())?;
    let matrix = viz::parity_loss_matrix(&audit, &metrics);
    let scored: Vec<String> = p.dataset.models().iter().map(|m| m.label.clone()).collect();

    let explicit = requested.is_some();
    let kinds = requested.unwrap_or_else(|| PlotKind::ALL.to_vec());
    let mut warnings = audit_warnings(&audit);
    let mut series = Vec::new();
    for kind in kinds {
        let per_model = |f: &dyn Fn(&str) -> crate::Result<PlotSeries>| -> crate::Result<PlotSeries> {
            if scored.is_empty() {
                return Err(Error::InvalidParameter(format!("{kind} needs score columns in the input data")));
            }
            PlotSeries::merge(scored.iter().map(|m| f(m)).collect::<crate::Result<_>>()?)
        };
        let built = match kind {
            PlotKind::FairnessCheckBars => Ok(viz::fairness_check_bars(&audit)),
            PlotKind::MetricScores => Ok(viz::metric_scores_view(&viz::audit_metric_table(&audit), &p.spec, &metrics)),
            PlotKind::Radar => Ok(viz::radar(&matrix)),
            PlotKind::Heatmap => Ok(viz::heatmap(&matrix, args.normalize)),
            PlotKind::Pca => viz::pca_projection(&matrix),
            PlotKind::ChooseMetric => viz::choose_metric(&viz::parity_loss_matrix(&audit, &[chosen]), chosen),
            PlotKind::StackMetrics => Ok(viz::stack_metrics(&matrix)),
            PlotKind::GroupMetric => viz::group_metric(&audit, Some(&p.dataset), chosen, perf),
            PlotKind::Density => per_model(&|m| viz::score_density(&p.dataset, &p.spec, m, args.bins)),
            PlotKind::PerformanceAndFairness => viz::performance_vs_fairness(&audit, Some(&p.dataset), perf, &metrics),
            PlotKind::AllCutoffs => per_model(&|m| {
                viz::cutoff_sweep(&p.dataset, &p.spec, &p.cutoffs, m, &metrics, &SweepTarget::AllSubgroups, &grid, false)
            }),
            PlotKind::CeterisParibusCutoff => per_model(&|m| {
                let target = SweepTarget::Subgroup(subgroup.clone());
                viz::cutoff_sweep(&p.dataset, &p.spec, &p.cutoffs, m, &metrics, &target, &grid, args.cumulated)
            }),
        };
        match built {
            Ok(s) => series.push(s),
            Err(e) if !explicit => warnings.push(format!("skipped plot {kind}: {e}")),
            Err(e) => return Err(e.into()),
        }
    }

    let out = &args.input.out;
    create_dir(out)?;
    let report = AuditReport::new(&audit, echo("report", args), args.input.seed, warnings);
    write_json(&out.join("report.json"), &report)?;
    let manifest = viz::emit_plot_bundle(&series, &out.join("plots"), args.render)?;
    println!(
        "wrote {} plot series to {}",
        manifest.series.len(),
        out.join("plots").display()
    );
    Ok(exit_status(&audit))
}

fn reject_extra(args: &MitigateArgs, allowed: &[&str]) -> CliResult<()> {
    let given = [
        ("--lambda", args.lambda.is_some()),
        ("--feature", args.feature.is_some()),
        ("--theta", args.theta.is_some()),
        ("--threshold", args.threshold.is_some()),
        ("--model", args.model.is_some()),
        ("--ranker", args.ranker.is_some()),
        ("--subgroup", args.subgroup.is_some()),
        ("--metrics", !args.metrics.is_empty()),
        ("--grid-step", args.grid_step.is_some()),
    ];
    for (flag, present) in given {
        if present && !allowed.contains(&flag) {
            let method = args.method.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            return usage(format!("{flag} does not apply to method {method}"));
        }
    }
    Ok(())
}

fn required<T: Clone>(value: &Option<T>, flag: &str, method: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("method {method} requires {flag}")))
}

/// The score label a method acts on: `--model`, or the only `--score`.
fn pick_model(model: &Option<String>, scores: &[(String, String)], method: &str) -> CliResult<String> {
    match (model, scores) {
        (Some(m), _) => {
            if scores.iter().any(|(l, _)| l == m) {
                Ok(m.clone())
            } else {
                usage(format!("--model `{m}` is not one of the --score labels"))
            }
        }
        (None, [(only, _)]) => Ok(only.clone()),
        (None, []) => usage(format!("method {method} needs a --score column")),
        (None, _) => usage(format!("method {method} needs --model to pick one of several --score columns")),
    }
}

fn cmd_mitigate(args: &MitigateArgs) -> CliResult<i32> {
    let schema = schema(&args.input)?;
    let out = &args.input.out;
    let method_name = args.method.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let output = args.output.clone().unwrap_or_else(|| out.join(format!("{method_name}.csv")));
    let echo = echo("mitigate", args);

    match args.method {
        Method::Reweight | Method::ResampleUniform => {
            reject_extra(args, &[])?;
            let dataset = load(&args.input.input, &schema)?;
            let (method, details) = if args.method == Method::Reweight {
                let w = reweight(dataset.protected(), dataset.y_true())?;
                (PreProcess::Reweight, json!({ "cell_weights": w.cell_weights }))
            } else {
                let plan = resample(dataset.protected(), dataset.y_true(), ResampleMode::Uniform, None, 0.5, args.input.seed)?;
                (PreProcess::ResampleUniform { seed: args.input.seed }, json!({ "cells": plan.cells }))
            };
            let result = pre_process_data(&dataset, &method)?;
            write_dataset(&result, &output)?;
            write_json(
                &out.join("mitigation.json"),
                &json!({ "version": REPORT_VERSION, "config_echo": echo, "seed": args.input.seed,
                         "method": method, "rows": result.row_count(), "output": output, "details": details }),
            )?;
        }
        Method::ResamplePreferential => {
            reject_extra(args, &["--ranker", "--threshold"])?;
            let ranker = required(&args.ranker, "--ranker", &method_name)?;
            pick_model(&Some(ranker.clone()), &schema.scores, &method_name)?;
            let cutoff = args.threshold.unwrap_or(CutoffMap::DEFAULT);
            PivotParams::new(0.5, cutoff)?;
            let dataset = load(&args.input.input, &schema)?;
            let plan = resample(
                dataset.protected(),
                dataset.y_true(),
                ResampleMode::Preferential,
                Some(&dataset.model(&ranker)?.scores),
                cutoff,
                args.input.seed,
            )?;
            let method = PreProcess::ResamplePreferential { ranker, cutoff };
            let result = pre_process_data(&dataset, &method)?;
            write_dataset(&result, &output)?;
            write_json(
                &out.join("mitigation.json"),
                &json!({ "version": REPORT_VERSION, "config_echo": echo, "seed": args.input.seed,
                         "method": method, "rows": result.row_count(), "output": output, "details": { "cells": plan.cells } }),
            )?;
        }
        Method::Dir => {
            reject_extra(args, &["--lambda", "--feature"])?;
            let lambda = required(&args.lambda, "--lambda", &method_name)?;
            let feature = required(&args.feature, "--feature", &method_name)?;
            if !(0.0..=1.0).contains(&lambda) {
                return usage(format!("--lambda {lambda} must lie in [0, 1]"));
            }
            let dataset = load(&args.input.input, &schema)?;
            let method = PreProcess::DisparateImpactRemover { feature, lambda };
            let result = pre_process_data(&dataset, &method)?;
            write_dataset(&result, &output)?;
            write_json(
                &out.join("mitigation.json"),
                &json!({ "version": REPORT_VERSION, "config_echo": echo, "seed": args.input.seed,
                         "method": method, "rows": result.row_count(), "output": output }),
            )?;
        }
        Method::RocPivot => {
            reject_extra(args, &["--theta", "--threshold", "--model"])?;
            let privileged = require_privileged(&args.audit, "roc-pivot")?;
            let theta = required(&args.theta, "--theta", &method_name)?;
            let params = PivotParams::new(theta, args.threshold.unwrap_or(CutoffMap::DEFAULT))?;
            let model = pick_model(&args.model, &schema.scores, &method_name)?;
            let mut dataset = load(&args.input.input, &schema)?;
            let spec = protected_spec_from_levels(&dataset.levels(), &privileged)?;
            let before = dataset.model(&model)?.scores.clone();
            let after = roc_pivot(&before, dataset.protected(), &spec, params)?;
            let changed = before.iter().zip(&after).filter(|(a, b)| a != b).count();
            dataset.replace_scores(&model, after)?;
            write_dataset(&dataset, &output)?;
            write_json(
                &out.join("mitigation.json"),
                &json!({ "version": REPORT_VERSION, "config_echo": echo, "seed": args.input.seed,
                         "method": "roc_pivot", "model": model, "params": params,
                         "changed_rows": changed, "output": output }),
            )?;
        }
        Method::CutoffSearch => {
            reject_extra(args, &["--model", "--subgroup", "--metrics", "--grid-step"])?;
            let privileged = require_privileged(&args.audit, "cutoff-search")?;
            let metrics = parse_metrics(&args.metrics, &CHECK_METRICS)?;
            let grid = grid(args.grid_step)?;
            let model = pick_model(&args.model, &schema.scores, &method_name)?;
            let dataset = load(&args.input.input, &schema)?;
            let spec = protected_spec_from_levels(&dataset.levels(), &privileged)?;
            let cutoffs = parse_cutoffs(&args.audit.cutoffs, &dataset)?;
            let subgroup = args.subgroup.clone().unwrap_or_else(|| spec.unprivileged[0].clone());
            let result = cutoff_search(&dataset, &spec, &cutoffs, &model, &subgroup, &metrics, &grid)?;
            let best = cutoffs.clone().with(&subgroup, result.best_cutoff)?;
            let series = viz::cutoff_sweep(
                &dataset,
                &spec,
                &cutoffs,
                &model,
                &metrics,
                &SweepTarget::Subgroup(subgroup.clone()),
                &grid,
                false,
            )?;
            create_dir(out)?;
            write_json(
                &out.join("cutoff_search.json"),
                &json!({ "version": REPORT_VERSION, "config_echo": echo, "seed": args.input.seed,
                         "best_cutoffs": best, "result": result }),
            )?;
            viz::emit_plot_bundle(&[series], &out.join("plots"), false)?;
            println!(
                "best cutoff for {subgroup}: {} (summed parity loss {:.6}, undefined metrics {})",
                result.best_cutoff, result.best_loss, result.best_skipped
            );
        }
    }
    Ok(EXIT_PASS)
}

fn cmd_train(args: &TrainArgs) -> CliResult<i32> {
    let schema = schema(&args.input)?;
    let label = args.model_label.trim().to_string();
    if label.is_empty() {
        return usage("--model-label must not be empty");
    }
    if args.l2 < 0.0 || args.max_iter == 0 {
        return usage("--l2 must be >= 0 and --max-iter >= 1");
    }
    let dataset = load_present_scores(&args.input.input, &schema)?;
    let target = match &args.apply_to {
        Some(path) => Some(load_present_scores(path, &schema)?),
        None => None,
    };
    for d in std::iter::once(&dataset).chain(target.as_ref()) {
        let taken = d.models().iter().any(|m| m.label == label || m.column == label)
            || d.feature(&label).is_some()
            || [d.label_column(), d.protected_column(), WEIGHT_COLUMN].contains(&label.as_str());
        if taken {
            return usage(format!("model label `{label}` collides with an existing column; choose another --model-label"));
        }
    }

    let weights: Option<Vec<f64>> = match args.weights.as_deref() {
        None => None,
        Some(WEIGHT_COLUMN) => Some(
            dataset
                .weights()
                .ok_or_else(|| CliError::Usage(format!("input has no `{WEIGHT_COLUMN}` column")))?
                .to_vec(),
        ),
        Some(name) => Some(
            dataset
                .feature(name)
                .and_then(|f| f.column.as_numeric())
                .ok_or_else(|| CliError::Usage(format!("--weights `{name}` is not a numeric column")))?
                .to_vec(),
        ),
    };

    let selection = if args.intercept_only {
        FeatureSelection::InterceptOnly
    } else if args.features.is_empty() {
        FeatureSelection::All {
            include_protected: !args.exclude_protected,
            exclude: args.weights.iter().cloned().collect(),
        }
    } else {
        FeatureSelection::Named(args.features.clone())
    };
    let fit_opts = FitOptions {
        l2: args.l2,
        max_iter: args.max_iter,
        ..FitOptions::default()
    };
    let fitted = fit_dataset(&dataset, &selection, weights.as_deref(), &fit_opts)?;
    let model = &fitted.model;
    let train_scores = fitted.score(&dataset)?;
    let scoring = target.as_ref().unwrap_or(&dataset);
    let scores = if target.is_some() { fitted.score(scoring)? } else { train_scores.clone() };

    let mut result = scoring.clone();
    result.add_model(label.clone(), label.clone(), scores)?;
    let out = &args.input.out;
    let output = args.output.clone().unwrap_or_else(|| out.join("trained.csv"));
    write_dataset(&result, &output)?;
    create_dir(out)?;
    let training_auc = auc(&train_scores, dataset.y_true()).ok();
    write_json(
        &out.join("model.json"),
        &json!({
            "version": REPORT_VERSION,
            "config_echo": echo("train", args),
            "seed": args.input.seed,
            "label": label,
            "rows": dataset.row_count(),
            "columns": model.columns,
            "coefficients": model.coefficients,
            "convergence": model.convergence,
            "training_auc": training_auc,
            "output": output,
        }),
    )?;
    if !model.convergence.converged {
        eprintln!(
            "warning: fit stopped after {} iterations with gradient norm {:.3e}",
            model.convergence.iterations, model.convergence.gradient_norm
        );
    }
    println!("wrote scores `{label}` to {}", output.display());
    Ok(EXIT_PASS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_flags() {
        let s = parse_scores(&["lm=p_lm".into(), "rf".into()]).unwrap();
        assert_eq!(s, vec![("lm".into(), "p_lm".into()), ("rf".into(), "rf".into())]);
        assert!(matches!(parse_scores(&["a=x".into(), "a=y".into()]), Err(CliError::Usage(_))));
        assert!(matches!(parse_scores(&["=x".into()]), Err(CliError::Usage(_))));
    }

    #[test]
    fn metric_flags() {
        assert_eq!(parse_metrics(&[], &CHECK_METRICS).unwrap(), CHECK_METRICS.to_vec());
        assert_eq!(
            parse_metrics(&["fpr".into(), "TPR".into(), "FPR".into()], &[]).unwrap(),
            vec![MetricId::FPR, MetricId::TPR]
        );
        assert!(parse_metrics(&["xyz".into()], &[]).is_err());
    }

    #[test]
    fn help_exits_zero_and_bad_flag_exits_usage() {
        assert_eq!(run(["fairaudit", "--help"]), EXIT_PASS);
        assert_eq!(run(["fairaudit", "check", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["fairaudit"]), EXIT_USAGE);
    }
}
