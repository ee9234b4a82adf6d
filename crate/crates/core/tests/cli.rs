mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use common::reweight_oracle;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn fairaudit(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_fairaudit"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn fairaudit");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Two subgroups with identical label/score mixes, plus a numeric feature
/// and two extra score columns.
fn balanced(dir: &Path, negative_score: f64) {
    let mut text = String::from("y,g,s,s2,s3,inc\n");
    let rows = [(1, 0.9); 6].into_iter().chain([(1, 0.3); 2]).chain([(0, 0.2); 6]).chain([(0, negative_score); 2]);
    for g in ["a", "b"] {
        for (k, (y, s)) in rows.clone().enumerate() {
            let inc = k * 3 + usize::from(g == "b");
            text += &format!("{y},{g},{s},{},{},{inc}\n", 1.0 - s, (s + 0.5) / 2.0);
        }
    }
    fs::write(dir.join("d.csv"), text).unwrap();
}

fn german_path() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/data/german.csv").to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (header, rows) = read_csv(path);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"));
    rows.into_iter().map(|r| r[i].clone()).collect()
}

fn numbers(values: &[String]) -> Vec<f64> {
    values.iter().map(|v| v.parse().unwrap()).collect()
}

const BASE: [&str; 6] = ["--input", "d.csv", "--label", "y", "--protected", "g"];

fn with_base<'a>(cmd: &'a str, rest: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(BASE);
    v.extend(rest);
    v
}

#[test]
fn check_passes_balanced_data() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(tmp.path(), &with_base("check", &["--score", "m=s", "--privileged", "a"]));
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(run.stdout.contains("passed 5/5"), "{}", run.stdout);
    for f in ["out/audit.json", "out/summary.txt", "out/plots/manifest.json", "out/plots/fairness_check_bars.json"] {
        assert!(tmp.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn check_reports_inconclusive_when_a_ratio_is_undefined() {
    let tmp = TempDir::new().unwrap();
    // no false positives in either group: FPR ratio is 0/0
    balanced(tmp.path(), 0.2);
    let run = fairaudit(tmp.path(), &with_base("check", &["--score", "m=s", "--privileged", "a"]));
    assert_eq!(run.code, 2, "{}{}", run.stdout, run.stderr);
}

#[test]
fn check_fails_on_german_credit() {
    let tmp = TempDir::new().unwrap();
    let input = german_path();
    let train = fairaudit(
        tmp.path(),
        &["train", "--input", &input, "--label", "risk", "--protected", "sex", "--model-label", "base"],
    );
    assert_eq!(train.code, 0, "{}", train.stderr);
    let run = fairaudit(
        tmp.path(),
        &["check", "--input", "out/trained.csv", "--label", "risk", "--protected", "sex", "--score", "base", "--privileged", "male"],
    );
    assert_eq!(run.code, 1, "{}", run.stderr);
    assert!(run.stdout.contains("failed 1"), "{}", run.stdout);
}

#[test]
fn usage_errors_exit_three() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let missing_privileged = fairaudit(tmp.path(), &with_base("check", &["--score", "m=s"]));
    assert_eq!(missing_privileged.code, 3);
    assert!(missing_privileged.stderr.contains("--privileged"));
    let bad_level = fairaudit(tmp.path(), &with_base("check", &["--score", "m=s", "--privileged", "zz"]));
    assert_eq!(bad_level.code, 3, "{}", bad_level.stderr);
    let no_lambda = fairaudit(tmp.path(), &with_base("mitigate", &["--method", "dir", "--feature", "inc"]));
    assert_eq!(no_lambda.code, 3, "{}", no_lambda.stderr);
    let stray = fairaudit(tmp.path(), &with_base("mitigate", &["--method", "reweight", "--theta", "0.1"]));
    assert_eq!(stray.code, 3, "{}", stray.stderr);
    assert_eq!(fairaudit(tmp.path(), &["check", "--bogus"]).code, 3);
}

#[test]
fn missing_input_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let run = fairaudit(tmp.path(), &with_base("check", &["--score", "m=s", "--privileged", "a"]));
    assert_eq!(run.code, 4, "{}", run.stderr);
}

#[test]
fn repair_at_zero_strength_reproduces_the_feature() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(tmp.path(), &with_base("mitigate", &["--method", "dir", "--feature", "inc", "--lambda", "0"]));
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(
        numbers(&column(&tmp.path().join("out/dir.csv"), "inc")),
        numbers(&column(&tmp.path().join("d.csv"), "inc"))
    );
    assert!(tmp.path().join("out/mitigation.json").exists());
}

#[test]
fn reweight_writes_oracle_weights() {
    let tmp = TempDir::new().unwrap();
    let input = german_path();
    let run = fairaudit(
        tmp.path(),
        &["mitigate", "--input", &input, "--label", "risk", "--protected", "sex", "--method", "reweight"],
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let out = tmp.path().join("out/reweight.csv");
    let y: Vec<u8> = column(&out, "risk").iter().map(|v| v.parse().unwrap()).collect();
    let protected = column(&out, "sex");
    let want = reweight_oracle(&protected, &y);
    for (got, want) in numbers(&column(&out, "_weights_")).iter().zip(&want) {
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
    }
}

#[test]
fn roc_pivot_moves_only_critical_scores() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(
        tmp.path(),
        &with_base("mitigate", &["--method", "roc-pivot", "--score", "m=s", "--model", "m", "--theta", "0.25", "--privileged", "a"]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let before = numbers(&column(&tmp.path().join("d.csv"), "s"));
    let after = numbers(&column(&tmp.path().join("out/roc-pivot.csv"), "s"));
    let groups = column(&tmp.path().join("d.csv"), "g");
    let mut moved = 0;
    for i in 0..before.len() {
        let critical = before[i] > 0.25 && before[i] < 0.75;
        if !critical {
            assert_eq!(before[i], after[i]);
        } else if before[i] != after[i] {
            moved += 1;
            assert!((after[i] - (1.0 - before[i])).abs() < 1e-12);
            // privileged rows move down, unprivileged rows up
            assert_eq!(groups[i] == "a", after[i] < before[i]);
        }
    }
    assert!(moved > 0);
}

#[test]
fn cutoff_search_writes_best_cutoffs() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(
        tmp.path(),
        &with_base("mitigate", &["--method", "cutoff-search", "--score", "m=s", "--model", "m", "--subgroup", "b", "--privileged", "a"]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let text = fs::read_to_string(tmp.path().join("out/cutoff_search.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["best_cutoffs"]["b"].is_number(), "{v}");
}

#[test]
fn intercept_only_training_gives_constant_scores() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(tmp.path(), &with_base("train", &["--intercept-only", "--model-label", "flat"]));
    assert_eq!(run.code, 0, "{}", run.stderr);
    let scores = numbers(&column(&tmp.path().join("out/trained.csv"), "flat"));
    assert!(scores.iter().all(|s| (s - 0.5).abs() < 1e-8), "{scores:?}");
    assert!(tmp.path().join("out/model.json").exists());
}

#[test]
fn training_refuses_an_existing_label() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(tmp.path(), &with_base("train", &["--score", "m=s", "--model-label", "m"]));
    assert_eq!(run.code, 3, "{}", run.stderr);
}

fn plot_files(dir: &Path) -> BTreeMap<String, u64> {
    fs::read_dir(dir.join("out/plots"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), e.metadata().unwrap().len())
        })
        .collect()
}

#[test]
fn report_emits_requested_kinds_only() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(
        tmp.path(),
        &with_base("report", &["--score", "m=s", "--score", "n=s2", "--privileged", "a", "--plots", "radar,heatmap"]),
    );
    assert_eq!(run.code, 0, "{}", run.stderr);
    let files: Vec<String> = plot_files(tmp.path()).into_keys().collect();
    assert_eq!(files, ["heatmap.json", "manifest.json", "radar.json"]);
}

#[test]
fn report_full_bundle_has_every_kind() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(
        tmp.path(),
        &with_base(
            "report",
            &["--score", "m=s", "--score", "n=s2", "--score", "o=s3", "--privileged", "a", "--render"],
        ),
    );
    assert!(run.code == 0 || run.code == 1, "{}", run.stderr);
    let files = plot_files(tmp.path());
    assert_eq!(files.keys().filter(|f| f.ends_with(".json") && *f != "manifest.json").count(), 12, "{files:?}");
    assert_eq!(files.keys().filter(|f| f.ends_with(".svg")).count(), 12);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/plots/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["series"].as_array().unwrap().len(), 12);
    assert!(tmp.path().join("out/report.json").exists());
}

#[test]
fn report_rejects_unknown_plot_kind() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let run = fairaudit(
        tmp.path(),
        &with_base("report", &["--score", "m=s", "--privileged", "a", "--plots", "radar,pie"]),
    );
    assert_eq!(run.code, 3);
    assert!(run.stderr.contains("pie") && run.stderr.contains("fairness_check_bars"), "{}", run.stderr);
}

#[test]
fn merged_check_includes_prior_models() {
    let tmp = TempDir::new().unwrap();
    balanced(tmp.path(), 0.7);
    let first = fairaudit(tmp.path(), &with_base("check", &["--score", "m=s", "--privileged", "a", "--out", "first"]));
    assert_eq!(first.code, 0, "{}", first.stderr);
    let second = fairaudit(
        tmp.path(),
        &with_base("check", &["--score", "n=s2", "--privileged", "a", "--merge", "first/audit.json"]),
    );
    assert!(second.stdout.contains("Model: m") && second.stdout.contains("Model: n"), "{}", second.stdout);
}
