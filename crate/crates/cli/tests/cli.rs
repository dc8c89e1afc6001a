use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pluvia::checkpoint::Checkpoint;
use pluvia::commands::{self, EvalArgs};
use pluvia::config::RunConfig;
use pluvia_core::dataset::{synthetic_seasonal_series, GapPolicy, MonthlySeries, SeriesFormat};
use pluvia_core::training::TrainingConfig;
use pluvia_core::{CnnLstmModel, ModelConfig};
use tempfile::TempDir;

fn pluvia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pluvia")).args(args).output().expect("spawn pluvia")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn long_csv(series: &MonthlySeries) -> String {
    let mut out = String::from("year,month,precip_mm\n");
    for p in &series.points {
        out.push_str(&format!("{},{},{}\n", p.year, p.month, p.precip_mm));
    }
    out
}

fn write_series(dir: &Path, name: &str, months: usize) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, long_csv(&synthetic_seasonal_series(1970, months, 200.0, 180.0, 10.0, 5))).unwrap();
    path
}

fn tiny_model_config(window: usize) -> ModelConfig {
    ModelConfig {
        window_size: window,
        conv_filters: 4,
        kernel_size: 3,
        lstm1_units: 6,
        lstm2_units: 5,
        dense1_units: 4,
        dense2_units: 3,
        ..Default::default()
    }
}

fn tiny_run_config(dir: &Path, data: &Path) -> PathBuf {
    let config = RunConfig {
        data: pluvia::config::DataConfig {
            path: data.to_path_buf(),
            format: SeriesFormat::Long,
        },
        model: tiny_model_config(12),
        training: TrainingConfig {
            window_size: 12,
            epochs: 3,
            batch_size: 16,
            ..TrainingConfig::practical()
        },
        output_dir: dir.join("unused"),
        ..Default::default()
    };
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

/// A checkpoint whose parameters are all zero except the head bias, so the
/// model predicts the constant `scale * head_bias`.
fn constant_checkpoint(dir: &Path, window: usize, scale: f64, head_bias: f64) -> PathBuf {
    let mut model = CnnLstmModel::new(ModelConfig {
        output_scale: scale,
        ..tiny_model_config(window)
    })
    .unwrap();
    model.zero_params();
    model.head.bias.data_mut()[0] = head_bias;
    let path = dir.join("stub.json");
    Checkpoint::from_model(&model, &TrainingConfig::practical(), 0.8, GapPolicy::Contiguous)
        .save(&path)
        .unwrap();
    path
}

fn assert_error_line(o: &Output, code: i32, tag: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{tag}]: ")), "{err}");
}

#[test]
fn stats_writes_two_csvs() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "s.csv", 48);
    let out = dir.path().join("out");
    let o = pluvia(&["stats", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["monthly_boxplot_stats.csv", "yearly_trend_table.csv"]);
    let stats = fs::read_to_string(out.join("monthly_boxplot_stats.csv")).unwrap();
    assert!(stats.starts_with("month,min,q1,median,q3,max,mean,count\n"));
    assert_eq!(stats.lines().count(), 13);
    assert!(stdout(&o).contains("gaps=0"));
}

#[test]
fn stats_svg_and_wide_input() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("w.csv");
    fs::write(
        &input,
        "Year,Jan,Feb,Mar,Apr,May,Jun,Jul,Aug,Sep,Oct,Nov,Dec\n\
         2001,1,2,3,4,5,150,200,180,120,30,5,1\n\
         2002,0,1,2,6,9,170,260,210,140,25,8,2\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = pluvia(&[
        "stats", "--input", input.to_str().unwrap(), "--format", "wide", "--out", out.to_str().unwrap(), "--svg",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(out.join("monthly_boxplot.svg")).unwrap();
    assert_eq!(svg.matches("<rect x=").count(), 12);
    assert!(out.join("yearly_trend.svg").exists());
}

#[test]
fn stats_reports_cleaned_gaps() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("g.csv");
    fs::write(&input, "year,month,precip_mm\n2000,1,10\n2000,2,-99\n2000,3,30\n2000,4,-99\n2000,5,50\n").unwrap();
    let out = dir.path().join("o");
    let o = pluvia(&["stats", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("months=3 gaps=2"), "{}", stdout(&o));
    let trend = fs::read_to_string(out.join("yearly_trend_table.csv")).unwrap();
    assert_eq!(trend.lines().nth(1).unwrap(), "2000,10,,30,,50,,,,,,,");
}

#[test]
fn stats_empty_file_leaves_nothing() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty.csv");
    fs::write(&input, "").unwrap();
    let out = dir.path().join("o");
    let o = pluvia(&["stats", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_error_line(&o, 3, "data");
    assert!(!out.exists());
}

#[test]
fn stats_missing_file_names_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = pluvia(&["stats", "--input", missing.to_str().unwrap(), "--out", "x"]);
    assert_error_line(&o, 3, "data");
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn bad_arguments_are_config_errors() {
    assert_error_line(&pluvia(&["stats", "--format", "tall"]), 2, "config");
    assert_error_line(&pluvia(&["frobnicate"]), 2, "config");
}

#[test]
fn train_is_deterministic_and_loadable() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), "s.csv", 96);
    let config = tiny_run_config(dir.path(), &data);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = pluvia(&["train", "--config", config.to_str().unwrap(), "--seed", "1", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        assert!(text.starts_with("epoch,loss,lr,seconds\n"), "{text}");
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["checkpoint.json", "history.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let history = fs::read_to_string(a.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,loss,lr\n"));
    assert_eq!(history.lines().count(), 4);

    let ck = Checkpoint::load(&a.join("checkpoint.json")).unwrap();
    assert_eq!(ck.seed, 1);
    assert_eq!(ck.model.seed, 1);
    let text = fs::read_to_string(a.join("checkpoint.json")).unwrap();
    assert_eq!(ck.to_json(), text);
    ck.to_model().unwrap();

    let o = pluvia(&["train", "--config", config.to_str().unwrap(), "--seed", "2", "--out", dir.path().join("c").to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("checkpoint.json")).unwrap(), fs::read(dir.path().join("c/checkpoint.json")).unwrap());
}

#[test]
fn train_missing_data_names_path() {
    let dir = TempDir::new().unwrap();
    let config = tiny_run_config(dir.path(), &dir.path().join("absent.csv"));
    let out = dir.path().join("o");
    let o = pluvia(&["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_error_line(&o, 3, "data");
    assert!(stderr(&o).contains("absent.csv"));
    assert!(!out.exists());
}

#[test]
fn train_lists_every_config_problem() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"split": 2.0, "training": {"epochs": 0, "batch_size": 0}}"#).unwrap();
    let o = pluvia(&["train", "--config", config.to_str().unwrap()]);
    assert_error_line(&o, 2, "config");
    let err = stderr(&o);
    for needle in ["data.path", "split", "epochs", "batch_size"] {
        assert!(err.contains(needle), "{needle} missing from {err}");
    }
}

#[test]
fn train_unknown_config_key_is_config_error() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.json");
    fs::write(&config, r#"{"learning_rate": 0.1}"#).unwrap();
    assert_error_line(&pluvia(&["train", "--config", config.to_str().unwrap()]), 2, "config");
}

#[test]
fn evaluate_stub_checkpoint() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), "s.csv", 120);
    let ck = constant_checkpoint(dir.path(), 12, 400.0, 0.5);
    let out = dir.path().join("eval");
    let o = pluvia(&[
        "evaluate", "--checkpoint", ck.to_str().unwrap(), "--input", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("model rmse="));
    assert!(lines[1].starts_with("climatology rmse="));
    assert!(lines[2].starts_with("persistence rmse="));
    let field = |line: &str, key: &str| -> f64 {
        line.split(' ').find_map(|kv| kv.strip_prefix(key)).unwrap().parse().unwrap()
    };
    for line in &lines {
        let (r, m) = (field(line, "rmse="), field(line, "mse="));
        assert!((r - m.sqrt()).abs() <= 1e-12 * r.max(1.0));
    }
    let rows = fs::read_to_string(out.join("evaluation_rows.csv")).unwrap();
    assert!(rows.starts_with("year,month,actual_mm,model_mm,climatology_mm,persistence_mm\n"));
    // 120 months, 0.8 split: targets 96..120.
    assert_eq!(rows.lines().count(), 25);
    for row in rows.lines().skip(1) {
        assert_eq!(row.split(',').nth(3).unwrap(), "200");
    }
    let summary = fs::read_to_string(out.join("evaluation_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn evaluate_window_mismatch_is_config_error() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), "s.csv", 120);
    let ck = constant_checkpoint(dir.path(), 10, 400.0, 0.0);
    let config = tiny_run_config(dir.path(), &data);
    let out = dir.path().join("eval");
    let o = pluvia(&[
        "evaluate", "--checkpoint", ck.to_str().unwrap(), "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_error_line(&o, 2, "config");
    assert!(stderr(&o).contains("window size mismatch"));
    assert!(!out.exists());
}

#[test]
fn evaluate_library_matches_cli_split_precedence() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), "s.csv", 120);
    let ck = constant_checkpoint(dir.path(), 12, 400.0, 0.5);
    let report = commands::cmd_evaluate(&EvalArgs {
        checkpoint: ck,
        input: Some(data),
        format: None,
        split: Some(0.5),
        config: None,
        out: dir.path().join("e"),
    })
    .unwrap();
    assert_eq!(report.n, 60);
}

#[test]
fn forecast_row_count_and_columns() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), "s.csv", 372);
    let ck = constant_checkpoint(dir.path(), 64, 400.0, 0.25);
    let out = dir.path().join("f");
    let o = pluvia(&[
        "forecast", "--checkpoint", ck.to_str().unwrap(), "--input", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--svg",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("forecast.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "year,month,actual_mm,predicted_mm");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 308);
    // Zero weights: conv, LSTM and hidden dense outputs are all zero, so the
    // head emits its bias and the scale multiplies it.
    for row in &rows {
        assert_eq!(row.split(',').nth(3).unwrap(), "100");
    }
    assert!(out.join("forecast.svg").exists());
}

#[test]
fn forecast_short_series_fails() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), "s.csv", 64);
    let ck = constant_checkpoint(dir.path(), 64, 400.0, 0.0);
    let out = dir.path().join("f");
    let o = pluvia(&[
        "forecast", "--checkpoint", ck.to_str().unwrap(), "--input", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_error_line(&o, 3, "data");
    assert!(!out.exists());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = write_series(dir.path(), "s.csv", 80);
    let ck = dir.path().join("ck.json");
    fs::write(&ck, "{\"format_version\": 1}").unwrap();
    let o = pluvia(&["forecast", "--checkpoint", ck.to_str().unwrap(), "--input", data.to_str().unwrap(), "--out", "x"]);
    assert_error_line(&o, 2, "config");
}

#[test]
fn gradcheck_passes_and_lists_layers() {
    let o = pluvia(&["gradcheck", "--cases", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let layers: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(layers, ["conv1d", "lstm", "dense", "output_scale", "huber"]);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn gradcheck_negative_control() {
    let o = pluvia(&["gradcheck", "--cases", "3", "--corrupt-backward"]);
    assert_error_line(&o, 4, "numeric");
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let published = RunConfig::load(&root.join("published.json")).unwrap();
    assert!(published.validate().is_empty());
    let defaults = RunConfig::default();
    assert_eq!(published.model, defaults.model);
    assert_eq!(published.training, defaults.training);
    let practical = RunConfig::load(&root.join("practical.json")).unwrap();
    assert_eq!(practical.training, TrainingConfig::practical());
}
