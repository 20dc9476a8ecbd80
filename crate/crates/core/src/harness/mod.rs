//! Experiment orchestration: declarative configs in, result directories out.
//!
//! An experiment is described by a TOML file (see [`ExperimentConfig`]) and
//! executed by [`run_experiment`], which writes four artifacts into the
//! output directory:
//!
//! - `results.csv` — one row per sweep point,
//! - `manifest.toml` — seed, row count, config hash, and code version,
//! - `config.toml` — the resolved configuration that produced the results,
//! - `plot.svg` — a line chart derived purely from the CSV rows.
//!
//! Reruns with the same config and seed reproduce `results.csv` byte for
//! byte. Plots never recompute anything: [`replot`] rebuilds `plot.svg`
//! from the CSV alone.

mod plot;

pub use plot::{line_chart, Series};

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{
    evaluate_attack, targeted_aggregates, targeted_success_matrix, AttackDomain, AttackMode,
    AttackSpec,
};
use crate::data::{load_idx, Dataset};
use crate::error::{Error, Result};
use crate::pipeline::{load_checkpoint, SemanticSystem};
use crate::training::{pretrain_classifier, run_interactive, TrainingConfig};

/// Environment variable that overrides the configured data directory.
pub const DATA_DIR_ENV: &str = "SEMCOM_DATA_DIR";

const RESULTS_FILE: &str = "results.csv";
const MANIFEST_FILE: &str = "manifest.toml";
const CONFIG_FILE: &str = "config.toml";
const PLOT_FILE: &str = "plot.svg";
const CHECKPOINT_DIR: &str = "checkpoint";

/// The experiment families the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Classification accuracy over an SNR x code-length grid, with the
    /// receiver classifier retrained each round and held fixed.
    AccuracyGrid,
    /// Reconstruction MSE over the same training grid, retrained only.
    MseTable,
    /// Image-domain attack success over a perturbation-strength sweep,
    /// optionally with the per-class targeted success aggregates.
    ImageAttackSweep,
    /// Accuracy under received-signal perturbations over a PNR sweep:
    /// gradient-based, Gaussian jamming, and the combined two-stage attack.
    WirelessAttackSweep,
    /// One training run, logged per round.
    TrainingRun,
}

/// Sweep axes. Only the axes a kind uses need to be non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub snr_db: Vec<f64>,
    pub n_uses: Vec<usize>,
    pub eps: Vec<f64>,
    pub pnr_db: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            snr_db: vec![0.0, 3.0, 5.0, 8.0, 10.0],
            n_uses: vec![20, 30, 40],
            eps: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            pnr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
        }
    }
}

/// Attack-evaluation settings shared by the attack sweep kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSettings {
    /// `"non_targeted"` or `"targeted"`.
    pub mode: ConfigAttackMode,
    /// Target class for targeted mode.
    pub target: u8,
    /// Image-stage strength inside the combined two-stage attack.
    pub image_epsilon: f64,
    /// Test samples evaluated per sweep point (0 = the whole test set).
    pub eval_samples: usize,
    /// Also compute the per-class targeted success matrix and its
    /// aggregates at every image-sweep point (slower: one crafting pass per
    /// target class).
    pub targeted_matrix: bool,
    /// Craft received-signal perturbations from the pre-noise transmitted
    /// signal instead of the received one.
    pub craft_pre_noise: bool,
}

impl Default for AttackSettings {
    fn default() -> Self {
        AttackSettings {
            mode: ConfigAttackMode::NonTargeted,
            target: 0,
            image_epsilon: 0.1,
            eval_samples: 1000,
            targeted_matrix: false,
            craft_pre_noise: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigAttackMode {
    NonTargeted,
    Targeted,
}

/// A declarative experiment: what to run, where data lives, where results
/// go, and every knob the run depends on. `seed` is the master seed; it
/// overrides `training.seed` so one value pins the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Directory holding the IDX image/label files. Overridden by the
    /// `SEMCOM_DATA_DIR` environment variable when set.
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// Existing checkpoint to attack. When absent, attack sweeps train a
    /// fresh system from `training` and save it under the output directory.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub attack: AttackSettings,
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

/// What a finished run left behind.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rows: usize,
    pub out_dir: PathBuf,
}

/// Sidecar metadata for a result directory. Deliberately timestamp-free so
/// a rerun writes identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub rows: usize,
    /// SHA-256 of the resolved config as canonical TOML.
    pub config_sha256: String,
    pub version: String,
}

/// Parses an experiment config file. Syntax and schema problems are config
/// errors, not data errors.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::MissingInput(format!("{}: {}", path.display(), e)))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))
}

/// The data directory a run will actually use: the environment override
/// when set and non-empty, the configured directory otherwise.
pub fn resolve_data_dir(configured: &Path) -> PathBuf {
    resolve_data_dir_from(std::env::var_os(DATA_DIR_ENV), configured)
}

fn resolve_data_dir_from(env: Option<OsString>, configured: &Path) -> PathBuf {
    match env {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

impl ExperimentConfig {
    /// Checks everything that can fail before any data is loaded or
    /// training begins.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::AccuracyGrid | ExperimentKind::MseTable => {
                if self.grid.snr_db.is_empty() || self.grid.n_uses.is_empty() {
                    return Err(Error::Config(
                        "training grids need at least one snr_db and one n_uses value".into(),
                    ));
                }
            }
            ExperimentKind::ImageAttackSweep => {
                if self.grid.eps.is_empty() {
                    return Err(Error::Config("eps grid is empty".into()));
                }
            }
            ExperimentKind::WirelessAttackSweep => {
                if self.grid.pnr_db.is_empty() {
                    return Err(Error::Config("pnr_db grid is empty".into()));
                }
            }
            ExperimentKind::TrainingRun => {}
        }
        if let ConfigAttackMode::Targeted = self.attack.mode {
            if usize::from(self.attack.target) >= self.training.arch.num_classes {
                return Err(Error::Config(format!(
                    "attack target {} out of range for {} classes",
                    self.attack.target, self.training.arch.num_classes
                )));
            }
        }
        if let Some(dir) = &self.checkpoint {
            if !dir.join("manifest.toml").is_file() {
                return Err(Error::MissingInput(format!(
                    "checkpoint {} does not exist or has no manifest",
                    dir.display()
                )));
            }
        }
        // The per-point training settings must be coherent even for attack
        // sweeps, which may fall back to training a victim.
        let mut tc = self.training.clone();
        tc.seed = self.seed;
        tc.validate()
    }

    fn attack_mode(&self) -> AttackMode {
        match self.attack.mode {
            ConfigAttackMode::NonTargeted => AttackMode::NonTargeted,
            ConfigAttackMode::Targeted => AttackMode::Targeted(self.attack.target),
        }
    }

    fn base_attack_spec(&self, domain: AttackDomain) -> AttackSpec {
        AttackSpec {
            domain,
            mode: self.attack_mode(),
            epsilon: 0.0,
            pnr_db: 0.0,
            image_epsilon: self.attack.image_epsilon,
            seed: self.seed,
            craft_pre_noise: self.attack.craft_pre_noise,
        }
    }
}

fn load_train(dir: &Path) -> Result<Dataset> {
    load_idx(&dir.join("train-images-idx3-ubyte"), &dir.join("train-labels-idx1-ubyte"))
}

fn load_test(dir: &Path) -> Result<Dataset> {
    load_idx(&dir.join("t10k-images-idx3-ubyte"), &dir.join("t10k-labels-idx1-ubyte"))
}

/// Runs the configured experiment and writes all artifacts into
/// `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let data_dir = resolve_data_dir(&cfg.data_dir);
    fs::create_dir_all(&cfg.out_dir)?;

    let mut training = cfg.training.clone();
    training.seed = cfg.seed;

    let (header, rows) = match cfg.kind {
        ExperimentKind::AccuracyGrid => {
            let train = load_train(&data_dir)?;
            let test = load_test(&data_dir)?;
            run_training_grid(cfg, &training, &train, &test, true)?
        }
        ExperimentKind::MseTable => {
            let train = load_train(&data_dir)?;
            let test = load_test(&data_dir)?;
            run_training_grid(cfg, &training, &train, &test, false)?
        }
        ExperimentKind::ImageAttackSweep => {
            let test = load_test(&data_dir)?;
            let sys = obtain_system(cfg, &training, &data_dir)?;
            run_image_sweep(cfg, &training, &sys, &test)?
        }
        ExperimentKind::WirelessAttackSweep => {
            let test = load_test(&data_dir)?;
            let sys = obtain_system(cfg, &training, &data_dir)?;
            run_wireless_sweep(cfg, &training, &sys, &test)?
        }
        ExperimentKind::TrainingRun => {
            let train = load_train(&data_dir)?;
            let test = load_test(&data_dir)?;
            let outcome = run_interactive(
                &train,
                &test,
                &training,
                None,
                Some(&cfg.out_dir.join(CHECKPOINT_DIR)),
            )?;
            let rows = outcome
                .log
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.round.to_string(),
                        r.train_loss.to_string(),
                        r.clean_cce.to_string(),
                        r.test_mse.to_string(),
                        r.test_accuracy.to_string(),
                    ]
                })
                .collect();
            (vec!["round", "train_loss", "clean_cce", "test_mse", "test_accuracy"], rows)
        }
    };

    let csv_path = cfg.out_dir.join(RESULTS_FILE);
    write_csv(&csv_path, &header, &rows)?;

    let config_text = toml::to_string_pretty(cfg)
        .map_err(|e| Error::Config(format!("cannot serialize config: {}", e)))?;
    fs::write(cfg.out_dir.join(CONFIG_FILE), &config_text)?;

    let manifest = RunManifest {
        kind: cfg.kind,
        seed: cfg.seed,
        rows: rows.len(),
        config_sha256: Sha256::digest(config_text.as_bytes())
            .iter()
            .map(|b| format!("{:02x}", b))
            .collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let manifest_text = toml::to_string(&manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {}", e)))?;
    fs::write(cfg.out_dir.join(MANIFEST_FILE), manifest_text)?;

    let header_owned: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let svg = plot_from_rows(cfg.kind, &header_owned, &rows, &csv_path)?;
    fs::write(cfg.out_dir.join(PLOT_FILE), svg)?;

    Ok(RunSummary { rows: rows.len(), out_dir: cfg.out_dir.clone() })
}

/// Accuracy/MSE over the snr x n_uses training grid. With `both_modes` the
/// grid doubles over {retrained, fixed}; otherwise only the retrained
/// system is trained. The task classifier is pretrained once and shared by
/// every grid point, so differences between points come from the channel
/// and the autoencoder alone.
fn run_training_grid(
    cfg: &ExperimentConfig,
    training: &TrainingConfig,
    train: &Dataset,
    test: &Dataset,
    both_modes: bool,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>)> {
    let (classifier, threshold) = pretrain_classifier(train, training)?;
    let modes: &[bool] = if both_modes { &[true, false] } else { &[true] };
    let mut rows = Vec::new();
    for &snr_db in &cfg.grid.snr_db {
        for &n_uses in &cfg.grid.n_uses {
            for &retrain in modes {
                let mut tc = training.clone();
                tc.snr_db = snr_db;
                tc.n_uses = n_uses;
                tc.retrain_classifier = retrain;
                let outcome =
                    run_interactive(train, test, &tc, Some((classifier.clone(), threshold)), None)?;
                let last = outcome.log.rows.last().ok_or_else(|| {
                    Error::Training("training produced no rounds".into())
                })?;
                let mode = if retrain { "retrained" } else { "fixed" };
                rows.push(vec![
                    snr_db.to_string(),
                    n_uses.to_string(),
                    mode.to_string(),
                    last.test_accuracy.to_string(),
                    last.test_mse.to_string(),
                ]);
                log::info!(
                    "grid point snr={} n_uses={} {}: accuracy {:.4}, mse {:.5}",
                    snr_db,
                    n_uses,
                    mode,
                    last.test_accuracy,
                    last.test_mse
                );
            }
        }
    }
    Ok((vec!["snr_db", "n_uses", "classifier", "accuracy", "mse"], rows))
}

/// Loads the configured checkpoint, or trains and saves a fresh victim
/// under the output directory.
fn obtain_system(
    cfg: &ExperimentConfig,
    training: &TrainingConfig,
    data_dir: &Path,
) -> Result<SemanticSystem> {
    if let Some(dir) = &cfg.checkpoint {
        let (sys, manifest) = load_checkpoint(dir)?;
        log::info!(
            "loaded checkpoint from {} (n_uses {}, trained at {} dB)",
            dir.display(),
            manifest.n_uses,
            manifest.snr_db
        );
        return Ok(sys);
    }
    let train = load_train(data_dir)?;
    let test = load_test(data_dir)?;
    let ckpt = cfg.out_dir.join(CHECKPOINT_DIR);
    log::info!("no checkpoint configured; training a victim into {}", ckpt.display());
    let outcome = run_interactive(&train, &test, training, None, Some(&ckpt))?;
    Ok(outcome.system)
}

/// The evaluation subset: the first `eval_samples` test images, or the
/// whole test set when 0 or oversized.
fn eval_subset(test: &Dataset, eval_samples: usize) -> Result<Dataset> {
    let n = if eval_samples == 0 { test.len() } else { eval_samples.min(test.len()) };
    let idx: Vec<u32> = (0..n as u32).collect();
    test.subset(&idx)
}

fn run_image_sweep(
    cfg: &ExperimentConfig,
    training: &TrainingConfig,
    sys: &SemanticSystem,
    test: &Dataset,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>)> {
    let subset = eval_subset(test, cfg.attack.eval_samples)?;
    let channel = training.channel();
    let mut rows = Vec::new();
    for &eps in &cfg.grid.eps {
        let spec = AttackSpec { epsilon: eps, ..cfg.base_attack_spec(AttackDomain::Image) };
        let report = evaluate_attack(sys, &subset.images, &subset.labels, &spec, &channel)?;
        let (avg_non_target, avg_target) = if cfg.attack.targeted_matrix {
            let matrix =
                targeted_success_matrix(sys, &subset.images, &subset.labels, &spec, &channel)?;
            let agg = targeted_aggregates(&matrix)?;
            (agg.avg_over_non_target.to_string(), agg.avg_over_target.to_string())
        } else {
            (String::new(), String::new())
        };
        log::info!(
            "image attack eps={}: success {:.4}, accuracy {:.4}",
            eps,
            report.success,
            report.accuracy
        );
        rows.push(vec![
            eps.to_string(),
            report.success.to_string(),
            report.accuracy.to_string(),
            report.clean_accuracy.to_string(),
            report.mse.to_string(),
            avg_non_target,
            avg_target,
        ]);
    }
    Ok((
        vec![
            "eps",
            "success",
            "accuracy",
            "clean_accuracy",
            "mse",
            "avg_over_non_target",
            "avg_over_target",
        ],
        rows,
    ))
}

fn run_wireless_sweep(
    cfg: &ExperimentConfig,
    training: &TrainingConfig,
    sys: &SemanticSystem,
    test: &Dataset,
) -> Result<(Vec<&'static str>, Vec<Vec<String>>)> {
    let subset = eval_subset(test, cfg.attack.eval_samples)?;
    let channel = training.channel();
    let domains = [
        (AttackDomain::Wireless, "wireless"),
        (AttackDomain::GaussianJam, "gaussian_jam"),
        (AttackDomain::MultiDomain, "multi_domain"),
    ];
    let mut rows = Vec::new();
    for &pnr_db in &cfg.grid.pnr_db {
        for (domain, name) in domains {
            let spec = AttackSpec { pnr_db, ..cfg.base_attack_spec(domain) };
            let report = evaluate_attack(sys, &subset.images, &subset.labels, &spec, &channel)?;
            log::info!(
                "{} at pnr={} dB: success {:.4}, accuracy {:.4}",
                name,
                pnr_db,
                report.success,
                report.accuracy
            );
            rows.push(vec![
                pnr_db.to_string(),
                name.to_string(),
                report.success.to_string(),
                report.accuracy.to_string(),
                report.clean_accuracy.to_string(),
                report.mse.to_string(),
                report.fallbacks.to_string(),
            ]);
        }
    }
    Ok((
        vec!["pnr_db", "domain", "success", "accuracy", "clean_accuracy", "mse", "fallbacks"],
        rows,
    ))
}

fn write_csv(path: &Path, header: &[&'static str], rows: &[Vec<String>]) -> Result<()> {
    let mut wtr =
        csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    wtr.write_record(header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for row in rows {
        wtr.write_record(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    wtr.flush()?;
    Ok(())
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::parse(path.to_path_buf(), e.to_string()))?;
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(path.to_path_buf(), e.to_string()))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::parse(path.to_path_buf(), e.to_string()))?;
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    Ok((header, rows))
}

/// Rebuilds `plot.svg` in a finished result directory from its CSV and
/// manifest, without rerunning anything. Returns the plot path.
pub fn replot(dir: &Path) -> Result<PathBuf> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| Error::MissingInput(format!("{}: {}", manifest_path.display(), e)))?;
    let manifest: RunManifest = toml::from_str(&text)
        .map_err(|e| Error::parse(manifest_path.clone(), e.to_string()))?;
    let csv_path = dir.join(RESULTS_FILE);
    let (header, rows) = read_csv(&csv_path)?;
    let svg = plot_from_rows(manifest.kind, &header, &rows, &csv_path)?;
    let out = dir.join(PLOT_FILE);
    fs::write(&out, svg)?;
    Ok(out)
}

fn col(header: &[String], name: &str, source: &Path) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| {
        Error::parse(source.to_path_buf(), format!("missing column {:?}", name))
    })
}

fn cell_f64(row: &[String], idx: usize, source: &Path) -> Result<f64> {
    let cell = row.get(idx).ok_or_else(|| {
        Error::parse(source.to_path_buf(), format!("row too short for column {}", idx))
    })?;
    cell.parse::<f64>().map_err(|_| {
        Error::parse(source.to_path_buf(), format!("not a number: {:?}", cell))
    })
}

/// Groups rows into named series by key columns, preserving first-seen
/// order.
fn grouped_series(
    header: &[String],
    rows: &[Vec<String>],
    key_cols: &[&str],
    x_col: &str,
    y_col: &str,
    source: &Path,
) -> Result<Vec<Series>> {
    let key_idx: Vec<usize> =
        key_cols.iter().map(|k| col(header, k, source)).collect::<Result<_>>()?;
    let xi = col(header, x_col, source)?;
    let yi = col(header, y_col, source)?;
    let mut series: Vec<Series> = Vec::new();
    for row in rows {
        let name = key_idx
            .iter()
            .zip(key_cols)
            .map(|(&i, k)| format!("{}={}", k, row.get(i).map(String::as_str).unwrap_or("")))
            .collect::<Vec<_>>()
            .join(" ");
        let point = (cell_f64(row, xi, source)?, cell_f64(row, yi, source)?);
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push(point),
            None => series.push(Series { name, points: vec![point] }),
        }
    }
    Ok(series)
}

/// One ungrouped series per y column, skipping rows whose cell is blank
/// (optional columns).
fn column_series(
    header: &[String],
    rows: &[Vec<String>],
    x_col: &str,
    y_cols: &[&str],
    source: &Path,
) -> Result<Vec<Series>> {
    let xi = col(header, x_col, source)?;
    let mut out = Vec::new();
    for y_col in y_cols {
        let yi = col(header, y_col, source)?;
        let mut points = Vec::new();
        for row in rows {
            let cell = row.get(yi).map(String::as_str).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            points.push((cell_f64(row, xi, source)?, cell_f64(row, yi, source)?));
        }
        if !points.is_empty() {
            out.push(Series { name: y_col.to_string(), points });
        }
    }
    Ok(out)
}

/// Builds the kind-appropriate chart from CSV-shaped rows.
pub fn plot_from_rows(
    kind: ExperimentKind,
    header: &[String],
    rows: &[Vec<String>],
    source: &Path,
) -> Result<String> {
    match kind {
        ExperimentKind::AccuracyGrid => {
            let series =
                grouped_series(header, rows, &["n_uses", "classifier"], "snr_db", "accuracy", source)?;
            line_chart("Classification accuracy vs channel SNR", "snr_db", "accuracy", &series)
        }
        ExperimentKind::MseTable => {
            let series = grouped_series(header, rows, &["n_uses"], "snr_db", "mse", source)?;
            line_chart("Reconstruction MSE vs channel SNR", "snr_db", "mse", &series)
        }
        ExperimentKind::ImageAttackSweep => {
            let series = column_series(
                header,
                rows,
                "eps",
                &["success", "avg_over_non_target", "avg_over_target"],
                source,
            )?;
            line_chart(
                "Attack success vs image perturbation strength",
                "eps",
                "success rate",
                &series,
            )
        }
        ExperimentKind::WirelessAttackSweep => {
            let series = grouped_series(header, rows, &["domain"], "pnr_db", "accuracy", source)?;
            line_chart(
                "Accuracy under received-signal perturbations",
                "pnr_db",
                "accuracy",
                &series,
            )
        }
        ExperimentKind::TrainingRun => {
            let series =
                column_series(header, rows, "round", &["test_accuracy", "test_mse"], source)?;
            line_chart("Training progress by round", "round", "value", &series)
        }
    }
}
