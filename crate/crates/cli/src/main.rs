//! Command-line front end for the semantic communication lab.
//!
//! Subcommands:
//!
//! - `train`  — run a `training_run` experiment config,
//! - `sweep`  — run any experiment config,
//! - `plot`   — rebuild `plot.svg` from a finished result directory,
//! - `eval`   — clean accuracy/MSE of a checkpoint on the test set,
//! - `attack` — attack a checkpoint and print success rows as CSV.
//!
//! Exit codes: 0 success, 2 configuration problems, 3 missing or malformed
//! inputs, 4 numeric failures during training or evaluation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use semcom::attacks::{evaluate_attack, AttackDomain, AttackMode, AttackSpec};
use semcom::channel::ChannelConfig;
use semcom::data::{load_idx, Dataset};
use semcom::harness::{self, ExperimentKind};
use semcom::pipeline::{evaluate, load_checkpoint};
use semcom::{rng, Error, Result};

#[derive(Parser)]
#[command(name = "semcom", version, about = "Semantic communication lab: train, attack, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one system from an experiment config with kind = training_run.
    Train {
        /// Experiment config file (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run any experiment config: training grids, attack sweeps, or single
    /// runs.
    Sweep {
        /// Experiment config file (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Rebuild plot.svg from the results.csv of a finished run.
    Plot {
        /// Result directory containing results.csv and manifest.toml.
        #[arg(long)]
        dir: PathBuf,
    },
    /// Evaluate a checkpoint on clean test data.
    Eval {
        /// Checkpoint directory (encoder.bin, decoder.bin, classifier.bin,
        /// manifest.toml).
        #[arg(long)]
        checkpoint: PathBuf,
        /// Channel SNR in dB; defaults to the SNR the checkpoint was
        /// trained at.
        #[arg(long)]
        snr: Option<f64>,
        /// Test samples to use (0 = all).
        #[arg(long, default_value_t = 0)]
        samples: usize,
        /// Directory with the IDX data files; SEMCOM_DATA_DIR overrides.
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Attack a checkpoint and print one CSV row per evaluated point.
    Attack {
        /// Checkpoint directory of the victim system.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Perturbation family.
        #[arg(long, value_enum)]
        domain: DomainArg,
        /// nt = push away from the true class, t = push toward --target.
        #[arg(long, value_enum, default_value_t = ModeArg::Nt)]
        mode: ModeArg,
        /// Target class for mode t.
        #[arg(long)]
        target: Option<u8>,
        /// Image-domain strength (max per-pixel change).
        #[arg(long, default_value_t = 0.3)]
        eps: f64,
        /// Wireless-domain strength as perturbation-to-noise ratio in dB.
        #[arg(long, default_value_t = 0.0)]
        pnr: f64,
        /// Image-stage strength inside the multi-domain attack.
        #[arg(long, default_value_t = 0.1)]
        image_eps: f64,
        /// Sweep one axis instead of a single point, e.g.
        /// "eps=0,0.05,0.1,0.2,0.3" or "pnr=-10,-5,0,5,10".
        #[arg(long)]
        sweep: Option<String>,
        /// Craft wireless perturbations from the pre-noise signal.
        #[arg(long)]
        craft_pre_noise: bool,
        /// Channel SNR in dB; defaults to the checkpoint's training SNR.
        #[arg(long)]
        snr: Option<f64>,
        /// Test samples to attack (0 = all).
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Directory with the IDX data files; SEMCOM_DATA_DIR overrides.
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DomainArg {
    Image,
    Wireless,
    Multi,
    Jam,
}

impl DomainArg {
    fn as_str(self) -> &'static str {
        match self {
            DomainArg::Image => "image",
            DomainArg::Wireless => "wireless",
            DomainArg::Multi => "multi",
            DomainArg::Jam => "jam",
        }
    }

    fn to_domain(self) -> AttackDomain {
        match self {
            DomainArg::Image => AttackDomain::Image,
            DomainArg::Wireless => AttackDomain::Wireless,
            DomainArg::Multi => AttackDomain::MultiDomain,
            DomainArg::Jam => AttackDomain::GaussianJam,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ModeArg {
    Nt,
    T,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err);
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Parse { .. } | Error::MissingInput(_) | Error::Io(_) => 3,
        Error::Dimension { .. }
        | Error::DegenerateSignal(_)
        | Error::LabelOutOfRange { .. }
        | Error::Training(_) => 4,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { config } => {
            let cfg = harness::load_config(&config)?;
            if cfg.kind != ExperimentKind::TrainingRun {
                return Err(Error::Config(format!(
                    "train expects kind = \"training_run\", the config says {:?}; use sweep for grids",
                    cfg.kind
                )));
            }
            let summary = harness::run_experiment(&cfg)?;
            println!("trained: {} rounds logged in {}", summary.rows, summary.out_dir.display());
            Ok(())
        }
        Command::Sweep { config } => {
            let cfg = harness::load_config(&config)?;
            let summary = harness::run_experiment(&cfg)?;
            println!("{} rows written to {}", summary.rows, summary.out_dir.display());
            Ok(())
        }
        Command::Plot { dir } => {
            let path = harness::replot(&dir)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Eval { checkpoint, snr, samples, data_dir, seed } => {
            let (sys, manifest) = load_checkpoint(&checkpoint)?;
            let test = load_test_subset(&data_dir, samples)?;
            let cfg = ChannelConfig {
                snr_db: snr.unwrap_or(manifest.snr_db),
                n_uses: sys.n_uses(),
            };
            let metrics = evaluate(
                &sys,
                &test.images,
                &test.labels,
                &cfg,
                &mut rng::stream(seed, "cli-eval", 0, 0),
            )?;
            println!("snr_db,samples,accuracy,mse");
            println!("{},{},{},{}", cfg.snr_db, test.len(), metrics.accuracy, metrics.mse);
            Ok(())
        }
        Command::Attack {
            checkpoint,
            domain,
            mode,
            target,
            eps,
            pnr,
            image_eps,
            sweep,
            craft_pre_noise,
            snr,
            samples,
            data_dir,
            seed,
        } => {
            let attack_mode = match (mode, target) {
                (ModeArg::Nt, _) => AttackMode::NonTargeted,
                (ModeArg::T, Some(t)) => AttackMode::Targeted(t),
                (ModeArg::T, None) => {
                    return Err(Error::Config("--mode t requires --target".into()));
                }
            };
            let (sys, manifest) = load_checkpoint(&checkpoint)?;
            let test = load_test_subset(&data_dir, samples)?;
            let cfg = ChannelConfig {
                snr_db: snr.unwrap_or(manifest.snr_db),
                n_uses: sys.n_uses(),
            };
            let points = sweep_points(sweep.as_deref(), eps, pnr)?;
            let mode_str = match mode {
                ModeArg::Nt => "nt",
                ModeArg::T => "t",
            };
            println!("domain,mode,eps,pnr_db,success,accuracy,mse");
            for (point_eps, point_pnr) in points {
                let spec = AttackSpec {
                    domain: domain.to_domain(),
                    mode: attack_mode,
                    epsilon: point_eps,
                    pnr_db: point_pnr,
                    image_epsilon: image_eps,
                    seed,
                    craft_pre_noise,
                };
                let report = evaluate_attack(&sys, &test.images, &test.labels, &spec, &cfg)?;
                println!(
                    "{},{},{},{},{},{},{}",
                    domain.as_str(),
                    mode_str,
                    point_eps,
                    point_pnr,
                    report.success,
                    report.accuracy,
                    report.mse
                );
            }
            Ok(())
        }
    }
}

fn load_test_subset(data_dir: &Path, samples: usize) -> Result<Dataset> {
    let dir = harness::resolve_data_dir(data_dir);
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    let n = if samples == 0 { test.len() } else { samples.min(test.len()) };
    let idx: Vec<u32> = (0..n as u32).collect();
    test.subset(&idx)
}

/// Expands `--sweep axis=v1,v2,...` into (eps, pnr) evaluation points,
/// holding the other axis at its flag value.
fn sweep_points(sweep: Option<&str>, eps: f64, pnr: f64) -> Result<Vec<(f64, f64)>> {
    let Some(text) = sweep else {
        return Ok(vec![(eps, pnr)]);
    };
    let (axis, values) = text.split_once('=').ok_or_else(|| {
        Error::Config(format!("--sweep must look like axis=v1,v2,... got {:?}", text))
    })?;
    let parsed: Vec<f64> = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad sweep value {:?}", v)))
        })
        .collect::<Result<_>>()?;
    if parsed.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    match axis.trim() {
        "eps" => Ok(parsed.into_iter().map(|e| (e, pnr)).collect()),
        "pnr" => Ok(parsed.into_iter().map(|p| (eps, p)).collect()),
        other => Err(Error::Config(format!(
            "unknown sweep axis {:?}; use eps or pnr",
            other
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing_expands_one_axis() {
        assert_eq!(sweep_points(None, 0.3, 0.0).unwrap(), vec![(0.3, 0.0)]);
        assert_eq!(
            sweep_points(Some("eps=0,0.1,0.2"), 0.3, 5.0).unwrap(),
            vec![(0.0, 5.0), (0.1, 5.0), (0.2, 5.0)]
        );
        assert_eq!(
            sweep_points(Some("pnr=-10, -5"), 0.3, 0.0).unwrap(),
            vec![(0.3, -10.0), (0.3, -5.0)]
        );
        assert!(sweep_points(Some("eps"), 0.3, 0.0).is_err());
        assert!(sweep_points(Some("gain=1,2"), 0.3, 0.0).is_err());
        assert!(sweep_points(Some("eps=a,b"), 0.3, 0.0).is_err());
    }

    #[test]
    fn exit_codes_partition_the_error_space() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), 2);
        assert_eq!(exit_code_for(&Error::MissingInput("x".into())), 3);
        assert_eq!(
            exit_code_for(&Error::Io(std::io::Error::other("x"))),
            3
        );
        assert_eq!(exit_code_for(&Error::Training("x".into())), 4);
        assert_eq!(exit_code_for(&Error::DegenerateSignal("x".into())), 4);
    }
}
