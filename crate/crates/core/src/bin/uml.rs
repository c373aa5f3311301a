use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uml::harness::{self, ExportOptions, RunConfig, SweepRow};
use uml::synthdata::Split;
use uml::{Result, UmlError};

#[derive(Parser)]
#[command(name = "uml", version, about = "Joint evidential classification and segmentation on synthetic disc/cup images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunFlags {
    /// TOML run configuration; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for data, initialisation and batch order.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Disable the uncertainty navigator.
    #[arg(long)]
    no_un: bool,
    /// Disable the uncertainty instructor.
    #[arg(long)]
    no_ui: bool,
    /// Mutual decoder only (both uncertainty modules off).
    #[arg(long)]
    md_only: bool,
}

impl RunFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if self.no_un {
            cfg.model.use_un = false;
        }
        if self.no_ui {
            cfg.model.use_ui = false;
        }
        if self.md_only {
            cfg.set_md_only();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and evaluate it on validation and test data.
    Train(RunFlags),
    /// Score a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Write the report as JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the test split at several noise levels.
    NoiseSweep {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Noise level; repeat for several (default 0, 0.03, 0.05).
        #[arg(long = "sigma")]
        sigmas: Vec<f64>,
        /// CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and test the four module combinations on shared data.
    Ablate(RunFlags),
    /// Write input, predicted mask and uncertainty maps as PGM images.
    ExportMaps {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
        /// Export only the first N samples.
        #[arg(long)]
        limit: Option<usize>,
        /// Also dump three random channels of the top classification features.
        #[arg(long)]
        channels: bool,
    },
    /// Export the synthetic dataset as PGM files with CSV manifests.
    GenData(RunFlags),
    /// Run the built-in invariant and oracle checks.
    Selftest,
}

fn print_sweep(rows: &[SweepRow]) {
    println!("sigma,ACC,F1,DI_disc,ASSD_disc,DI_cup,ASSD_cup,mean_Uc,mean_Us");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.4}"));
    for r in rows {
        println!(
            "{},{:.4},{:.4},{:.4},{},{:.4},{},{:.4},{:.4}",
            r.sigma,
            r.acc,
            r.f1,
            r.di_disc,
            opt(r.assd_disc),
            r.di_cup,
            opt(r.assd_cup),
            r.mean_uc,
            r.mean_us
        );
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).map_err(|e| UmlError::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(flags) => {
            let cfg = flags.resolve()?;
            let record = harness::train_with_progress(&cfg, |e| {
                eprintln!(
                    "epoch {:3}  train {:.4}  val {:.4}  val_acc {:.3}  val_dice {:.3}",
                    e.epoch, e.train_total, e.val_total, e.val_acc, e.val_mean_dice
                );
            })?;
            let rows: Vec<SweepRow> = record.reports.iter().filter(|r| r.split == "test").map(SweepRow::from).collect();
            print_sweep(&rows);
            eprintln!("checkpoint {} ({:.1}s)", record.checkpoint.display(), record.wall_clock_secs);
        }
        Command::Eval { checkpoint, split, sigma, out } => {
            let report = harness::evaluate(&checkpoint, split, sigma)?;
            match out {
                Some(path) => write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
        Command::NoiseSweep { checkpoint, sigmas, out } => {
            let sigmas = if sigmas.is_empty() { RunConfig::default().sigmas } else { sigmas };
            let rows = harness::noise_sweep(&checkpoint, &sigmas, out.as_deref())?;
            print_sweep(&rows);
        }
        Command::Ablate(flags) => {
            let cfg = flags.resolve()?;
            let (rows, _) = harness::ablate(&cfg)?;
            println!("variant,proposed,split_hash,ACC,F1,DI_disc,DI_cup,mean_Uc,mean_Us");
            for r in rows {
                println!(
                    "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
                    r.variant, r.proposed, r.split_hash, r.acc, r.f1, r.di_disc, r.di_cup, r.mean_uc, r.mean_us
                );
            }
        }
        Command::ExportMaps { checkpoint, split, sigma, out, limit, channels } => {
            let summary = harness::export_maps(&checkpoint, split, sigma, &out, &ExportOptions { limit, channel_dump: channels })?;
            println!(
                "wrote {} files for {} samples; mean uncertainty gray level {:.2}",
                summary.files.len(),
                summary.samples,
                summary.mean_uncertainty_gray
            );
        }
        Command::GenData(flags) => {
            let cfg = flags.resolve()?;
            let data = harness::gen_data(&cfg, &cfg.out_dir)?;
            println!(
                "wrote {}/{}/{} samples to {}",
                data.train.len(),
                data.val.len(),
                data.test.len(),
                cfg.out_dir.display()
            );
        }
        Command::Selftest => {
            let checks = uml::selftest::run();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(UmlError::Numerical { epoch: 0, term: format!("{failed} self-test checks"), value: f64::NAN });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
