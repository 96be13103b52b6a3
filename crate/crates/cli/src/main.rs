use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

use lrwave_cli::{catalog, compare_with_oracle, run_experiment, sweep, CliError, ExperimentConfig};

/// Low-rank Helmholtz solver experiments.
#[derive(Parser)]
#[command(name = "lrwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem and write its CSV output.
    Solve {
        #[command(flatten)]
        source: ConfigSource,
        /// Print the run report as JSON on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Time the solver over several ranks (and 3D versions).
    Sweep {
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,24")]
        ranks: Vec<usize>,
        /// 3D versions to time; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        versions: Vec<u32>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Compare the iterates with a full-grid solve.
    Oracle {
        #[command(flatten)]
        source: ConfigSource,
    },
    /// Inspect the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's TOML.
    Show { name: String },
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["config", "preset"])))]
struct ConfigSource {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a built-in preset.
    #[arg(long)]
    preset: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigSource {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                ExperimentConfig::from_toml(&text)?
            }
            (None, Some(name)) => preset(name)?.config()?,
            (None, None) => unreachable!("clap requires one source"),
        };
        if let Some(out) = &self.out {
            cfg.output.directory = out.clone();
        }
        Ok(cfg)
    }
}

fn preset(name: &str) -> Result<&'static catalog::Preset, CliError> {
    catalog::find(name).ok_or_else(|| CliError::Config {
        field: "preset".into(),
        reason: format!("unknown preset `{name}`; see `lrwave presets list`"),
    })
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { source, json } => {
            let out = run_experiment(&source.load()?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&out.report).expect("report serializes"));
            } else {
                let rep = &out.report;
                println!(
                    "{} after {} iterations, residual {:.3e}",
                    rep.stop_reason,
                    rep.residual_history.len(),
                    rep.residual_history.last().copied().unwrap_or(f64::NAN)
                );
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
            }
        }
        Command::Sweep { source, ranks, versions, repeats } => {
            let rep = sweep(&source.load()?, &ranks, &versions, repeats)?;
            println!("version  rank  iters  residual    total_s");
            for p in &rep.points {
                let total = p.phases.iter().find(|t| t.phase == "total").map_or(f64::NAN, |t| t.seconds);
                let v = p.version.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
                println!("{v:>7}  {:>4}  {:>5}  {:.3e}  {total:.4}", p.rank, p.iterations, p.final_residual);
            }
            for f in &rep.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Oracle { source } => {
            let rep = compare_with_oracle(&source.load()?)?;
            println!("iter  relative_error");
            for (i, e) in rep.errors.iter().enumerate() {
                println!("{:>4}  {e:.3e}", i + 1);
            }
            println!("svd tail sigma_(r+1)/sigma_1 = {:.3e}", rep.svd_tail);
            println!("max singular value gap = {:.3e}", rep.singular_value_gap());
            for f in &rep.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Presets { action: PresetAction::List } => {
            for p in catalog::PRESETS {
                println!("{:<14} {}", p.name, p.description);
            }
        }
        Command::Presets { action: PresetAction::Show { name } } => {
            print!("{}", preset(&name)?.toml.trim_start());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
