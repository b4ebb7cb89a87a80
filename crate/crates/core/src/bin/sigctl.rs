use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sigctl::config::{self, ExperimentConfig};
use sigctl::envs::EnvKind;
use sigctl::experiments::{self, OutputFormat};
use sigctl::sigmpc::CostBackend;

#[derive(Parser)]
#[command(name = "sigctl", version, about = "Signature-based dynamic programming and tracking control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the signature table and value table for the 10-state example.
    Stable {
        #[command(flatten)]
        common: Common,
        /// Truncation depth used for the S-table.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Compare signature-route values with classical policy evaluation.
    BellmanCheck(Common),
    /// Choose a successor for one state by the Chen optimality step.
    ChenOpt(Common),
    /// Signature errors from coefficient noise versus dynamics misspecification.
    ErrorExplosion(Common),
    /// Run a receding-horizon tracking episode.
    Track {
        #[command(flatten)]
        common: Common,
        /// Truncation depth for the truncated cost backend.
        #[arg(long)]
        depth: Option<usize>,
        /// Constant disturbance on both spring-damper accelerations.
        #[arg(long)]
        disturbance: Option<f64>,
    },
    /// Optimize a path towards a dilated reference signature.
    SimilarPath(Common),
    /// Signature-kernel distances between growing subpaths.
    KernelProfile(Common),
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset name (see `sigctl presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Directory for the summary and artifacts; only the summary is printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn load(common: &Common, experiment: &str, default_preset: &str) -> sigctl::Result<ExperimentConfig> {
    let mut cfg = match (&common.config, &common.preset) {
        (Some(path), _) => config::load(path)?,
        (None, Some(name)) => config::preset(name)?,
        (None, None) => config::preset(default_preset)?,
    };
    if cfg.name() != experiment {
        return Err(sigctl::Error::InvalidInput(format!(
            "configuration is for `{}`, not `{experiment}`",
            cfg.name()
        )));
    }
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> sigctl::Result<ExitCode> {
    let (common, mut cfg) = match &cli.command {
        Command::Presets => {
            for name in config::preset_names() {
                // a closed pipe is not worth a panic
                let _ = writeln!(std::io::stdout(), "{name}\t{}", config::preset(name)?.name());
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Stable { common, .. } => (common, load(common, "stable", "stable")?),
        Command::BellmanCheck(c) => (c, load(c, "bellman-check", "bellman_check")?),
        Command::ChenOpt(c) => (c, load(c, "chen-opt", "chen_opt")?),
        Command::ErrorExplosion(c) => (c, load(c, "error-explosion", "error_explosion")?),
        Command::Track { common, .. } => (common, load(common, "track", "pointmass")?),
        Command::SimilarPath(c) => (c, load(c, "similar-path", "similar_path")?),
        Command::KernelProfile(c) => (c, load(c, "kernel-profile", "kernel_profile")?),
    };
    match (&cli.command, &mut cfg) {
        (Command::Stable { depth: Some(d), .. }, ExperimentConfig::Stable(s)) => s.depth = *d,
        (Command::Track { depth, disturbance, .. }, ExperimentConfig::Track(t)) => {
            if let Some(d) = depth {
                match &mut t.mpc.backend {
                    CostBackend::Truncated { depth } => *depth = *d,
                    CostBackend::Kernel(_) => {
                        return Err(sigctl::Error::InvalidInput("--depth needs the truncated backend".into()))
                    }
                }
            }
            if let Some(w) = disturbance {
                match &mut t.env {
                    EnvKind::SpringDamper(sd) => sd.disturbance = [*w, *w],
                    EnvKind::PointMass(_) => {
                        return Err(sigctl::Error::InvalidInput("--disturbance applies to the spring-damper".into()))
                    }
                }
            }
        }
        _ => {}
    }
    let report = experiments::run(&cfg, common.format.into())?;
    if let Some(dir) = &common.out {
        report.write(dir)?;
    }
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&report.summary)?);
    Ok(match report.golden_pass {
        Some(false) => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
