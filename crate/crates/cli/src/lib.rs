//! Experiment runner: TOML config in, CSV + JSON + manifest out.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 numerical
//! guard trip (CFL, blow-up, singular tangent, non-convergence).

pub mod commands;
pub mod config;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub use config::ExperimentConfig;

pub const TOOL: &str = "transportlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("numerical guard: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<transportlab::flow::FlowError> for CliError {
    fn from(e: transportlab::flow::FlowError) -> Self {
        use transportlab::flow::FlowError::*;
        match e {
            Singular { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<transportlab::lyapunov::LyapunovError> for CliError {
    fn from(e: transportlab::lyapunov::LyapunovError) -> Self {
        use transportlab::lyapunov::LyapunovError::*;
        match e {
            Flow(f) => f.into(),
            NoConvergence { .. } => CliError::Numerical(e.to_string()),
            Precondition(_) => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<transportlab::mixing::MixingError> for CliError {
    fn from(e: transportlab::mixing::MixingError) -> Self {
        use transportlab::mixing::MixingError::*;
        match e {
            Flow(f) => f.into(),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<transportlab::spectral::SpectralError> for CliError {
    fn from(e: transportlab::spectral::SpectralError) -> Self {
        use transportlab::spectral::SpectralError::*;
        match e {
            Cfl { .. } | BlowUp(_) | SeriesDivergence(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<transportlab::fields::FieldError> for CliError {
    fn from(e: transportlab::fields::FieldError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<transportlab::conditions::ConditionError> for CliError {
    fn from(e: transportlab::conditions::ConditionError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "transportlab", version, about = "Stochastic transport laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; never changes numerical output.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Divergence, self-advection and covariance identities.
    FieldsCheck,
    /// Span, ellipticity and bracket conditions at sampled points.
    Conditions,
    /// Top Lyapunov exponent.
    Lyapunov,
    /// Moment Lyapunov function on the p-grid.
    MomentLyapunov,
    /// Two-point moments `E[d(x_t, y_t)^{-p}]`.
    TwoPoint,
    /// Correlation decay of a mean-zero observable.
    Correlation,
    /// Lagrangian mixing pairings and negative Sobolev norms.
    Mixing,
    /// One Eulerian run with energy balance.
    Spde,
    /// Enhanced-dissipation amplitude sweep.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FieldsCheck => "fields-check",
            Command::Conditions => "conditions",
            Command::Lyapunov => "lyapunov",
            Command::MomentLyapunov => "moment-lyapunov",
            Command::TwoPoint => "two-point",
            Command::Correlation => "correlation",
            Command::Mixing => "mixing",
            Command::Spde => "spde",
            Command::Sweep => "sweep",
        }
    }

    pub const ALL: [Command; 9] = [
        Command::FieldsCheck,
        Command::Conditions,
        Command::Lyapunov,
        Command::MomentLyapunov,
        Command::TwoPoint,
        Command::Correlation,
        Command::Mixing,
        Command::Spde,
        Command::Sweep,
    ];
}

#[derive(Serialize)]
struct ManifestBody<'a> {
    tool: &'a str,
    version: &'a str,
    subcommand: &'a str,
    config: &'a ExperimentConfig,
}

/// Hash of tool, version, subcommand and resolved config. The output
/// directory and worker count are excluded so they cannot change artifacts.
pub fn manifest_hash(cmd: Command, cfg: &ExperimentConfig) -> String {
    let mut echo = cfg.clone();
    echo.output = None;
    let body = ManifestBody {
        tool: TOOL,
        version: VERSION,
        subcommand: cmd.name(),
        config: &echo,
    };
    let bytes = serde_json::to_vec(&body).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    manifest_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Where a run writes, and the hash stamped on every file.
pub struct Artifacts {
    pub dir: PathBuf,
    pub hash: String,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: PathBuf, hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(&dir)?;
        Ok(Artifacts {
            dir,
            hash,
            written: Vec::new(),
        })
    }

    /// CSV with a `# manifest <hash>` line, a header row, then `rows`.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = std::io::BufWriter::new(fs::File::create(&path)?);
        writeln!(w, "# manifest {}", self.hash)?;
        writeln!(w, "{}", header.join(","))?;
        for r in rows {
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// JSON object whose first key is `manifest_hash`.
    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let stamped = Stamped {
            manifest_hash: &self.hash,
            body,
        };
        let mut text = serde_json::to_string_pretty(&stamped).expect("summary serializes");
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    subcommand: &'a str,
    config: &'a ExperimentConfig,
    output: &'a Path,
}

/// Outcome of one subcommand: artifacts written plus one line per check.
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

/// Run `cmd` on a validated config, writing into `out`.
pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &Path, workers: Option<usize>) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let hash = manifest_hash(cmd, cfg);
    let mut art = Artifacts::new(out.to_path_buf(), hash)?;
    let mut echo = cfg.clone();
    echo.output = None;
    art.json(
        &format!("{}.manifest.json", cmd.name()),
        &Manifest {
            tool: TOOL,
            version: VERSION,
            subcommand: cmd.name(),
            config: &echo,
            output: out,
        },
    )?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Config("`--workers` must be ≥ 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    let lines = pool.install(|| commands::dispatch(cmd, cfg, &mut art))?;
    Ok(RunReport {
        files: art.written,
        lines,
    })
}

/// Entry point shared by the binary: parse, load, run. Returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = (|| {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("`--config` is required".into()))?;
        let cfg = ExperimentConfig::load(path)?;
        let out = cli
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        run(cli.command, &cfg, &out, cli.workers)
    })();
    match result {
        Ok(report) => {
            for l in &report.lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
