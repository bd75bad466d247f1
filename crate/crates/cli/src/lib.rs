//! Batch entry points: scene generation, automated flights, stain
//! evaluation, log replay and the session server.

mod fly;
mod replay;
mod scene;
mod stains;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use fly::{FlyArgs, PlannerKind};
pub use replay::ReplayArgs;
pub use scene::{HeapArgs, SceneGenArgs};
pub use stains::StainArgs;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    Json,
    #[default]
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "csa", version, about = "Blimp crime-scene simulator")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Global {
    /// Seed for anything random; 0 when omitted.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (scene) or directory (fly, stains).
    #[arg(long, short = 'o', global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    pub format: Format,
}

impl Global {
    pub fn seed_or_default(&self) -> (u64, bool) {
        match self.seed {
            Some(s) => (s, false),
            None => (0, true),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Generate scenes.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Fly planners over one or more seeds and report metrics.
    Fly(FlyArgs),
    /// Run the stain classification pipeline on a sheet.
    Stains(StainArgs),
    /// Recompute metrics from a run log.
    Replay(ReplayArgs),
    /// Start the session server.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum SceneCmd {
    /// Random scene for a crime type on a floor plan.
    Gen(SceneGenArgs),
    /// All items packed into one heap.
    Heap(HeapArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: std::net::SocketAddr,
    /// Only advance the clock on explicit tick commands.
    #[arg(long)]
    pub manual_clock: bool,
    /// Delay added before each inbound command, milliseconds.
    #[arg(long, default_value_t = 0)]
    pub latency_ms: u64,
}

/// What a command produced: text for stdout plus notes for stderr.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub notes: Vec<String>,
}

pub fn run(cli: Cli) -> CliResult<Output> {
    let g = &cli.global;
    match cli.command {
        Cmd::Scene(SceneCmd::Gen(a)) => scene::gen(g, &a),
        Cmd::Scene(SceneCmd::Heap(a)) => scene::heap(g, &a),
        Cmd::Fly(a) => fly::run(g, &a),
        Cmd::Stains(a) => stains::run(g, &a),
        Cmd::Replay(a) => replay::run(g, &a),
        Cmd::Serve(a) => serve(&a),
    }
}

fn serve(a: &ServeArgs) -> CliResult<Output> {
    let config = csa_service::ServiceConfig {
        tick_interval: if a.manual_clock { None } else { Some(std::time::Duration::from_secs_f64(csa_service::TICK_S)) },
        latency: std::time::Duration::from_millis(a.latency_ms),
        ..Default::default()
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(format!("runtime: {e}")))?;
    rt.block_on(csa_service::serve(a.addr, config)).map_err(|e| CliError::Data(e.to_string()))?;
    Ok(Output::default())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    f.write_all(bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub(crate) fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub(crate) fn to_json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Internal(e.to_string()))
}

/// Left-aligned first column, right-aligned rest.
pub(crate) fn table(rows: &[Vec<String>]) -> String {
    let Some(first) = rows.first() else { return String::new() };
    let widths: Vec<usize> =
        (0..first.len()).map(|c| rows.iter().map(|r| r.get(c).map_or(0, |s| s.chars().count())).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = " ".repeat(widths[c] - s.chars().count());
                if c == 0 { format!("{s}{pad}") } else { format!("{pad}{s}") }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
