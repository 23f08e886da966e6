//! Batch front-end: pseudo-label generation, evaluation, kernel checks and
//! small dataset utilities.
//!
//! Every command reads an optional TOML config (`--config`), applies flag
//! overrides on top and echoes the effective config at the head of its
//! summary. Exit codes: 0 success, 1 usage, 2 data error, 3 invariant
//! violation.

mod eval;
mod label;
mod tools;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pseudo3d::config::ConfigError;
use pseudo3d::dataio::DataError;
use pseudo3d::kernels::StdKind;
use pseudo3d::PipelineConfig;
use thiserror::Error;

pub use eval::{run_eval, EvalReport, EvalRow};
pub use label::{run_pseudolabel, LabelSummary};
pub use tools::{run_filter, run_gradcheck, run_normalize, run_stats, FilterReport, NormalizeSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "pseudo3d", version, about = "Pseudo 3D labels, KITTI evaluation and kernel checks")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lift 2D detections to 3D boxes in the virtual camera, one KITTI label
    /// file per image.
    Pseudolabel(PseudolabelArgs),
    /// KITTI AP|R40 per metric and difficulty.
    Eval(EvalArgs),
    /// Finite-difference check of every differentiable kernel.
    Gradcheck(GradcheckArgs),
    /// Height histogram of one class as a plot-ready column file.
    Stats(StatsArgs),
    /// Median plus k standard deviations rejection of a loss list.
    Filter(FilterArgs),
    /// Convert a label directory into (or back out of) the virtual camera.
    Normalize(NormalizeArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct VirtualCameraArgs {
    /// Virtual focal length in pixels.
    #[arg(long, value_name = "PX")]
    pub virtual_focal: Option<f64>,
    /// Virtual image width in pixels.
    #[arg(long, value_name = "PX")]
    pub virtual_width: Option<u32>,
    /// Virtual image height in pixels.
    #[arg(long, value_name = "PX")]
    pub virtual_height: Option<u32>,
    /// Projection matrix to read from calibration files, e.g. P2.
    #[arg(long, value_name = "NAME")]
    pub camera: Option<String>,
}

impl VirtualCameraArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(f) = self.virtual_focal {
            cfg.virtual_camera.focal = f;
        }
        if let Some(w) = self.virtual_width {
            cfg.virtual_camera.width = w;
        }
        if let Some(h) = self.virtual_height {
            cfg.virtual_camera.height = h;
        }
        if let Some(c) = &self.camera {
            cfg.camera = c.clone();
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PseudolabelArgs {
    /// Detection file (JSON Lines) or a directory of `*.jsonl` files.
    #[arg(long, value_name = "PATH")]
    pub detections: PathBuf,
    /// Directory of `<image>.depth` rasters.
    #[arg(long, value_name = "DIR")]
    pub depth: PathBuf,
    /// Directory of `<image>.txt` KITTI calibration files.
    #[arg(long, value_name = "DIR")]
    pub calib: PathBuf,
    /// Output directory for `<image>.txt` label files.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// Drop detections scoring below this.
    #[arg(long, value_name = "S")]
    pub score_threshold: Option<f64>,
    /// Side of the median window used for depth lookup (odd).
    #[arg(long, value_name = "PX")]
    pub depth_window: Option<u32>,
    /// Also write the summary as JSON.
    #[arg(long, value_name = "FILE")]
    pub summary: Option<PathBuf>,
    #[command(flatten)]
    pub camera: VirtualCameraArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Directory of predicted label files (16 fields, with score).
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    /// Directory of ground-truth label files.
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    #[arg(long, default_value = "Car")]
    pub class: String,
    /// 3d, bev, bbox or all.
    #[arg(long, default_value = "all")]
    pub metric: String,
    /// IoU threshold; defaults to 0.7 for Car and 0.5 otherwise.
    #[arg(long)]
    pub iou: Option<f64>,
    /// Also write the results as JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random points per kernel.
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Write the per-kernel results as JSON.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Scale one kernel's analytic gradient by 1.01.
    #[arg(long, hide = true, value_name = "KERNEL")]
    pub inject_fault: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Directory of label files.
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    #[arg(long, default_value = "Pedestrian")]
    pub class: String,
    /// Histogram bin width in metres.
    #[arg(long, default_value_t = 0.05)]
    pub bin_width: f64,
    /// Column file of `bin_center count`; printed after the summary when
    /// absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    /// One loss per line; blank lines and `#` comments are skipped.
    #[arg(long, value_name = "FILE")]
    pub losses: PathBuf,
    /// Standard deviations above the median to keep.
    #[arg(long)]
    pub k: Option<f64>,
    /// population or sample.
    #[arg(long, value_name = "KIND")]
    pub std: Option<String>,
    /// Write the kept/dropped listing here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NormalizeArgs {
    /// Directory of label files.
    #[arg(long, value_name = "DIR")]
    pub labels: PathBuf,
    /// Directory of `<image>.txt` calibration files.
    #[arg(long, value_name = "DIR")]
    pub calib: PathBuf,
    /// Output directory for the converted label files.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Convert virtual-camera labels back to the physical camera.
    #[arg(long)]
    pub inverse: bool,
    /// Image size `WxH` for calibration files without an `image_size` line.
    #[arg(long, value_name = "WxH", value_parser = parse_size)]
    pub image_size: Option<(u32, u32)>,
    #[command(flatten)]
    pub camera: VirtualCameraArgs,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(w)?, parse(h)?))
}

pub(crate) fn parse_std_kind(s: &str) -> Result<StdKind, CliError> {
    match s {
        "population" => Ok(StdKind::Population),
        "sample" => Ok(StdKind::Sample),
        other => Err(CliError::Usage(format!(
            "unknown std kind {other:?} (expected population or sample)"
        ))),
    }
}

/// Effective config as `#`-prefixed TOML lines.
pub fn config_echo(cfg: &PipelineConfig) -> String {
    let mut s = String::from("# effective config\n");
    for line in cfg.to_toml().lines() {
        if line.is_empty() {
            s.push_str("#\n");
        } else {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
    }
    s
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    write_file(path, &s)
}

/// Sorted `*.txt` files of `dir` as `(stem, path)`.
pub(crate) fn label_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    files_with_extension(dir, "txt")
}

pub(crate) fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_string(), path.clone()));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Writes every file or none: files created before a failure are removed.
pub(crate) fn write_outputs(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    let created_dir = !dir.exists();
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (id, text) in files {
        let path = dir.join(format!("{id}.txt"));
        if let Err(e) = std::fs::write(&path, text) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            if created_dir {
                let _ = std::fs::remove_dir(dir);
            }
            return Err(io_error(&path, e));
        }
        written.push(path);
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CliError> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

/// Validates the config after flag overrides.
pub(crate) fn finish_config(cfg: PipelineConfig) -> Result<PipelineConfig, CliError> {
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command, writing its summary to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(cli.config.as_deref())?;
    let text = match cli.command {
        Command::Pseudolabel(a) => run_pseudolabel(&a, cfg)?.render(),
        Command::Eval(a) => run_eval(&a, cfg)?.render(),
        Command::Gradcheck(a) => {
            let (text, report) = run_gradcheck(&a, cfg)?;
            write_out(out, &text)?;
            if !report.passed {
                return Err(CliError::Invariant("gradient check failed".into()));
            }
            return Ok(());
        }
        Command::Stats(a) => run_stats(&a, cfg)?,
        Command::Filter(a) => run_filter(&a, cfg)?.render(a.out.is_none()),
        Command::Normalize(a) => run_normalize(&a, cfg)?.render(),
    };
    write_out(out, &text)
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("stdout: {e}")))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Usage(e.to_string()))?;
    execute(cli, out)
}
