//! `matx`: batch entry points over the material-transfer engine.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 backend failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use matx_core::evaluation::MetricRegion;
use matx_core::generation::GenerationParams;
use matx_core::imaging::{CropBox, InitMode};
use matx_core::Error;

#[derive(Parser)]
#[command(name = "matx", version, about = "Exemplar-based material transfer")]
struct Cli {
    /// Backend registry TOML. Without it the built-in mock backends are used.
    #[arg(long, global = true, env = "MATX_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transfer the exemplar's material onto a masked region of the input.
    Transfer(TransferArgs),
    /// Write the depth map, foreground mask and every init composite.
    Preprocess(PreprocessArgs),
    /// Execute a multi-step edit plan.
    Apply(ApplyArgs),
    /// Run a benchmark manifest and write its report.
    Eval(EvalArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

/// Generation parameters; unset flags keep their defaults.
#[derive(Args, Default, Clone)]
struct ParamFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u32>,
    #[arg(long)]
    guidance_scale: Option<f64>,
    #[arg(long)]
    material_scale: Option<f64>,
    #[arg(long)]
    geometry_scale: Option<f64>,
    /// foreground-grayscale, original-image or foreground-noise.
    #[arg(long)]
    init_mode: Option<InitMode>,
    #[arg(long)]
    working_size: Option<u32>,
    #[arg(long)]
    feather: Option<u32>,
}

impl ParamFlags {
    fn resolve(&self) -> GenerationParams {
        let d = GenerationParams::default();
        GenerationParams {
            seed: self.seed.unwrap_or(d.seed),
            steps: self.steps.unwrap_or(d.steps),
            guidance_scale: self.guidance_scale.unwrap_or(d.guidance_scale),
            material_scale: self.material_scale.unwrap_or(d.material_scale),
            geometry_scale: self.geometry_scale.unwrap_or(d.geometry_scale),
            init_mode: self.init_mode.unwrap_or(d.init_mode),
            working_size: self.working_size.unwrap_or(d.working_size),
            feather: self.feather.unwrap_or(d.feather),
        }
    }
}

#[derive(Args)]
struct PipelineFlags {
    /// Generator backend id, overriding the configured stack.
    #[arg(long)]
    generator: Option<String>,
}

#[derive(Args)]
struct TransferArgs {
    #[arg(long)]
    input: PathBuf,
    /// Region to edit (8-bit grayscale PNG).
    #[arg(long, required_unless_present = "auto_mask", conflicts_with = "auto_mask")]
    mask: Option<PathBuf>,
    /// Use the foreground backend's mask instead of --mask.
    #[arg(long)]
    auto_mask: bool,
    #[arg(long)]
    exemplar: PathBuf,
    /// Result PNG; metadata goes to `<output>.json`.
    #[arg(long)]
    output: PathBuf,
    /// Exemplar crop as `x,y,width,height`.
    #[arg(long, value_parser = parse_crop)]
    crop: Option<CropBox>,
    #[arg(long)]
    scale_hint: Option<f64>,
    #[command(flatten)]
    params: ParamFlags,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Seed for the noise composite.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ApplyArgs {
    /// Plan JSON; asset paths are relative to its directory.
    #[arg(long)]
    plan: PathBuf,
    /// Final image; per-step records go to `<output>.json`.
    #[arg(long)]
    output: PathBuf,
    /// Execute steps 0..=N only.
    #[arg(long)]
    up_to: Option<usize>,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionArg {
    FullFrame,
    Masked,
}

impl From<RegionArg> for MetricRegion {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::FullFrame => MetricRegion::FullFrame,
            RegionArg::Masked => MetricRegion::Masked,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Report JSON path.
    #[arg(long)]
    report: PathBuf,
    /// Entries evaluated in parallel; 0 picks the core count.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value = "full-frame")]
    region: RegionArg,
    /// Skip per-material and per-mesh aggregates.
    #[arg(long)]
    no_breakdowns: bool,
    #[command(flatten)]
    params: ParamFlags,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = matx_service::config::ENV_LISTEN)]
    listen: Option<std::net::SocketAddr>,
    #[arg(long, env = matx_service::config::ENV_STORAGE_ROOT)]
    storage_root: Option<PathBuf>,
    #[arg(long, env = matx_service::config::ENV_WORKERS)]
    workers: Option<usize>,
}

fn parse_crop(s: &str) -> Result<CropBox, String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, width, height] => Ok(CropBox { x, y, width, height }),
        _ => Err("expected x,y,width,height".into()),
    }
}

/// 2 for backend failures, 1 for everything else.
fn exit_code_for(kind: &str) -> u8 {
    match kind {
        "backend-unavailable" | "inference" => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure { kind, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(exit_code_for(&kind))
        }
    }
}

impl From<Error> for commands::Failure {
    fn from(e: Error) -> Self {
        commands::Failure {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}
