use std::path::{Path, PathBuf};

use matx_core::evaluation::{run_benchmark, BenchmarkOptions, DatasetManifest};
use matx_core::generation::{EditRecord, GenerationParams, MaterialExemplar, Pipeline};
use matx_core::imaging::io::{load_mask, load_raster, save_depth, save_mask, save_raster, sidecar_path};
use matx_core::imaging::{compose_init_image, CropBox, InitMode};
use matx_core::perception::{estimate_depth, extract_foreground, BackendRegistry, RegistryConfig};
use matx_core::session::{ExemplarHints, HistoryEntry, SessionState};
use matx_core::store::{AssetKind, AssetStore};
use matx_core::Error;
use serde::{Deserialize, Serialize};

use crate::{ApplyArgs, Cli, Command, EvalArgs, PipelineFlags, PreprocessArgs, ServeArgs, TransferArgs};

/// Error kind (as reported by `Error::kind`) plus message.
pub struct Failure {
    pub kind: String,
    pub message: String,
}

type Outcome = Result<(), Failure>;

/// Prefixes an error with the file it concerns.
fn at(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure {
        kind: e.kind().to_string(),
        message: format!("{}: {e}", path.display()),
    }
}

pub fn run(cli: Cli) -> Outcome {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Transfer(a) => transfer(config, a),
        Command::Preprocess(a) => preprocess(config, a),
        Command::Apply(a) => apply(config, a),
        Command::Eval(a) => eval(config, a),
        Command::Serve(a) => serve(config, a),
    }
}

fn build_pipeline(config: Option<&Path>, flags: &PipelineFlags) -> Result<Pipeline, Failure> {
    let cfg = RegistryConfig::from_process_env(config)?;
    let registry = BackendRegistry::from_config(&cfg)?;
    let pipeline = Pipeline::new(registry, cfg.stack);
    Ok(match &flags.generator {
        Some(id) => pipeline.with_generator(id),
        None => pipeline,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text + "\n").map_err(|e| at(path)(e.into()))
}

#[derive(Serialize)]
struct TransferSidecar<'a> {
    input: &'a Path,
    exemplar: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<&'a Path>,
    auto_mask: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    crop: Option<CropBox>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale_hint: Option<f64>,
    #[serde(flatten)]
    record: EditRecord,
}

fn transfer(config: Option<&Path>, a: TransferArgs) -> Outcome {
    let params = a.params.resolve();
    params.validate()?;
    let pipeline = build_pipeline(config, &a.pipeline)?;
    let input = load_raster(&a.input).map_err(at(&a.input))?;
    let mut exemplar = MaterialExemplar::new(load_raster(&a.exemplar).map_err(at(&a.exemplar))?);
    exemplar.crop = a.crop;
    exemplar.scale_hint = a.scale_hint;
    let mask = match &a.mask {
        Some(path) => load_mask(path).map_err(at(path))?,
        None => extract_foreground(pipeline.registry(), &pipeline.stack().foreground, &input)?.mask,
    };
    let result = pipeline.transfer_material(&input, &mask, &exemplar, &params)?;
    save_raster(&result.image, &a.output).map_err(at(&a.output))?;
    write_json(
        &sidecar_path(&a.output),
        &TransferSidecar {
            input: &a.input,
            exemplar: &a.exemplar,
            mask: a.mask.as_deref(),
            auto_mask: a.auto_mask,
            crop: a.crop,
            scale_hint: a.scale_hint,
            record: result.record(),
        },
    )?;
    println!("{}", a.output.display());
    Ok(())
}

/// Composite file name for one init mode.
pub fn composite_name(mode: InitMode) -> String {
    format!("init-{mode}.png")
}

fn preprocess(config: Option<&Path>, a: PreprocessArgs) -> Outcome {
    let pipeline = build_pipeline(config, &PipelineFlags { generator: None })?;
    let input = load_raster(&a.input).map_err(at(&a.input))?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| at(&a.out_dir)(e.into()))?;
    let stack = pipeline.stack();

    let depth = estimate_depth(pipeline.registry(), &stack.depth, &input)?;
    let depth_path = a.out_dir.join("depth.png");
    save_depth(&depth, &depth_path, Some(&stack.depth)).map_err(at(&depth_path))?;
    let mut written = vec![depth_path];

    let mask = extract_foreground(pipeline.registry(), &stack.foreground, &input)?.mask;
    let mask_path = a.out_dir.join("mask.png");
    save_mask(&mask, &mask_path).map_err(at(&mask_path))?;
    written.push(mask_path);

    for mode in InitMode::ALL {
        let path = a.out_dir.join(composite_name(mode));
        save_raster(&compose_init_image(&input, &mask, mode, a.seed)?, &path).map_err(at(&path))?;
        written.push(path);
    }
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

/// Plan file: paths are relative to the plan's directory.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    base_image: PathBuf,
    steps: Vec<PlanStep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanStep {
    region: PathBuf,
    exemplar: PathBuf,
    #[serde(default)]
    hints: ExemplarHints,
    #[serde(default)]
    params: GenerationParams,
}

#[derive(Serialize)]
struct ApplySidecar<'a> {
    plan: &'a Path,
    base_image: &'a str,
    result: &'a str,
    history: &'a [HistoryEntry],
}

fn apply(config: Option<&Path>, a: ApplyArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.plan).map_err(|e| at(&a.plan)(e.into()))?;
    let plan: PlanFile = serde_json::from_str(&text).map_err(|e| at(&a.plan)(e.into()))?;
    let dir = a.plan.parent().unwrap_or(Path::new("."));
    let pipeline = build_pipeline(config, &a.pipeline)?;

    let scratch = tempfile::tempdir().map_err(Error::from)?;
    let store = AssetStore::open(scratch.path())?;
    let import = |rel: &Path, kind: AssetKind| -> Result<String, Failure> {
        let path = dir.join(rel);
        let bytes = std::fs::read(&path).map_err(|e| at(&path)(e.into()))?;
        Ok(store.put(&bytes, kind).map_err(at(&path))?.id)
    };

    let mut session = SessionState::new(import(&plan.base_image, AssetKind::Image)?);
    for step in plan.steps {
        let region = import(&step.region, AssetKind::Mask)?;
        let exemplar = import(&step.exemplar, AssetKind::Exemplar)?;
        session.add_step(region, exemplar, step.hints, step.params)?;
    }
    let outcome = session.apply_plan(&pipeline, &store, a.up_to)?;
    if let Some(f) = outcome.failed {
        return Err(Failure {
            kind: f.kind,
            message: format!("step {}: {}", f.step, f.message),
        });
    }
    std::fs::write(&a.output, store.get(session.current_image())?).map_err(|e| at(&a.output)(e.into()))?;
    write_json(
        &sidecar_path(&a.output),
        &ApplySidecar {
            plan: &a.plan,
            base_image: &session.plan.base_image,
            result: session.current_image(),
            history: &session.history,
        },
    )?;
    println!("{}", a.output.display());
    Ok(())
}

fn eval(config: Option<&Path>, a: EvalArgs) -> Outcome {
    let params = a.params.resolve();
    params.validate()?;
    let pipeline = build_pipeline(config, &a.pipeline)?;
    let manifest = DatasetManifest::load(&a.manifest)?;
    let options = BenchmarkOptions {
        region: a.region.into(),
        jobs: a.jobs,
        breakdowns: !a.no_breakdowns,
    };
    let report = run_benchmark(&pipeline, &manifest, &params, &options)?;
    std::fs::write(&a.report, report.to_json_pretty()).map_err(|e| at(&a.report)(e.into()))?;
    print!("{}", report.render_table());
    if !report.valid {
        eprintln!(
            "warning: {} of {} entries failed; report marked invalid",
            report.failed,
            report.entries.len()
        );
    }
    Ok(())
}

fn serve(config: Option<&Path>, a: ServeArgs) -> Outcome {
    let mut cfg = matx_service::ServiceConfig::from_env()?;
    if let Some(listen) = a.listen {
        cfg.listen = listen;
    }
    if let Some(root) = a.storage_root {
        cfg.storage_root = root;
    }
    if let Some(workers) = a.workers {
        cfg.workers = workers;
    }
    if let Some(path) = config {
        cfg.backends = Some(path.to_path_buf());
    }
    let runtime = tokio::runtime::Runtime::new().map_err(Error::from)?;
    runtime.block_on(matx_service::serve(cfg))?;
    Ok(())
}
