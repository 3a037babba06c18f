use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

use super::{mock, DepthEstimator, ForegroundExtractor, RegionSegmenter};
use crate::error::{Error, Result};
use crate::evaluation::{ImageEmbedder, PerceptualMetric};
use crate::generation::{self, Generator, MaterialEncoder};

/// Prefix of per-backend environment overrides:
/// `MATX_BACKEND_<ID>_{MODEL_PATH,DEVICE,FLIP_DEPTH,MAX_CONCURRENCY}` where
/// `<ID>` is the backend id upper-cased with `-` and `.` turned into `_`.
pub const ENV_PREFIX: &str = "MATX_BACKEND_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Depth,
    Foreground,
    PromptableSegmentation,
    MaterialEncoder,
    Generator,
    PerceptualMetric,
    ImageEmbedding,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BackendKind::Depth => "depth",
            BackendKind::Foreground => "foreground",
            BackendKind::PromptableSegmentation => "promptable-segmentation",
            BackendKind::MaterialEncoder => "material-encoder",
            BackendKind::Generator => "generator",
            BackendKind::PerceptualMetric => "perceptual-metric",
            BackendKind::ImageEmbedding => "image-embedding",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub id: String,
    pub version: String,
    pub deterministic: bool,
}

impl BackendDescriptor {
    pub fn mock(kind: BackendKind, id: &str) -> Self {
        BackendDescriptor {
            kind,
            id: id.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            deterministic: true,
        }
    }
}

/// Per-backend knobs, settable from the config file and the environment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
    /// Set for estimators that emit near=0 depth.
    #[serde(default)]
    pub flip_depth: bool,
    /// `None` means the backend is internally thread-safe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_concurrency: Option<usize>,
}

impl BackendSettings {
    fn apply_env(&mut self, id: &str, lookup: &dyn Fn(&str) -> Option<String>) -> Result<()> {
        let key = |suffix: &str| {
            let norm: String = id
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() {
                        c.to_ascii_uppercase()
                    } else {
                        '_'
                    }
                })
                .collect();
            format!("{ENV_PREFIX}{norm}_{suffix}")
        };
        if let Some(v) = lookup(&key("MODEL_PATH")) {
            self.model_path = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup(&key("DEVICE")) {
            self.device = Some(v);
        }
        if let Some(v) = lookup(&key("FLIP_DEPTH")) {
            self.flip_depth = match v.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => true,
                "0" | "false" | "no" | "" => false,
                other => {
                    return Err(Error::Config(format!(
                        "{}: not a boolean: `{other}`",
                        key("FLIP_DEPTH")
                    )))
                }
            };
        }
        if let Some(v) = lookup(&key("MAX_CONCURRENCY")) {
            let n: usize = v
                .parse()
                .map_err(|_| Error::Config(format!("{}: not a count: `{v}`", key("MAX_CONCURRENCY"))))?;
            self.max_concurrency = (n > 0).then_some(n);
        }
        Ok(())
    }
}

/// Backend ids the pipeline uses for each role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StackConfig {
    pub encoder: String,
    pub depth: String,
    pub foreground: String,
    pub segmenter: String,
    pub generator: String,
    pub perceptual: String,
    pub embedding: String,
}

impl Default for StackConfig {
    fn default() -> Self {
        StackConfig {
            encoder: mock::ENCODER_ID.into(),
            depth: mock::DEPTH_ID.into(),
            foreground: mock::FOREGROUND_ID.into(),
            segmenter: mock::SEGMENTER_ID.into(),
            generator: mock::GENERATOR_ID.into(),
            perceptual: mock::PERCEPTUAL_ID.into(),
            embedding: mock::EMBEDDING_ID.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEntryConfig {
    pub id: String,
    pub kind: BackendKind,
    /// `mock`, `mock-identity` (generators only), or the name of an
    /// externally installed binding.
    pub provider: String,
    #[serde(default)]
    pub version: Option<String>,
    #[serde(flatten)]
    pub settings: BackendSettings,
}

/// Registry configuration document (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryConfig {
    #[serde(default)]
    pub stack: StackConfig,
    /// Register the built-in mocks under their default ids (entries below
    /// with the same id take precedence).
    #[serde(default = "yes")]
    pub include_mocks: bool,
    #[serde(default)]
    pub backends: Vec<BackendEntryConfig>,
}

fn yes() -> bool {
    true
}

impl Default for RegistryConfig {
    fn default() -> Self {
        RegistryConfig {
            stack: StackConfig::default(),
            include_mocks: true,
            backends: Vec::new(),
        }
    }
}

impl RegistryConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RegistryConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for b in &cfg.backends {
            if !seen.insert(b.id.as_str()) {
                return Err(Error::Config(format!("duplicate backend id `{}`", b.id)));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Applies `MATX_BACKEND_*` overrides; `lookup` is usually `std::env::var`.
    pub fn apply_env_overrides(&mut self, lookup: &dyn Fn(&str) -> Option<String>) -> Result<()> {
        for b in &mut self.backends {
            b.settings.apply_env(&b.id, lookup)?;
        }
        Ok(())
    }

    pub fn from_process_env(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply_env_overrides(&|k| std::env::var(k).ok())?;
        Ok(cfg)
    }
}

#[derive(Clone)]
enum Slot {
    Depth(Arc<dyn DepthEstimator>),
    Foreground(Arc<dyn ForegroundExtractor>),
    Segmenter(Arc<dyn RegionSegmenter>),
    Encoder(Arc<dyn MaterialEncoder>),
    Generator(Arc<dyn Generator>),
    Perceptual(Arc<dyn PerceptualMetric>),
    Embedder(Arc<dyn ImageEmbedder>),
    Unavailable(String),
}

#[derive(Clone)]
struct Entry {
    descriptor: BackendDescriptor,
    settings: BackendSettings,
    slot: Slot,
    gate: Arc<Gate>,
}

/// Counting gate enforcing a backend's declared max concurrency.
struct Gate {
    limit: Option<usize>,
    in_use: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(limit: Option<usize>) -> Self {
        Gate {
            limit,
            in_use: Mutex::new(0),
            freed: Condvar::new(),
        }
    }
}

/// Held while a backend call runs; releases its slot on drop.
pub struct GateGuard {
    gate: Arc<Gate>,
}

impl GateGuard {
    fn acquire(gate: &Arc<Gate>) -> GateGuard {
        if let Some(limit) = gate.limit {
            let mut n = gate.in_use.lock().unwrap_or_else(|e| e.into_inner());
            while *n >= limit {
                n = gate.freed.wait(n).unwrap_or_else(|e| e.into_inner());
            }
            *n += 1;
        }
        GateGuard { gate: gate.clone() }
    }
}

impl Drop for GateGuard {
    fn drop(&mut self) {
        if self.gate.limit.is_some() {
            let mut n = self.gate.in_use.lock().unwrap_or_else(|e| e.into_inner());
            *n -= 1;
            self.gate.freed.notify_one();
        }
    }
}

/// Backends by id. Cheap to clone; clones share concurrency gates.
#[derive(Clone, Default)]
pub struct BackendRegistry {
    entries: BTreeMap<String, Entry>,
}

macro_rules! accessors {
    ($(($register:ident, $get:ident, $variant:ident, $tr:ident, $kind:expr)),* $(,)?) => {
        $(
            pub fn $register(
                &mut self,
                descriptor: BackendDescriptor,
                settings: BackendSettings,
                backend: Arc<dyn $tr>,
            ) -> Result<()> {
                self.insert(descriptor, settings, Slot::$variant(backend), $kind)
            }

            pub fn $get(&self, id: &str) -> Result<(Arc<dyn $tr>, BackendSettings, GateGuard)> {
                let entry = self.entry(id, $kind)?;
                match &entry.slot {
                    Slot::$variant(b) => Ok((b.clone(), entry.settings.clone(), GateGuard::acquire(&entry.gate))),
                    _ => unreachable!("kind checked by entry()"),
                }
            }
        )*
    };
}

impl BackendRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding every built-in mock under its default id.
    pub fn with_mocks() -> Self {
        let mut reg = Self::new();
        for (kind, id) in mock::DEFAULT_MOCKS {
            reg.insert_mock(kind, id, id, BackendSettings::default())
                .expect("default mock ids are distinct");
        }
        reg
    }

    pub fn from_config(config: &RegistryConfig) -> Result<Self> {
        let mut reg = Self::new();
        for b in &config.backends {
            let mut desc = BackendDescriptor::mock(b.kind, &b.id);
            if let Some(v) = &b.version {
                desc.version = v.clone();
            }
            match b.provider.as_str() {
                "mock" | "mock-identity" => reg.insert_mock(b.kind, &b.id, &b.provider, b.settings.clone())?,
                other => {
                    desc.deterministic = false;
                    let reason = format!("provider `{other}` is not installed in this build");
                    reg.insert(desc, b.settings.clone(), Slot::Unavailable(reason), b.kind)?;
                }
            }
        }
        if config.include_mocks {
            for (kind, id) in mock::DEFAULT_MOCKS {
                if !reg.entries.contains_key(id) {
                    reg.insert_mock(kind, id, id, BackendSettings::default())?;
                }
            }
        }
        Ok(reg)
    }

    fn insert_mock(&mut self, kind: BackendKind, id: &str, provider: &str, settings: BackendSettings) -> Result<()> {
        let desc = BackendDescriptor::mock(kind, id);
        let slot = match (kind, provider) {
            (BackendKind::Depth, _) => Slot::Depth(Arc::new(mock::MockDepth)),
            (BackendKind::Foreground, _) => Slot::Foreground(Arc::new(mock::MockForeground)),
            (BackendKind::PromptableSegmentation, _) => Slot::Segmenter(Arc::new(mock::MockSegmenter)),
            (BackendKind::MaterialEncoder, _) => Slot::Encoder(Arc::new(generation::mock::MockEncoder::new(id))),
            (BackendKind::Generator, p) if p == "mock-identity" || id == mock::IDENTITY_GENERATOR_ID => {
                Slot::Generator(Arc::new(generation::mock::IdentityGenerator::new(id)))
            }
            (BackendKind::Generator, _) => Slot::Generator(Arc::new(generation::mock::MockGenerator::new(id))),
            (BackendKind::PerceptualMetric, _) => {
                Slot::Perceptual(Arc::new(crate::evaluation::mock::PooledLumaDistance))
            }
            (BackendKind::ImageEmbedding, _) => {
                Slot::Embedder(Arc::new(crate::evaluation::mock::ColorHistogramEmbedder))
            }
        };
        self.insert(desc, settings, slot, kind)
    }

    fn insert(
        &mut self,
        descriptor: BackendDescriptor,
        settings: BackendSettings,
        slot: Slot,
        kind: BackendKind,
    ) -> Result<()> {
        if descriptor.kind != kind {
            return Err(Error::Config(format!(
                "backend `{}` described as {} but registered as {kind}",
                descriptor.id, descriptor.kind
            )));
        }
        if self.entries.contains_key(&descriptor.id) {
            return Err(Error::Config(format!(
                "backend id `{}` already registered",
                descriptor.id
            )));
        }
        let gate = Arc::new(Gate::new(settings.max_concurrency));
        self.entries.insert(
            descriptor.id.clone(),
            Entry {
                descriptor,
                settings,
                slot,
                gate,
            },
        );
        Ok(())
    }

    /// Registers a descriptor whose implementation cannot be loaded; every
    /// resolution fails with a backend error naming `reason`.
    pub fn register_unavailable(&mut self, descriptor: BackendDescriptor, reason: impl Into<String>) -> Result<()> {
        let kind = descriptor.kind;
        self.insert(
            descriptor,
            BackendSettings::default(),
            Slot::Unavailable(reason.into()),
            kind,
        )
    }

    pub fn descriptor(&self, id: &str) -> Option<&BackendDescriptor> {
        self.entries.get(id).map(|e| &e.descriptor)
    }

    pub fn settings(&self, id: &str) -> Option<&BackendSettings> {
        self.entries.get(id).map(|e| &e.settings)
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &BackendDescriptor> {
        self.entries.values().map(|e| &e.descriptor)
    }

    pub fn is_available(&self, id: &str) -> bool {
        matches!(self.entries.get(id), Some(e) if !matches!(e.slot, Slot::Unavailable(_)))
    }

    fn entry(&self, id: &str, kind: BackendKind) -> Result<&Entry> {
        let entry = self.entries.get(id).ok_or_else(|| Error::BackendUnavailable {
            id: id.to_string(),
            reason: "not registered".into(),
        })?;
        if let Slot::Unavailable(reason) = &entry.slot {
            return Err(Error::BackendUnavailable {
                id: id.to_string(),
                reason: reason.clone(),
            });
        }
        if entry.descriptor.kind != kind {
            return Err(Error::BackendUnavailable {
                id: id.to_string(),
                reason: format!("registered as {}, needed {kind}", entry.descriptor.kind),
            });
        }
        Ok(entry)
    }

    accessors!(
        (register_depth, depth, Depth, DepthEstimator, BackendKind::Depth),
        (
            register_foreground,
            foreground,
            Foreground,
            ForegroundExtractor,
            BackendKind::Foreground
        ),
        (
            register_segmenter,
            segmenter,
            Segmenter,
            RegionSegmenter,
            BackendKind::PromptableSegmentation
        ),
        (
            register_encoder,
            encoder,
            Encoder,
            MaterialEncoder,
            BackendKind::MaterialEncoder
        ),
        (
            register_generator,
            generator,
            Generator,
            Generator,
            BackendKind::Generator
        ),
        (
            register_perceptual,
            perceptual,
            Perceptual,
            PerceptualMetric,
            BackendKind::PerceptualMetric
        ),
        (
            register_embedder,
            embedder,
            Embedder,
            ImageEmbedder,
            BackendKind::ImageEmbedding
        ),
    );
}

impl fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.descriptors()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn mocks_resolve_and_kinds_are_checked() {
        let reg = BackendRegistry::with_mocks();
        assert!(reg.depth(mock::DEPTH_ID).is_ok());
        let err = reg.depth(mock::GENERATOR_ID).err().unwrap();
        assert!(matches!(err, Error::BackendUnavailable { .. }));
        let err = reg.depth("nope").err().unwrap();
        assert!(matches!(err, Error::BackendUnavailable { ref id, .. } if id == "nope"));
        assert!(reg.descriptors().all(|d| d.deterministic));
    }

    #[test]
    fn config_parses_and_env_overrides() {
        let text = r#"
            [stack]
            depth = "dpt"

            [[backends]]
            id = "dpt"
            kind = "depth"
            provider = "mock"
            flip_depth = false
            max_concurrency = 1

            [[backends]]
            id = "sdxl-inpaint"
            kind = "generator"
            provider = "diffusers"
            model_path = "/models/sdxl"
        "#;
        let mut cfg = RegistryConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.stack.depth, "dpt");
        assert_eq!(cfg.stack.generator, mock::GENERATOR_ID);
        let env = |k: &str| match k {
            "MATX_BACKEND_DPT_FLIP_DEPTH" => Some("true".to_string()),
            "MATX_BACKEND_SDXL_INPAINT_DEVICE" => Some("cuda:1".to_string()),
            _ => None,
        };
        cfg.apply_env_overrides(&env).unwrap();
        assert!(cfg.backends[0].settings.flip_depth);
        assert_eq!(cfg.backends[1].settings.device.as_deref(), Some("cuda:1"));

        let reg = BackendRegistry::from_config(&cfg).unwrap();
        assert!(reg.settings("dpt").unwrap().flip_depth);
        let err = reg.generator("sdxl-inpaint").err().unwrap();
        assert!(matches!(err, Error::BackendUnavailable { ref id, .. } if id == "sdxl-inpaint"));
        // defaults still present
        assert!(reg.is_available(mock::GENERATOR_ID));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = r#"
            [[backends]]
            id = "a"
            kind = "depth"
            provider = "mock"
            [[backends]]
            id = "a"
            kind = "foreground"
            provider = "mock"
        "#;
        assert!(RegistryConfig::from_toml_str(text).is_err());
        let mut reg = BackendRegistry::with_mocks();
        let err = reg.register_unavailable(BackendDescriptor::mock(BackendKind::Depth, mock::DEPTH_ID), "x");
        assert!(err.is_err());
    }

    #[test]
    fn gate_serializes_single_concurrency_backend() {
        struct Probe {
            live: AtomicUsize,
            peak: AtomicUsize,
        }
        impl DepthEstimator for Probe {
            fn estimate(&self, image: &crate::imaging::RasterImage) -> Result<crate::imaging::DepthMap> {
                let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(std::time::Duration::from_millis(5));
                self.live.fetch_sub(1, Ordering::SeqCst);
                crate::imaging::DepthMap::new(image.width(), image.height(), vec![0.5; image.pixel_count()])
            }
        }
        let probe = Arc::new(Probe {
            live: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let mut reg = BackendRegistry::new();
        reg.register_depth(
            BackendDescriptor::mock(BackendKind::Depth, "probe"),
            BackendSettings {
                max_concurrency: Some(1),
                ..Default::default()
            },
            probe.clone(),
        )
        .unwrap();
        let img = crate::imaging::RasterImage::filled(2, 2, &[0.1, 0.2, 0.3]).unwrap();
        std::thread::scope(|s| {
            for _ in 0..6 {
                s.spawn(|| super::super::estimate_depth(&reg, "probe", &img).unwrap());
            }
        });
        assert_eq!(probe.peak.load(Ordering::SeqCst), 1);
    }
}
