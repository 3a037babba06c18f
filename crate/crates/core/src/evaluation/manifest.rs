use std::collections::BTreeSet;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::{sha256_hex, ContentHasher};
use crate::error::{Error, Result};

/// An asset path relative to the manifest's directory, with an optional
/// SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetRef {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

impl AssetRef {
    pub fn new(path: impl Into<String>) -> Self {
        AssetRef {
            path: path.into(),
            digest: None,
        }
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.digest = Some(digest.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    pub exemplar: AssetRef,
    pub input: AssetRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<AssetRef>,
    pub ground_truth: AssetRef,
}

impl ManifestEntry {
    fn assets(&self) -> impl Iterator<Item = (&'static str, &AssetRef)> {
        [
            ("exemplar", Some(&self.exemplar)),
            ("input", Some(&self.input)),
            ("mask", self.mask.as_ref()),
            ("ground_truth", Some(&self.ground_truth)),
        ]
        .into_iter()
        .filter_map(|(k, a)| a.map(|a| (k, a)))
    }
}

/// Grid size of a synthetic manifest; entries must number
/// `materials × meshes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestMetadata {
    pub materials: usize,
    pub meshes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<ManifestMetadata>,
    pub entries: Vec<ManifestEntry>,
}

fn manifest_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Manifest {
        location: location.into(),
        message: message.into(),
    }
}

impl DatasetManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: DatasetManifest = serde_json::from_str(text)
            .map_err(|e| manifest_err(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    /// Structural checks that need no filesystem access.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(manifest_err("entries", "manifest has no entries"));
        }
        let mut ids = BTreeSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.id.trim().is_empty() {
                return Err(manifest_err(format!("entries[{i}].id"), "empty id"));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(manifest_err(
                    format!("entries[{i}].id"),
                    format!("duplicate id `{}`", e.id),
                ));
            }
            for (field, asset) in e.assets() {
                check_relative(&asset.path).map_err(|m| manifest_err(format!("entries[{i}].{field}.path"), m))?;
            }
        }
        if let Some(m) = self.metadata {
            if m.materials * m.meshes != self.entries.len() {
                return Err(manifest_err(
                    "metadata",
                    format!(
                        "{} materials x {} meshes != {} entries",
                        m.materials,
                        m.meshes,
                        self.entries.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Reads the manifest and checks that every asset exists and matches
    /// its digest.
    pub fn load(path: &Path) -> Result<ResolvedManifest> {
        let text =
            std::fs::read_to_string(path).map_err(|e| manifest_err(path.display().to_string(), e.to_string()))?;
        let manifest = Self::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        ResolvedManifest::resolve(manifest, base)
    }
}

fn check_relative(path: &str) -> std::result::Result<(), String> {
    let p = Path::new(path);
    if path.is_empty() {
        return Err("empty path".into());
    }
    if p.is_absolute()
        || p.components()
            .any(|c| matches!(c, Component::Prefix(_) | Component::RootDir))
    {
        return Err(format!("`{path}` must be relative to the manifest"));
    }
    Ok(())
}

/// A validated manifest bound to the directory its paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedManifest {
    pub manifest: DatasetManifest,
    pub base_dir: PathBuf,
    /// Digest over the manifest structure and the bytes of every asset.
    pub digest: String,
}

impl ResolvedManifest {
    pub fn resolve(manifest: DatasetManifest, base_dir: PathBuf) -> Result<Self> {
        manifest.validate()?;
        let mut h = ContentHasher::new("dataset-manifest");
        h.bytes(&serde_json::to_vec(&manifest)?);
        for (i, e) in manifest.entries.iter().enumerate() {
            for (field, asset) in e.assets() {
                let location = format!("entries[{i}].{field}");
                let full = base_dir.join(&asset.path);
                let bytes = std::fs::read(&full)
                    .map_err(|err| manifest_err(&location, format!("{}: {err}", full.display())))?;
                let actual = sha256_hex(&bytes);
                if let Some(expected) = &asset.digest {
                    if !expected.eq_ignore_ascii_case(&actual) {
                        return Err(manifest_err(
                            location,
                            format!(
                                "digest mismatch for {}: expected {expected}, found {actual}",
                                asset.path
                            ),
                        ));
                    }
                }
                h.str(&actual);
            }
        }
        Ok(ResolvedManifest {
            digest: h.finish(),
            manifest,
            base_dir,
        })
    }

    pub fn path_of(&self, asset: &AssetRef) -> PathBuf {
        self.base_dir.join(&asset.path)
    }
}
