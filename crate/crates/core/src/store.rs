//! Filesystem content-addressed store for PNG assets.
//!
//! Each asset lives as `<root>/<id>.png` next to a `<root>/<id>.json`
//! record, where `id` is the SHA-256 of the bytes. Writes go through a
//! temporary file and a rename, so concurrent identical uploads converge
//! on one file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use image::{ColorType, ImageFormat};
use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::imaging::io::{decode_depth, decode_mask, decode_raster, encode_mask, encode_raster};
use crate::imaging::{DepthMap, ForegroundMask, RasterImage};

pub const PNG_MEDIA_TYPE: &str = "image/png";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AssetKind {
    Image,
    Mask,
    Depth,
    Exemplar,
    Result,
}

impl AssetKind {
    pub const ALL: [AssetKind; 5] = [
        AssetKind::Image,
        AssetKind::Mask,
        AssetKind::Depth,
        AssetKind::Exemplar,
        AssetKind::Result,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssetKind::Image => "image",
            AssetKind::Mask => "mask",
            AssetKind::Depth => "depth",
            AssetKind::Exemplar => "exemplar",
            AssetKind::Result => "result",
        }
    }

    /// Checks a PNG payload against this kind's channel contract: masks are
    /// 8-bit single channel, depth maps 16-bit single channel, everything
    /// else 8-bit RGB or RGBA.
    pub fn check_payload(self, bytes: &[u8]) -> Result<()> {
        let reader = image::ImageReader::with_format(std::io::Cursor::new(bytes), ImageFormat::Png);
        let decoded = reader
            .decode()
            .map_err(|e| Error::invalid(format!("not a decodable PNG: {e}")))?;
        let color = decoded.color();
        let ok = match self {
            AssetKind::Mask => color == ColorType::L8,
            AssetKind::Depth => color == ColorType::L16,
            _ => matches!(color, ColorType::Rgb8 | ColorType::Rgba8),
        };
        if !ok {
            let wanted = match self {
                AssetKind::Mask => "8-bit single-channel",
                AssetKind::Depth => "16-bit single-channel",
                _ => "8-bit RGB or RGBA",
            };
            return Err(Error::invalid(format!(
                "{self} asset must be {wanted} PNG, got {color:?}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AssetKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown asset kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub id: String,
    pub kind: AssetKind,
    pub media_type: String,
    pub byte_size: u64,
    pub created: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct AssetStore {
    root: PathBuf,
}

pub fn is_asset_id(id: &str) -> bool {
    id.len() == 64 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

impl AssetStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(AssetStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn checked(&self, id: &str) -> Result<()> {
        if is_asset_id(id) {
            Ok(())
        } else {
            Err(Error::AssetNotFound(id.to_string()))
        }
    }

    pub fn bytes_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.png"))
    }

    fn record_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.json"))
    }

    pub fn contains(&self, id: &str) -> bool {
        is_asset_id(id) && self.record_path(id).is_file() && self.bytes_path(id).is_file()
    }

    /// Stores validated bytes. Identical bytes return the existing record.
    pub fn put(&self, bytes: &[u8], kind: AssetKind) -> Result<AssetRecord> {
        kind.check_payload(bytes)?;
        self.put_unchecked(bytes, kind)
    }

    fn put_unchecked(&self, bytes: &[u8], kind: AssetKind) -> Result<AssetRecord> {
        let id = sha256_hex(bytes);
        if self.contains(&id) {
            return self.record(&id);
        }
        let record = AssetRecord {
            id: id.clone(),
            kind,
            media_type: PNG_MEDIA_TYPE.to_string(),
            byte_size: bytes.len() as u64,
            created: Utc::now(),
        };
        write_atomic(&self.bytes_path(&id), bytes)?;
        // Another writer may have landed the record first; keep theirs.
        if !self.record_path(&id).is_file() {
            write_atomic(&self.record_path(&id), &serde_json::to_vec_pretty(&record)?)?;
        }
        self.record(&id)
    }

    pub fn record(&self, id: &str) -> Result<AssetRecord> {
        self.checked(id)?;
        match std::fs::read(self.record_path(id)) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::AssetNotFound(id.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    pub fn get(&self, id: &str) -> Result<Vec<u8>> {
        self.checked(id)?;
        match std::fs::read(self.bytes_path(id)) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::AssetNotFound(id.to_string())),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put_raster(&self, image: &RasterImage, kind: AssetKind) -> Result<AssetRecord> {
        if matches!(kind, AssetKind::Mask | AssetKind::Depth) {
            return Err(Error::invalid(format!("a colour image cannot be stored as {kind}")));
        }
        self.put_unchecked(&encode_raster(image)?, kind)
    }

    pub fn put_mask(&self, mask: &ForegroundMask) -> Result<AssetRecord> {
        self.put_unchecked(&encode_mask(mask)?, AssetKind::Mask)
    }

    pub fn load_raster(&self, id: &str) -> Result<RasterImage> {
        decode_raster(&self.get(id)?)
    }

    pub fn load_mask(&self, id: &str) -> Result<ForegroundMask> {
        decode_mask(&self.get(id)?)
    }

    pub fn load_depth(&self, id: &str) -> Result<DepthMap> {
        decode_depth(&self.get(id)?)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(".tmp-{}", uuid::Uuid::new_v4()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::from(e)
    })
}
