//! SHA-256 content digests, hex encoded.

use sha2::{Digest as _, Sha256};

use crate::imaging::{DepthMap, ForegroundMask, RasterImage};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Incremental digest over tagged fields.
#[derive(Default)]
pub struct ContentHasher {
    inner: Sha256,
}

impl ContentHasher {
    pub fn new(domain: &str) -> Self {
        let mut h = ContentHasher::default();
        h.str(domain);
        h
    }

    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.inner.update((bytes.len() as u64).to_le_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.inner.update(v.to_le_bytes());
        self
    }

    pub fn f32s(&mut self, vals: &[f32]) -> &mut Self {
        self.u64(vals.len() as u64);
        for v in vals {
            self.inner.update(v.to_bits().to_le_bytes());
        }
        self
    }

    pub fn raster(&mut self, img: &RasterImage) -> &mut Self {
        self.u64(img.width() as u64)
            .u64(img.height() as u64)
            .u64(img.channels() as u64)
            .f32s(img.data())
    }

    pub fn mask(&mut self, mask: &ForegroundMask) -> &mut Self {
        self.u64(mask.width() as u64)
            .u64(mask.height() as u64)
            .f32s(&[mask.threshold()])
            .f32s(mask.values())
    }

    pub fn finish(&self) -> String {
        hex::encode(self.inner.clone().finalize())
    }
}

pub fn raster_digest(img: &RasterImage) -> String {
    ContentHasher::new("raster").raster(img).finish()
}

pub fn mask_digest(mask: &ForegroundMask) -> String {
    ContentHasher::new("mask").mask(mask).finish()
}

pub fn depth_digest(depth: &DepthMap) -> String {
    ContentHasher::new("depth")
        .u64(depth.width() as u64)
        .u64(depth.height() as u64)
        .f32s(depth.values())
        .finish()
}
