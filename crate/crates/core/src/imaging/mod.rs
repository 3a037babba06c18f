//! Pixel-domain operations: grayscale, the init composite, mask morphology,
//! depth normalization, working-size placement and paste-back.
//!
//! Everything here is a pure function of its inputs.

mod compose;
mod composite;
mod depth;
pub mod io;
mod morphology;
mod placement;
mod types;

pub use compose::{compose_init_image, luma, to_grayscale, InitMode, LUMA_WEIGHTS};
pub(crate) use composite::blend_by_weights;
pub use composite::{feather_support, feather_weights, paste_back, DEFAULT_FEATHER};
pub use depth::{flip_depth, normalize_depth};
pub use morphology::{complement, dilate_binary, dilate_mask, squared_distance_transform};
pub use placement::{fit_to_generation_size, resize_raster, Placement};
pub(crate) use types::ensure_same_extent;
pub use types::{
    u8_to_unit, unit_to_u8, BinaryMask, CropBox, DepthMap, ForegroundMask, GrayscaleImage, RasterImage, ScalarField,
    DEFAULT_MASK_THRESHOLD,
};
