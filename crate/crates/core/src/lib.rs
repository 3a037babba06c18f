//! Exemplar-based material transfer.
//!
//! An input object is re-rendered with the material of an exemplar image by
//! an inpainting generator conditioned on four inputs: the exemplar's
//! material embedding, a depth map of the input, an init image whose
//! foreground has been reduced to grayscale shading, and the foreground mask.
//!
//! * [`imaging`] holds the pixel math.
//! * [`perception`] defines estimator backends and their registry.
//! * [`generation`] runs the transfer pipeline.
//! * [`session`] applies ordered multi-object edit plans.
//! * [`evaluation`] computes metrics and benchmark reports.
//! * [`store`] is the content-addressed asset store.

pub mod digest;
pub mod error;
pub mod evaluation;
pub mod generation;
pub mod imaging;
pub mod perception;
mod rng;
pub mod session;
pub mod store;

pub use error::{Error, Result, Stage};
