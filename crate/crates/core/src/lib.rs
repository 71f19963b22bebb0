//! Landmark-guided refinement of fused subcortical label maps, with the
//! supporting volume I/O, label taxonomies, landmark shape model, evaluation
//! metrics and a synthetic phantom generator.

pub mod error;
pub mod geometry;
pub mod labels;
pub mod metrics;
pub mod phantom;
pub mod refine;
pub mod shape;
pub mod volume;

pub use error::{Error, ErrorKind, Result};
