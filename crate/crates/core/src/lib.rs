//! Metric cones, comparison angles, semiconcavity diagnostics and the
//! Hellinger–Kantorovich distance on finitely supported measures.

pub mod angles;
pub mod cone_geometry;
pub mod error;
pub mod fixtures;
pub mod hk_space;
pub mod let_solver;
pub mod measure_sets;
pub mod metric_base;
pub mod semiconcavity;

pub use error::{Error, Result};
