//! Desk-scale experiment suite for `drphase`: synthetic test objects, the
//! seeded experiment runners behind the `drphase` binary, CSV output and the
//! one-pattern uniqueness bound.

pub mod bound;
pub mod csv;
pub mod image;
pub mod runners;

pub use bound::prob_lower_bound;
pub use image::{gen_image, ImageKind, TestImage};
pub use runners::{AlgoChoice, ExperimentConfig, InitChoice};
