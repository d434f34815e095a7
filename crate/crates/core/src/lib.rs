//! Tools for measuring how dropout regularizes interaction effects.

pub mod anova;
pub mod datagen;
pub mod distill;
pub mod error;
pub mod experiment;
pub mod mlp;
pub mod seed;
pub mod theory;

pub use error::{Error, Result};
