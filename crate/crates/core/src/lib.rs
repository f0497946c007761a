//! Generative visual reasoning at desk scale.
//!
//! Five families of grid/geometry puzzles are generated with exact oracles,
//! rendered to RGB images, solved image-to-image by a conditional
//! flow-matching denoiser, and parsed back to symbolic answers for exact
//! verification.

pub mod eval;
pub mod flow;
pub mod manifest;
pub mod oracle;
pub mod parse;
pub mod render;
pub mod rewards;
pub mod sampler;
pub mod seed;
pub mod taskgen;
pub mod types;

pub use types::{
    Cell, Level, Move, Payload, RasterImage, SymbolicSolution, TaskInstance, TaskKind,
};
