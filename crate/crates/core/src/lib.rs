//! Homomorphism indistinguishability at desk scale: exact hom counts, bounded
//! width and depth decompositions, cops-and-robber and pebble games, counting
//! logic with its translation to quantum graphs, and parity gadget graphs.

pub mod acceptance;
pub mod canon;
pub mod cfi;
pub mod codec;
pub mod config;
pub mod decomp;
pub mod error;
pub mod games;
pub mod graph;
pub mod homalg;
pub mod logic;

pub use config::Bounds;
pub use error::{Error, Result};
pub use graph::{Graph, LabelledGraph};
pub use homalg::{hom, hom_count, QuantumGraph};
