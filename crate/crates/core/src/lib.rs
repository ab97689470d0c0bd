//! Measuring how linear the map between two word-embedding spaces is, how
//! well the spaces encode and preserve analogies, and how the two relate.

pub mod analogy;
pub mod embedding;
pub mod error;
pub mod indicators;
pub mod linear_map;
pub mod stats;
pub mod synth;
pub mod transport;
pub mod xanlg;

pub use embedding::{Embedding, VectorView};
pub use error::{Error, Result};
