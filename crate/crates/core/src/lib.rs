//! Joint image classification and segmentation with Dirichlet evidence on
//! both heads, uncertainty-gated decoding and uncertainty-screened feature
//! exchange between the two tasks.

pub mod error;
pub mod evidential;
pub mod harness;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod pgm;
pub mod rng;
pub mod selftest;
pub mod special;
pub mod synthdata;

pub use error::{Result, UmlError};
