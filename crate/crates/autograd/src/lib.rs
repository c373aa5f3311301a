//! Minimal reverse-mode automatic differentiation for small convolutional
//! networks on the CPU.
//!
//! Everything runs single-threaded and in a fixed order, so results are
//! bitwise reproducible. The same code runs in `f32` for training and in
//! `f64` for finite-difference gradient checks.

pub mod graph;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use optim::{Adam, AdamConfig};
pub use params::{Param, ParamId, ParamStore};
pub use tensor::{Element, Tensor};
