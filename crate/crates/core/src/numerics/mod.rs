//! Dense `f64` tensors and a tape-based reverse-mode autodiff engine.

pub mod checkpoint;
mod graph;
mod params;
mod tensor;

pub use graph::{Graph, Var, LAYER_NORM_EPS};
pub use params::{Gradients, ParamId, ParamStore};
pub use tensor::Tensor;
