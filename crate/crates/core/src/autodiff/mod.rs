//! Minimal reverse-mode differentiation engine.
//!
//! A [`Graph`] records operations define-by-run on row-major 2-D tensors and
//! replays them backwards to populate gradients. The engine is generic over
//! the element type: training runs at f32, gradient checking at f64.
//! Alongside the graph live the shared-MLP builder, the Adam optimizer, and
//! the named parameter store they both operate on.

mod adam;
mod graph;
mod mlp;
mod params;
mod scalar;

pub use adam::{adam_step, AdamConfig};
pub use graph::{BnMode, Graph, Reduction, ShapeError, TensorId};
pub use mlp::{init_mlp, BnObservation, LayerSpec, MlpSpec, Session};
pub use params::{ParamEntry, ParamStore};
pub use scalar::Scalar;

use alloc::vec::Vec;

/// Plain N-dimensional numeric array; the value type that crosses the
/// boundary between graph runs (parameters, inputs, extracted gradients).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Tensor {
            dims: dims.to_vec(),
            data: alloc::vec![T::ZERO; len],
        }
    }

    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len());
        Tensor {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
