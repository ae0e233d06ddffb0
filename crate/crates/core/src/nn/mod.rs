//! From-scratch neural network stack: tensors, layers, recurrent cells,
//! model assembly, ADAM, training loop, and checkpoint serialization.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod rnn;
pub mod tensor;
pub mod train;

pub use tensor::{Param, ParamVisitor, Tensor};
