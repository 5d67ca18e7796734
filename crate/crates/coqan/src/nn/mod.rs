//! Numeric core: dense tensors, a reverse-mode tape, gradient checking,
//! and named parameter storage.

pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod tensor;

pub use graph::{Gradients, Graph, NodeId};
pub use init::{bind, Binding, ParamGroup, ParameterStore};
pub use tensor::Tensor;
