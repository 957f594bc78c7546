//! Dense reverse-mode differentiation with exactly the operators the network
//! needs: valid strided (transposed) convolutions, affine maps, pointwise
//! activations, softmax, and the loss reductions.

mod conv;
mod gemm;
mod graph;
mod init;
mod optim;
mod tensor;

pub use conv::ConvGeom;
pub use graph::{sigmoid, symmetric_kl, Gradients, Graph, NodeId};
pub use init::{fans, xavier_init};
pub use optim::{sgd_step, StepDecay};
pub use tensor::{Parameter, Tensor};
