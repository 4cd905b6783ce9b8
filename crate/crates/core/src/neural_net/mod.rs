//! Hardwired feed-forward networks: structure, activations, forward pass,
//! quadratic cost and backpropagation.

mod activation;
mod network;

pub use activation::{
    activation_kind_name, implicit_root, implicit_root_derivative, root_residual, smoothed_relu, Activation,
};
pub use network::{
    activation_ode, quadratic_cost, quadratic_cost_gradient, Architecture, ForwardResult, Gradients, HardwiredNetwork,
    Matrix, Parameters,
};
