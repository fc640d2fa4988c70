//! Dense feed-forward networks with exact first- and second-order derivative
//! oracles.

mod loss;
mod model;
mod scalar;
mod spec;

pub use loss::output_hessian;
pub use model::{
    cost_and_grad, example_loss, example_loss_grad, forward, forward_batch, forward_dataset,
    gnh_vp, hvp, init_params, jvp_outputs, vjp_outputs,
};
pub use scalar::{Dual, Scalar};
pub use spec::{Activation, LossKind, NetworkSpec, OutputHessian, ParamVector, TargetRef};
