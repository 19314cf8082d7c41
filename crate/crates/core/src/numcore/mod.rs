//! Dense tensors, feature-axis kernels and their reverse-mode gradients.

pub mod gemm;
mod gradcheck;
mod ops;
mod tensor;

pub use gradcheck::{gradient_check, relative_error, GradCheckOptions, GradCheckReport, ParameterReport};
pub use ops::{
    concat_features, dot3, dot3_vjp, linear_feature, linear_feature_vjp, matmul, matmul_vjp, outer3, outer3_vjp, relu,
    relu_vjp, sigmoid, sigmoid_scalar, sigmoid_vjp, split_features, tanh, tanh_vjp, transpose, Form, LinearGrads,
};
pub use tensor::{Parameter, ParameterSet, Tensor};
