// `!(err <= tol)` is used on purpose so that NaN fails a check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod dataset;
pub mod mollifier;
pub mod nn;
pub mod quadrature;
pub mod scalar_math;
pub mod verify;
