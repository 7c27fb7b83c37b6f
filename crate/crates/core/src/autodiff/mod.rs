//! Dense reverse-mode automatic differentiation in f64.
//!
//! A [`Tape`] records every operation applied to [`Var`] handles; calling
//! [`Tape::backward`] on a scalar walks the record in reverse and accumulates
//! gradients. Parameters live in a [`ParamSet`] and are bound onto a fresh
//! tape for every forward pass.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::{Adam, LinearWarmupDecay};
pub use params::ParamSet;
pub use tape::{Gradients, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;
pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
