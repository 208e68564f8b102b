//! Numeric substrate: a dense f64 tape for reverse-mode gradients, named
//! parameter stores, the Adam update rule, and a finite-difference
//! gradient checker.

mod adam;
mod binding;
mod gradcheck;
mod params;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use binding::BoundParams;
pub use gradcheck::{grad_check, GradCheckReport, GradCheckSample};
pub use params::{glorot_uniform, GradMap, ModelParams};
pub use tape::{Tape, Var};
