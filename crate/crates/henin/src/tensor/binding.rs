//! Binding of a named parameter store onto a tape: every parameter becomes
//! a leaf, and gradients can be read back by name after the backward pass.

use std::collections::BTreeMap;

use crate::{HeninError, Result};

use super::{GradMap, ModelParams, Tape, Var};

pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, params: &ModelParams) -> Self {
        let vars = params
            .iter()
            .map(|(name, tensor)| (name.to_string(), tape.leaf(tensor.clone())))
            .collect();
        Self { vars }
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| HeninError::UnknownParameter(name.to_string()))
    }

    /// Gradient of `loss` with respect to every bound parameter.
    pub fn gradients(&self, tape: &Tape, loss: Var) -> GradMap {
        let names: Vec<&String> = self.vars.keys().collect();
        let vars: Vec<Var> = names.iter().map(|n| self.vars[*n]).collect();
        let grads = tape.backward(loss, &vars);
        names
            .into_iter()
            .zip(grads)
            .map(|(n, g)| (n.clone(), g))
            .collect()
    }
}
