//! Central finite-difference gradient checking for scalar-valued functions
//! of a named parameter store.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{HeninError, Result};

use super::{GradMap, ModelParams};

const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckSample {
    pub param: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub samples: Vec<GradCheckSample>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.samples.iter().all(|s| s.rel_error <= self.tol)
    }

    pub fn worst(&self) -> Option<&GradCheckSample> {
        self.samples
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckSample> {
        self.samples.iter().filter(move |s| s.rel_error > self.tol)
    }
}

/// Mixed relative/absolute error: |a - n| / max(1, |a| + |n|).
fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1.0)
}

/// Check analytic gradients of `f` against central finite differences on up
/// to `samples_per_param` randomly chosen coordinates of every parameter.
///
/// `f` evaluates the scalar function at the given parameters and returns the
/// value together with its analytic gradient map (typically one tape
/// forward + backward).
pub fn grad_check<F>(
    f: F,
    params: &ModelParams,
    tol: f64,
    samples_per_param: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&ModelParams) -> Result<(f64, GradMap)>,
{
    let (value, analytic) = f(params)?;
    if !value.is_finite() {
        return Err(HeninError::NonFinite("grad_check objective".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for (name, grad) in &analytic {
        let shape = params.get(name)?.raw_dim();
        if grad.raw_dim() != shape {
            return Err(HeninError::ShapeMismatch {
                name: name.clone(),
                expected: format!("{:?}", shape),
                got: format!("{:?}", grad.raw_dim()),
            });
        }
        let mut coords: Vec<(usize, usize)> = (0..shape[0])
            .flat_map(|r| (0..shape[1]).map(move |c| (r, c)))
            .collect();
        coords.shuffle(&mut rng);
        coords.truncate(samples_per_param);
        for (row, col) in coords {
            let numeric = central_difference(&f, params, name, row, col)?;
            samples.push(GradCheckSample {
                param: name.clone(),
                row,
                col,
                analytic: grad[(row, col)],
                numeric,
                rel_error: rel_error(grad[(row, col)], numeric),
            });
        }
    }
    Ok(GradCheckReport { samples, tol })
}

fn central_difference<F>(
    f: &F,
    params: &ModelParams,
    name: &str,
    row: usize,
    col: usize,
) -> Result<f64>
where
    F: Fn(&ModelParams) -> Result<(f64, GradMap)>,
{
    let eval = |delta: f64| -> Result<f64> {
        let mut perturbed = params.clone();
        perturbed.get_mut(name)?[(row, col)] += delta;
        let (v, _) = f(&perturbed)?;
        if !v.is_finite() {
            return Err(HeninError::NonFinite("grad_check objective".into()));
        }
        Ok(v)
    };
    Ok((eval(FD_STEP)? - eval(-FD_STEP)?) / (2.0 * FD_STEP))
}
