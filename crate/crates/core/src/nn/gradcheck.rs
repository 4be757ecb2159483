//! Finite-difference verification of analytic gradients.

use super::layers::{backward, forward, Network};
use super::{ParamStore, Tensor};
use crate::error::Result;
use crate::rng;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation flipped a ReLU, where the loss is not
    /// differentiable within the step.
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn merge(self, other: GradCheckReport) -> GradCheckReport {
        GradCheckReport {
            max_rel_error: self.max_rel_error.max(other.max_rel_error),
            checked: self.checked + other.checked,
            skipped: self.skipped + other.skipped,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares `analytic` with central differences of `loss` at the flat
/// parameter indices `coords`. `loss` returns the scalar loss and the ReLU
/// activation pattern at the given parameters.
pub fn check_gradient<F>(params: &ParamStore, analytic: &ParamStore, coords: &[usize], loss: F) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Vec<bool>)>,
{
    let (_, pattern) = loss(params)?;
    let flat_analytic = {
        // Gradients may omit layers that received no signal; align by name.
        let mut full = params.zeros_like();
        full.accumulate(analytic)?;
        full.flatten()
    };
    let mut report = GradCheckReport::default();
    let mut probe = params.clone();
    for &i in coords {
        let orig = *probe.value_mut(i).expect("coordinate in range");
        *probe.value_mut(i).unwrap() = orig + FD_STEP;
        let (lp, pp) = loss(&probe)?;
        *probe.value_mut(i).unwrap() = orig - FD_STEP;
        let (lm, pm) = loss(&probe)?;
        *probe.value_mut(i).unwrap() = orig;
        if pp != pattern || pm != pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        report.max_rel_error = report.max_rel_error.max(relative_error(flat_analytic[i], numeric));
        report.checked += 1;
    }
    Ok(report)
}

/// Picks up to `max` distinct flat indices (all of them when `max` is `None`).
pub fn sample_coords(total: usize, max: Option<usize>, seed: u64) -> Vec<usize> {
    match max {
        Some(m) if m < total => {
            let mut v = sample(&mut rng::child_rng(seed, rng::stream::PROBE, 1), total, m).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..total).collect(),
    }
}

/// Gradient check of a single network on a random batch of two inputs, with
/// the loss `sum(r * output)` for a random projection `r`.
pub fn grad_check(net: &Network, params: &ParamStore, seed: u64, max_coords: Option<usize>) -> Result<GradCheckReport> {
    let mut r = rng::child_rng(seed, rng::stream::PROBE, 0);
    let mut in_shape = vec![2];
    in_shape.extend_from_slice(&net.input);
    let n: usize = in_shape.iter().product();
    let x = Tensor::new(in_shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect())?;
    let (y, cache) = forward(net, params, &x)?;
    let proj = Tensor::new(y.shape().to_vec(), (0..y.len()).map(|_| r.gen_range(-1.0..1.0)).collect())?;
    let (grads, _) = backward(net, params, &cache, &proj)?;
    let coords = sample_coords(params.num_values(), max_coords, seed);
    check_gradient(params, &grads, &coords, |p| {
        let (y, c) = forward(net, p, &x)?;
        let l = y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum();
        Ok((l, c.activation_pattern()))
    })
}
