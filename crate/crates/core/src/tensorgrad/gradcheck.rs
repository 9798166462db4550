//! Central finite-difference gradient checking.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

use super::graph::{Graph, Var};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Above this many coordinates a seeded random subset of this size is checked.
    pub max_coords: usize,
    pub seed: u64,
    /// Denominator floor of the relative error, so gradients that are zero
    /// up to rounding do not blow the ratio up.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coords: 10_000,
            seed: 0,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
    /// (input index, flat coordinate, analytic, numeric) of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_rel_err <= tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare the analytic gradient of a scalar-valued graph against central
/// differences, with respect to every input tensor.
///
/// `build` receives the graph and one handle per input and must return the
/// scalar output. It is called once with trainable inputs and then twice per
/// checked coordinate with constant inputs.
pub fn grad_check<F>(build: F, inputs: &[Tensor], opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = build(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    for (i, a) in analytic.iter().enumerate() {
        if !a.all_finite() {
            return Err(Error::NonFinite(format!("analytic gradient of input {i}")));
        }
    }

    let eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.constant(t.clone())).collect();
        let out = build(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let total: usize = inputs.iter().map(Tensor::len).sum();
    let mut coords: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.len()).map(move |j| (i, j)))
        .collect();
    if total > opts.max_coords {
        let mut rng = SplitMix64::new(opts.seed);
        rng.shuffle(&mut coords);
        coords.truncate(opts.max_coords);
        coords.sort_unstable();
    }

    let mut work = inputs.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        coords_checked: 0,
        worst: None,
    };
    for (i, j) in coords {
        let orig = work[i].data()[j];
        work[i].data_mut()[j] = orig + opts.step;
        let plus = eval(&work)?;
        work[i].data_mut()[j] = orig - opts.step;
        let minus = eval(&work)?;
        work[i].data_mut()[j] = orig;
        let numeric = (plus - minus) / (2.0 * opts.step);
        let a = analytic[i].data()[j];
        let err = relative_error(a, numeric, opts.floor);
        if err > report.max_rel_err || report.worst.is_none() {
            report.max_rel_err = report.max_rel_err.max(err);
            report.worst = Some((i, j, a, numeric));
        }
        report.coords_checked += 1;
    }
    Ok(report)
}
