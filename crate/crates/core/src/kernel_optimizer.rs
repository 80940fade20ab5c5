//! Numerical optimal kernels for the fractional covariance family.
//!
//! A symmetric kernel on `[-1, 1]` is parameterized by `m` bin heights `a`
//! on `[0, 1)`. The objective
//! `f(a) = m^γ (Σa²)^γ (aᵀ A a) / (Σa)^{2γ+2}` with
//! `A_ij = x_i^γ + x_j^γ - ½(x_i + x_j)^γ - ½|x_i - x_j|^γ`, `x_i = (i - ½)/m`,
//! is homogeneous of degree zero in `a` and is minimized by gradient descent
//! with step halving from several random starts.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::simulate::path_rng;

/// Objective with its matrix `A` precomputed.
#[derive(Debug, Clone)]
pub struct StepObjective {
    gamma: f64,
    m: usize,
    a_mat: Vec<f64>,
}

impl StepObjective {
    pub fn new(gamma: f64, m: usize) -> Self {
        let x: Vec<f64> = (1..=m).map(|i| (i as f64 - 0.5) / m as f64).collect();
        let mut a_mat = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                a_mat[i * m + j] = x[i].powf(gamma) + x[j].powf(gamma)
                    - 0.5 * (x[i] + x[j]).powf(gamma)
                    - 0.5 * (x[i] - x[j]).abs().powf(gamma);
            }
        }
        Self { gamma, m, a_mat }
    }

    pub fn matrix(&self, i: usize, j: usize) -> f64 {
        self.a_mat[i * self.m + j]
    }

    fn apply(&self, a: &[f64]) -> Vec<f64> {
        self.a_mat
            .chunks_exact(self.m)
            .map(|row| row.iter().zip(a).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn parts(&self, a: &[f64]) -> Result<(f64, f64, f64, Vec<f64>)> {
        if a.len() != self.m {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                self.m,
                a.len()
            )));
        }
        let s1: f64 = a.iter().sum();
        if s1.abs() < 1e-12 {
            return Err(Error::ZeroMass(s1));
        }
        let s2: f64 = a.iter().map(|v| v * v).sum();
        let aa = self.apply(a);
        let q: f64 = aa.iter().zip(a).map(|(x, y)| x * y).sum();
        Ok((s1, s2, q, aa))
    }

    pub fn value(&self, a: &[f64]) -> Result<f64> {
        let (s1, s2, q, _) = self.parts(a)?;
        let g = self.gamma;
        Ok((self.m as f64).powf(g) * s2.powf(g) * q / (s1 * s1).powf(g + 1.0))
    }

    pub fn gradient(&self, a: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(a)?.1)
    }

    pub fn value_and_gradient(&self, a: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (s1, s2, q, aa) = self.parts(a)?;
        let g = self.gamma;
        let scale = (self.m as f64).powf(g) / (s1 * s1).powf(g + 1.0);
        let s2g = s2.powf(g);
        let s2g1 = s2.powf(g - 1.0);
        let value = scale * s2g * q;
        let grad = a
            .iter()
            .zip(&aa)
            .map(|(ai, aai)| scale * (2.0 * g * ai * s2g1 * q + 2.0 * s2g * aai - (2.0 * g + 2.0) * s2g * q / s1))
            .collect();
        Ok((value, grad))
    }
}

/// `f(a)` for bin heights `a` (length `m`).
pub fn objective_f(a: &[f64], gamma: f64, m: usize) -> Result<f64> {
    StepObjective::new(gamma, m).value(a)
}

/// `∇f(a)`.
pub fn objective_gradient(a: &[f64], gamma: f64, m: usize) -> Result<Vec<f64>> {
    StepObjective::new(gamma, m).gradient(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub final_step: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// Unit-integral step kernel.
    pub kernel: Kernel,
    /// Bin heights of `kernel` on `[0, 1)`.
    pub coeffs: Vec<f64>,
    pub objective: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iter: usize,
    pub min_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            min_step: 1e-10,
        }
    }
}

/// Gradient descent with step halving from `a0`. A step is accepted when it
/// lowers the objective; otherwise it is halved.
pub fn descend(obj: &StepObjective, a0: &[f64], opts: &DescentOptions) -> Result<RestartReport> {
    let m = a0.len() as f64;
    let mut a = a0.to_vec();
    let (mut fa, mut grad) = obj.value_and_gradient(&a)?;
    let initial_objective = fa;
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut step = if gnorm > 0.0 { 1.0 / gnorm } else { 0.0 };
    let mut iterations = 0;
    let mut cand = vec![0.0; a.len()];
    while iterations < opts.max_iter && step >= opts.min_step {
        iterations += 1;
        for ((c, ai), gi) in cand.iter_mut().zip(&a).zip(&grad) {
            *c = ai - step * gi;
        }
        match obj.value_and_gradient(&cand) {
            Ok((fc, gc)) if fc < fa => {
                // f is scale free; keep the mean height at one
                let s: f64 = cand.iter().sum::<f64>() / m;
                a.iter_mut().zip(&cand).for_each(|(x, c)| *x = c / s);
                fa = fc;
                grad = gc.iter().map(|g| g * s).collect();
            }
            _ => step *= 0.5,
        }
    }
    Ok(RestartReport {
        initial_objective,
        final_objective: fa,
        iterations,
        final_step: step,
        coeffs: a,
    })
}

/// Best step kernel over `restarts` random positive starts, each drawn from
/// its own stream of `seed`.
pub fn optimize(gamma: f64, m: usize, restarts: usize, seed: u64) -> Result<OptimizeResult> {
    optimize_with(gamma, m, restarts, seed, &DescentOptions::default())
}

pub fn optimize_with(
    gamma: f64,
    m: usize,
    restarts: usize,
    seed: u64,
    opts: &DescentOptions,
) -> Result<OptimizeResult> {
    if !(1.0..2.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [1, 2), got {gamma}")));
    }
    if m < 8 || restarts == 0 {
        return Err(Error::InvalidArgument("need at least 8 bins and one restart".into()));
    }
    let obj = StepObjective::new(gamma, m);
    let reports = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = path_rng(seed, r as u64);
            let a0: Vec<f64> = (0..m).map(|_| 1.0 - rng.random::<f64>()).collect();
            descend(&obj, &a0, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if r.final_objective < reports[best].final_objective {
            best = i;
        }
    }
    let kernel = Kernel::step(&reports[best].coeffs)?;
    let coeffs = match kernel.kind() {
        crate::kernels::KernelKind::Step { values } => values.clone(),
        _ => unreachable!("step constructor returns a step kernel"),
    };
    Ok(OptimizeResult {
        kernel,
        coeffs,
        objective: reports[best].final_objective,
        best_restart: best,
        restarts: reports,
    })
}

/// Bin heights of `e^{-x/s}` at the bin midpoints, with `s` chosen so that
/// the mass beyond `x = 1` is below `1e-6`.
pub fn truncated_exponential_bins(m: usize) -> Vec<f64> {
    let s = 1.0 / 13.82;
    (1..=m).map(|i| (-((i as f64 - 0.5) / m as f64) / s).exp()).collect()
}
