//! Homogeneous covariance structures `C_γ(r, s)` describing the local
//! increments of the variance process, `E[(V_{t+r}-V_t)(V_{t+s}-V_t)] ≈ L(t) C_γ(r, s)`.
//!
//! All closed-form kinds satisfy `C_γ(hr, hs) = h^γ C_γ(r, s)` for `h > 0`
//! and are symmetric in their arguments. The tabulated kind interpolates a
//! user-supplied grid and carries whatever exponent the caller declares.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::numeric::integrate_pieces;

/// Absolute tolerance used for numeric quadratic forms.
pub const QUAD_FORM_TOL: f64 = 1e-10;

/// A covariance surface sampled on a rectangular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCov {
    pub gamma: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major values, `values[i * ys.len() + j] = C(xs[i], ys[j])`.
    pub values: Vec<f64>,
}

impl TabulatedCov {
    pub fn new(gamma: f64, xs: Vec<f64>, ys: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || ys.len() < 2 || values.len() != xs.len() * ys.len() {
            return Err(Error::InvalidArgument(
                "tabulated covariance needs a full grid of at least 2x2 values".into(),
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "tabulated covariance axes must be strictly increasing".into(),
            ));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { gamma, xs, ys, values })
    }

    fn locate(axis: &[f64], v: f64) -> (usize, f64) {
        let v = v.clamp(axis[0], axis[axis.len() - 1]);
        let i = match axis.partition_point(|&a| a <= v) {
            0 => 0,
            p => (p - 1).min(axis.len() - 2),
        };
        let w = (v - axis[i]) / (axis[i + 1] - axis[i]);
        (i, w)
    }

    /// Bilinear interpolation, clamped to the grid edges.
    pub fn eval(&self, r: f64, s: f64) -> f64 {
        let (i, wx) = Self::locate(&self.xs, r);
        let (j, wy) = Self::locate(&self.ys, s);
        let ny = self.ys.len();
        let v = |a: usize, b: usize| self.values[a * ny + b];
        (1.0 - wx) * (1.0 - wy) * v(i, j)
            + wx * (1.0 - wy) * v(i + 1, j)
            + (1.0 - wx) * wy * v(i, j + 1)
            + wx * wy * v(i + 1, j + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovKind {
    /// `min(|r|, |s|) 1{rs >= 0}`, γ = 1.
    BrownianMin,
    /// `½(|r|^{2H} + |s|^{2H} - |r-s|^{2H})`, γ = 2H.
    FractionalBm {
        hurst: f64,
    },
    /// `r^m s^m`, γ = 2m.
    DeterministicSmooth {
        m: u32,
    },
    Tabulated(Arc<TabulatedCov>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovStructure {
    kind: CovKind,
}

impl CovStructure {
    pub fn brownian() -> Self {
        Self {
            kind: CovKind::BrownianMin,
        }
    }

    pub fn fractional(hurst: f64) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fractional structure needs H in (1/2, 1), got {hurst}"
            )));
        }
        Ok(Self {
            kind: CovKind::FractionalBm { hurst },
        })
    }

    pub fn deterministic(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("deterministic structure needs m >= 1".into()));
        }
        Ok(Self {
            kind: CovKind::DeterministicSmooth { m },
        })
    }

    pub fn tabulated(table: TabulatedCov) -> Self {
        Self {
            kind: CovKind::Tabulated(Arc::new(table)),
        }
    }

    /// Structure with exponent γ of the `½(|r|^γ + |s|^γ - |r-s|^γ)` family:
    /// Brownian for γ = 1, fractional for γ ∈ (1, 2).
    pub fn from_gamma(gamma: f64) -> Result<Self> {
        if (gamma - 1.0).abs() < 1e-15 {
            Ok(Self::brownian())
        } else {
            Self::fractional(gamma / 2.0)
        }
    }

    pub fn kind(&self) -> &CovKind {
        &self.kind
    }

    pub fn gamma(&self) -> f64 {
        match &self.kind {
            CovKind::BrownianMin => 1.0,
            CovKind::FractionalBm { hurst } => 2.0 * hurst,
            CovKind::DeterministicSmooth { m } => 2.0 * *m as f64,
            CovKind::Tabulated(t) => t.gamma,
        }
    }

    pub fn is_brownian(&self) -> bool {
        matches!(self.kind, CovKind::BrownianMin)
    }

    /// Evaluates `C_γ(r, s)`.
    pub fn eval(&self, r: f64, s: f64) -> f64 {
        match &self.kind {
            CovKind::BrownianMin => {
                // the indicator is closed: rs = 0 counts as same sign
                if r * s >= 0.0 {
                    r.abs().min(s.abs())
                } else {
                    0.0
                }
            }
            CovKind::FractionalBm { hurst } => {
                let g = 2.0 * hurst;
                0.5 * (r.abs().powf(g) + s.abs().powf(g) - (r - s).abs().powf(g))
            }
            CovKind::DeterministicSmooth { m } => {
                let m = *m as i32;
                r.powi(m) * s.powi(m)
            }
            CovKind::Tabulated(t) => t.eval(r, s),
        }
    }

    /// `∬ K(x) K(y) C_γ(x, y) dx dy`, in closed form where the kernel provides
    /// one and by adaptive iterated quadrature otherwise.
    pub fn quadratic_form(&self, kernel: &Kernel) -> Result<f64> {
        if let Some(v) = kernel.closed_form_quadratic(self) {
            return Ok(v);
        }
        let key = match &self.kind {
            CovKind::BrownianMin => 1,
            CovKind::FractionalBm { hurst } => hurst.to_bits(),
            CovKind::DeterministicSmooth { m } => 2 + *m as u64,
            CovKind::Tabulated(_) => return self.quadratic_form_numeric(kernel),
        };
        kernel.cached_quadratic(key, || self.quadratic_form_numeric(kernel))
    }

    /// Iterated adaptive quadrature of the quadratic form, ignoring any closed
    /// form. Used for non-standard kernels and as an independent check.
    pub fn quadratic_form_numeric(&self, kernel: &Kernel) -> Result<f64> {
        let (lo, hi) = kernel.effective_support();
        let mut outer_bp = kernel.breakpoints();
        outer_bp.push(0.0);
        let inner_tol = QUAD_FORM_TOL * 1e-2;
        let failure = std::cell::Cell::new(None);
        let outer = |x: f64| {
            let kx = kernel.eval(x);
            if kx == 0.0 {
                return 0.0;
            }
            let mut bp = outer_bp.clone();
            bp.extend_from_slice(&[x, -x]);
            match integrate_pieces(|y| kernel.eval(y) * self.eval(x, y), lo, hi, &bp, inner_tol) {
                Ok(v) => kx * v,
                Err(e) => {
                    failure.set(Some(e));
                    0.0
                }
            }
        };
        let v = integrate_pieces(outer, lo, hi, &outer_bp, QUAD_FORM_TOL)?;
        match failure.take() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Gram matrix `G_ij = C_γ(x_i, x_j)` on the given nodes.
    pub fn gram(&self, nodes: &[f64]) -> nalgebra::DMatrix<f64> {
        let n = nodes.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| self.eval(nodes[i], nodes[j]))
    }
}

/// Outcome of a randomized non-negative-definiteness probe.
#[derive(Debug, Clone, PartialEq)]
pub struct MinQuadFormReport {
    /// Smallest observed `cᵀ G c / ‖c‖²`.
    pub min_normalized: f64,
    pub trials: usize,
    /// Coefficient vector attaining the minimum.
    pub argmin: Vec<f64>,
}

impl MinQuadFormReport {
    pub fn passes(&self) -> bool {
        self.min_normalized >= -1e-9
    }
}

/// Evaluates `Σ c_i c_j C(x_i, x_j) / ‖c‖²` for a given coefficient vector.
pub fn normalized_quadratic(cov: &CovStructure, nodes: &[f64], coeffs: &[f64]) -> f64 {
    let mut q = 0.0;
    for (i, &xi) in nodes.iter().enumerate() {
        for (j, &xj) in nodes.iter().enumerate() {
            q += coeffs[i] * coeffs[j] * cov.eval(xi, xj);
        }
    }
    let norm2: f64 = coeffs.iter().map(|c| c * c).sum();
    q / norm2
}

/// Draws `trials` Gaussian coefficient vectors and reports the minimum
/// normalized quadratic form on the node set.
pub fn nn_definiteness_check(
    cov: &CovStructure,
    nodes: &[f64],
    trials: usize,
    rng_seed: u64,
) -> Result<MinQuadFormReport> {
    let mut sorted = nodes.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("nodes must be distinct".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best = MinQuadFormReport {
        min_normalized: f64::INFINITY,
        trials,
        argmin: vec![],
    };
    for _ in 0..trials {
        let c: Vec<f64> = (0..nodes.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let v = normalized_quadratic(cov, nodes, &c);
        if v < best.min_normalized {
            best.min_normalized = v;
            best.argmin = c;
        }
    }
    Ok(best)
}
