//! Ground-truth paths: Heston, fractional Gaussian noise by circulant
//! embedding, fractional Ornstein–Uhlenbeck, and prices driven by a given
//! variance path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::estimator::PricePath;

/// Independent stream for replication `index` under a master seed.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Drift `μ_t = α + β V_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl MuSpec {
    pub const ZERO: MuSpec = MuSpec { alpha: 0.0, beta: 0.0 };
}

#[derive(Debug, Clone, PartialEq)]
pub struct HestonConfig {
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
    pub mu: MuSpec,
    pub x0: f64,
    pub v0: f64,
    pub n: usize,
    pub horizon: f64,
    pub substeps: usize,
}

impl HestonConfig {
    /// `κ = 5, θ = 0.04, ξ = 0.5, μ = 0.05 - V/2, X_0 = 1, V_0 = 0.04`.
    pub fn standard(n: usize, horizon: f64) -> Self {
        Self {
            kappa: 5.0,
            theta: 0.04,
            xi: 0.5,
            rho: 0.0,
            mu: MuSpec {
                alpha: 0.05,
                beta: -0.5,
            },
            x0: 1.0,
            v0: 0.04,
            n,
            horizon,
            substeps: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.kappa > 0.0 && self.theta > 0.0 && self.xi >= 0.0) {
            return bad(format!(
                "kappa, theta must be positive and xi non-negative (got {}, {}, {})",
                self.kappa, self.theta, self.xi
            ));
        }
        if !(2.0 * self.kappa * self.theta > self.xi * self.xi) {
            return bad(format!(
                "Feller condition 2 kappa theta > xi^2 fails ({} <= {})",
                2.0 * self.kappa * self.theta,
                self.xi * self.xi
            ));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [-1, 1], got {}", self.rho));
        }
        if !(self.v0 > 0.0) || !(self.horizon > 0.0) || self.n < 2 || self.substeps == 0 {
            return bad("need v0 > 0, horizon > 0, n >= 2 and substeps >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub path: PricePath,
    /// Variance at the observation times.
    pub true_var: Vec<f64>,
    /// `∫ V dt` by the trapezoid rule on the fine grid.
    pub true_iv: f64,
    /// `∫ V² dt` likewise.
    pub true_iq: f64,
}

/// Trapezoid integrals of `V` and `V²` between fine indices `lo` and `hi`.
pub fn trapezoid_moments(fine_var: &[f64], df: f64, lo: usize, hi: usize) -> (f64, f64) {
    let mut iv = 0.0;
    let mut iq = 0.0;
    for w in fine_var[lo..=hi].windows(2) {
        iv += 0.5 * (w[0] + w[1]) * df;
        iq += 0.5 * (w[0] * w[0] + w[1] * w[1]) * df;
    }
    (iv, iq)
}

/// Full-truncation Euler scheme on `n · substeps` fine steps.
pub fn simulate_heston<R: Rng + ?Sized>(cfg: &HestonConfig, rng: &mut R) -> Result<SimulatedPath> {
    cfg.validate()?;
    let steps = cfg.n * cfg.substeps;
    let df = cfg.horizon / steps as f64;
    let sdf = df.sqrt();
    let rho_c = (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut v = cfg.v0;
    let mut x = cfg.x0;
    let mut prices = Vec::with_capacity(cfg.n + 1);
    let mut fine = Vec::with_capacity(steps + 1);
    prices.push(x);
    fine.push(v);
    for s in 1..=steps {
        let vp = v.max(0.0);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let sv = vp.sqrt();
        x += (cfg.mu.alpha + cfg.mu.beta * vp) * df + sv * sdf * z1;
        v += cfg.kappa * (cfg.theta - vp) * df + cfg.xi * sv * sdf * (cfg.rho * z1 + rho_c * z2);
        fine.push(v.max(0.0));
        if s % cfg.substeps == 0 {
            prices.push(x);
        }
    }
    let (true_iv, true_iq) = trapezoid_moments(&fine, df, 0, steps);
    let true_var = fine.iter().step_by(cfg.substeps).copied().collect();
    Ok(SimulatedPath {
        path: PricePath::new(cfg.horizon, prices)?,
        true_var,
        true_iv,
        true_iq,
    })
}

/// Fractional Gaussian noise sample and embedding diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FgnSample {
    pub increments: Vec<f64>,
    /// Number of slightly negative circulant eigenvalues set to zero.
    pub clamped: usize,
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocov(hurst: f64, k: usize) -> f64 {
    let g = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(g) - 2.0 * k.powf(g) + (k - 1.0).abs().powf(g))
}

/// Increments of fractional Brownian motion over `n` equal steps of `[0, T]`
/// by circulant embedding.
pub fn simulate_fbm<R: Rng + ?Sized>(hurst: f64, n: usize, horizon: f64, rng: &mut R) -> Result<FgnSample> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Hurst index must lie in (0, 1), got {hurst}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two increments".into()));
    }
    let m = n.next_power_of_two();
    let size = 2 * m;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            let lag = if j <= m { j } else { size - j };
            Complex::new(fgn_autocov(hurst, lag), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);
    let mut clamped = 0;
    let mut scales = Vec::with_capacity(size);
    for c in &row {
        let mut lambda = c.re;
        if lambda < 0.0 {
            if lambda < -1e-10 {
                return Err(Error::EmbeddingNotPsd(lambda));
            }
            lambda = 0.0;
            clamped += 1;
        }
        scales.push((lambda / size as f64).sqrt());
    }
    if clamped > 0 {
        log::warn!("circulant embedding: clamped {clamped} negative eigenvalues to zero");
    }
    let mut w: Vec<Complex<f64>> = scales
        .iter()
        .map(|s| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex::new(s * a, s * b)
        })
        .collect();
    fft.process(&mut w);
    let scale = (horizon / n as f64).powf(hurst);
    Ok(FgnSample {
        increments: w[..n].iter().map(|c| c.re * scale).collect(),
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FouConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub hurst: f64,
    pub n: usize,
    pub horizon: f64,
    pub substeps: usize,
    /// Value at the start of the burn-in.
    pub y0: f64,
}

/// fOU values on the fine grid of the observation window (`n · substeps + 1`
/// points), after an Euler burn-in of length at least `10/λ`.
pub fn simulate_fou<R: Rng + ?Sized>(cfg: &FouConfig, rng: &mut R) -> Result<Vec<f64>> {
    if !(cfg.lambda > 0.0 && cfg.sigma >= 0.0 && cfg.hurst > 0.5 && cfg.hurst < 1.0) {
        return Err(Error::InvalidArgument(
            "fOU needs lambda > 0, sigma >= 0 and H in (1/2, 1)".into(),
        ));
    }
    let steps = cfg.n * cfg.substeps;
    let df = cfg.horizon / steps as f64;
    let burn = (10.0 / cfg.lambda / df).ceil() as usize;
    let total = burn + steps;
    let noise = simulate_fbm(cfg.hurst, total, total as f64 * df, rng)?;
    let mut y = cfg.y0;
    let mut out = Vec::with_capacity(steps + 1);
    for (i, db) in noise.increments.iter().enumerate() {
        if i >= burn {
            out.push(y);
        }
        y = y * (1.0 - cfg.lambda * df) + cfg.sigma * db;
    }
    out.push(y);
    Ok(out)
}

/// Log prices `dX = μ dt + sqrt(V) dB` on the fine grid of `fine_var`
/// (`n · substeps + 1` points), with `B` independent of `V`, decimated to
/// the `n + 1` observation times.
pub fn synthesize_price<R: Rng + ?Sized>(
    fine_var: &[f64],
    mu: MuSpec,
    n: usize,
    horizon: f64,
    x0: f64,
    rng: &mut R,
) -> Result<SimulatedPath> {
    if n < 2 || fine_var.len() < n + 1 || !(fine_var.len() - 1).is_multiple_of(n) {
        return Err(Error::InvalidArgument(format!(
            "variance path of length {} does not refine {n} steps",
            fine_var.len()
        )));
    }
    if let Some(v) = fine_var.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "variance must be non-negative, got {v}"
        )));
    }
    let steps = fine_var.len() - 1;
    let sub = steps / n;
    let df = horizon / steps as f64;
    let sdf = df.sqrt();
    let mut x = x0;
    let mut prices = Vec::with_capacity(n + 1);
    prices.push(x);
    for (s, &v) in fine_var[..steps].iter().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        x += (mu.alpha + mu.beta * v) * df + v.sqrt() * sdf * z;
        if (s + 1) % sub == 0 {
            prices.push(x);
        }
    }
    let (true_iv, true_iq) = trapezoid_moments(fine_var, df, 0, steps);
    let true_var = fine_var.iter().step_by(sub).copied().collect();
    Ok(SimulatedPath {
        path: PricePath::new(horizon, prices)?,
        true_var,
        true_iv,
        true_iq,
    })
}
