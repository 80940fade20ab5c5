//! Kernel spot-variance estimator on a uniform observation grid.
//!
//! With increments `r_j = (X_{t_{j+1}} - X_{t_j})^2`, `j = 0..n-1`, the
//! estimate at `τ` is `Σ_j K_h(t_j - τ) r_j`, optionally divided by the
//! normalizer `Δ Σ_j K_h(t_j - τ)`. Weights attach at left endpoints.
//!
//! Grid evaluation uses O(n) recurrences for the exponential kernel, prefix
//! sums for the uniform kernel and windowed summation for other compactly
//! supported kernels.

use std::io::Read;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::numeric::{csum, CompensatedSum};

/// Normalizers at or below this value are treated as degenerate.
pub const NORMALIZER_FLOOR: f64 = 1e-300;

/// Uniformly spaced log prices `X_{t_0}, ..., X_{t_n}` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePath {
    horizon: f64,
    log_prices: Vec<f64>,
    sq_increments: Vec<f64>,
}

impl PricePath {
    pub fn new(horizon: f64, log_prices: Vec<f64>) -> Result<Self> {
        if log_prices.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "a price path needs n >= 2 increments, got {}",
                log_prices.len().saturating_sub(1)
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if let Some(i) = log_prices.iter().position(|x| !x.is_finite()) {
            return Err(Error::Data(format!("log price at index {i} is not finite")));
        }
        let sq_increments = log_prices.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
        Ok(Self {
            horizon,
            log_prices,
            sq_increments,
        })
    }

    /// Number of increments.
    pub fn n(&self) -> usize {
        self.sq_increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.horizon / self.n() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.horizon / self.n() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n()).map(|i| self.time(i)).collect()
    }

    pub fn log_prices(&self) -> &[f64] {
        &self.log_prices
    }

    /// `(X_{t_{j+1}} - X_{t_j})^2` for `j = 0..n-1`.
    pub fn sq_increments(&self) -> &[f64] {
        &self.sq_increments
    }

    pub fn map_prices(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.horizon, self.log_prices.iter().map(|&x| f(x)).collect())
    }

    /// Reads `time,log_price[,true_var]` CSV. Times must be uniformly spaced
    /// within `1e-9 Δ`; the horizon is `t_n - t_0`.
    pub fn read_csv<R: Read>(input: R) -> Result<(Self, Option<Vec<f64>>)> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr.headers().map_err(|e| Error::Data(format!("line 1: {e}")))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let tcol = col("time").ok_or_else(|| Error::Data("line 1: missing column 'time'".into()))?;
        let xcol = col("log_price").ok_or_else(|| Error::Data("line 1: missing column 'log_price'".into()))?;
        let vcol = col("true_var");
        let mut times = Vec::new();
        let mut prices = Vec::new();
        let mut vars = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line().to_string()).unwrap_or_else(|| "?".into());
                Error::Data(format!("line {line}: {e}"))
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let field = |c: usize, name: &str| -> Result<f64> {
                let raw = rec
                    .get(c)
                    .ok_or_else(|| Error::Data(format!("line {line}: missing field '{name}'")))?;
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::Data(format!("line {line}: cannot parse {name} '{raw}'")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Data(format!("line {line}: {name} is not finite")))
                }
            };
            times.push((field(tcol, "time")?, line));
            prices.push(field(xcol, "log_price")?);
            if let Some(c) = vcol {
                vars.push(field(c, "true_var")?);
            }
        }
        if times.len() < 3 {
            return Err(Error::Data(format!(
                "need at least 3 observations, got {}",
                times.len()
            )));
        }
        let n = times.len() - 1;
        let t0 = times[0].0;
        let horizon = times[n].0 - t0;
        if !(horizon > 0.0) {
            return Err(Error::Data("times must be increasing".into()));
        }
        let delta = horizon / n as f64;
        for (i, &(t, line)) in times.iter().enumerate() {
            let expected = t0 + i as f64 * delta;
            if (t - expected).abs() > 1e-9 * delta {
                return Err(Error::Data(format!(
                    "line {line}: time {t} deviates from the uniform grid value {expected} (spacing {delta})"
                )));
            }
        }
        let path = Self::new(horizon, prices)?;
        Ok((path, vcol.map(|_| vars)))
    }
}

/// `Σ (ΔX)^2`.
pub fn realized_variance(path: &PricePath) -> f64 {
    csum(path.sq_increments().iter().copied())
}

/// `(3Δ)^{-1} Σ (ΔX)^4`.
pub fn realized_quarticity(path: &PricePath) -> f64 {
    csum(path.sq_increments().iter().map(|r| r * r)) / (3.0 * path.delta())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sided {
    Two,
    /// Increments starting at or after `τ` (`j > i` in one-based increment labels).
    Left,
    /// Increments starting strictly before `τ` (`j <= i`).
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotVolSeries {
    pub times: Vec<f64>,
    pub estimates: Vec<f64>,
    pub bandwidth: f64,
    pub kernel: String,
    pub boundary_corrected: bool,
    pub sided: Sided,
    /// Kernel evaluations or recurrence updates performed.
    pub work: usize,
}

fn direct_sums(path: &PricePath, kernel: &Kernel, h: f64, tau: f64, range: std::ops::Range<usize>) -> (f64, f64) {
    let n = path.n();
    let r = path.sq_increments();
    let (lo, hi) = match kernel.compact_radius() {
        Some(b) => {
            let lo = ((tau - b * h) / path.delta()).floor().max(0.0) as usize;
            let hi = (((tau + b * h) / path.delta()).ceil() as usize + 1).min(n);
            (lo.max(range.start), hi.min(range.end))
        }
        None => (range.start, range.end),
    };
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (j, rj) in r.iter().enumerate().take(hi.max(lo)).skip(lo) {
        let w = kernel.eval_scaled(path.time(j) - tau, h);
        num.add(w * rj);
        den.add(w);
    }
    (num.value(), den.value() * path.delta())
}

fn finish(num: f64, den: f64, tau: f64, boundary_corrected: bool) -> Result<f64> {
    if !boundary_corrected {
        return Ok(num);
    }
    if !(den > NORMALIZER_FLOOR) {
        return Err(Error::DegenerateWeights { tau, normalizer: den });
    }
    Ok(num / den)
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "bandwidth must be positive and finite, got {h}"
        )))
    }
}

/// Estimate at a single time `τ` by direct summation.
pub fn spot_vol_at(path: &PricePath, kernel: &Kernel, h: f64, tau: f64, boundary_corrected: bool) -> Result<f64> {
    check_bandwidth(h)?;
    let (num, den) = direct_sums(path, kernel, h, tau, 0..path.n());
    finish(num, den, tau, boundary_corrected)
}

/// Partial sums of the exponential estimator at a grid point `τ = t_k`:
/// `minus` over increments starting before `τ`, `star` for the increment
/// starting at `τ`, `plus` for those starting after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpState {
    pub minus: f64,
    pub star: f64,
    pub plus: f64,
    pub h: f64,
}

impl ExpState {
    /// State at `t_0`.
    pub fn initial(path: &PricePath, h: f64) -> Self {
        let r = path.sq_increments();
        let c = 0.5 / h;
        let rho = (-path.delta() / h).exp();
        let mut plus = 0.0;
        for j in (1..r.len()).rev() {
            plus = rho * (plus + c * r[j]);
        }
        Self {
            minus: 0.0,
            star: c * r[0],
            plus,
            h,
        }
    }

    pub fn estimate(&self) -> f64 {
        self.minus + self.star + self.plus
    }
}

/// Moves the exponential state from `τ` to `τ + Δ`, where
/// `next_increment_sq` is the squared increment starting at `τ + Δ`.
pub fn exp_recurrence_step(state: ExpState, next_increment_sq: f64, delta_over_h: f64) -> ExpState {
    let decay = (-delta_over_h).exp();
    let star = next_increment_sq * 0.5 / state.h;
    ExpState {
        minus: decay * (state.minus + state.star),
        star,
        plus: (state.plus - decay * star) / decay,
        h: state.h,
    }
}

/// O(1) online update of the exponentially weighted sum of past increments.
pub fn online_update(prev_estimate: f64, new_increment_sq: f64, h: f64, delta: f64) -> f64 {
    (-delta / h).exp() * (prev_estimate + new_increment_sq / (2.0 * h))
}

/// Exponential-kernel numerator and normalizer parts on the grid via the
/// backward `plus` pass and forward `minus` pass. Returns
/// `(minus, star, plus)` for the data and for unit increments.
struct ExpPasses {
    num: [Vec<f64>; 3],
    den: [Vec<f64>; 3],
}

fn exp_passes(path: &PricePath, h: f64) -> ExpPasses {
    let n = path.n();
    let r = path.sq_increments();
    let c = 0.5 / h;
    let rho = (-path.delta() / h).exp();
    let mut num = [vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]];
    let mut den = [vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]];
    for k in 0..n {
        num[1][k] = c * r[k];
        den[1][k] = c;
    }
    for k in 0..n {
        num[0][k + 1] = rho * (num[0][k] + num[1][k]);
        den[0][k + 1] = rho * (den[0][k] + den[1][k]);
    }
    for k in (0..n).rev() {
        num[2][k] = rho * (num[2][k + 1] + num[1][k + 1]);
        den[2][k] = rho * (den[2][k + 1] + den[1][k + 1]);
    }
    ExpPasses { num, den }
}

fn uniform_window(path: &PricePath, kernel: &Kernel, h: f64) -> usize {
    // largest d with K_h(dΔ) > 0
    let delta = path.delta();
    let mut d = (h / delta).floor() as usize;
    while d > 0 && kernel.eval_scaled(d as f64 * delta, h) == 0.0 {
        d -= 1;
    }
    while kernel.eval_scaled((d + 1) as f64 * delta, h) != 0.0 {
        d += 1;
    }
    d
}

/// Prefix sums kept as a sum and a compensation term.
fn prefix_sums(r: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(r.len() + 1);
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    out.push((0.0, 0.0));
    for &x in r {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
        out.push((s, c));
    }
    out
}

fn range_sum(p: &[(f64, f64)], lo: usize, hi: usize) -> f64 {
    (p[hi].0 - p[lo].0) + (p[hi].1 - p[lo].1)
}

/// Spot-variance estimates at every grid point `t_0, ..., t_n`.
pub fn spot_vol_grid(path: &PricePath, kernel: &Kernel, h: f64, boundary_corrected: bool) -> Result<SpotVolSeries> {
    check_bandwidth(h)?;
    let times = path.times();
    let (pairs, work) = grid_sums(path, kernel, h);
    let estimates = pairs
        .iter()
        .zip(&times)
        .map(|(&(num, den), &tau)| finish(num, den, tau, boundary_corrected))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SpotVolSeries {
        times,
        estimates,
        bandwidth: h,
        kernel: kernel.name(),
        boundary_corrected,
        sided: Sided::Two,
        work,
    })
}

/// Numerator `Σ K_h(t_j - t_k) r_j` and normalizer `Δ Σ K_h(t_j - t_k)` at
/// every grid point, with the amount of work spent.
pub(crate) fn grid_sums(path: &PricePath, kernel: &Kernel, h: f64) -> (Vec<(f64, f64)>, usize) {
    let n = path.n();
    let delta = path.delta();
    let times = path.times();
    if kernel.is_exponential() {
        let p = exp_passes(path, h);
        let v = (0..=n)
            .map(|k| {
                let num = p.num[0][k] + p.num[1][k] + p.num[2][k];
                let den = (p.den[0][k] + p.den[1][k] + p.den[2][k]) * delta;
                (num, den)
            })
            .collect();
        (v, 2 * n)
    } else if kernel.is_uniform() {
        let d = uniform_window(path, kernel, h);
        let pre = prefix_sums(path.sq_increments());
        let w = 0.5 / h;
        let v = (0..=n)
            .map(|k| {
                // trim the edges with the same time differences used by direct summation
                let tau = times[k];
                let mut lo = k.saturating_sub(d + 1);
                let mut hi = (k + d + 2).min(n);
                while lo < hi && kernel.eval_scaled(times[lo] - tau, h) == 0.0 {
                    lo += 1;
                }
                while hi > lo && kernel.eval_scaled(times[hi - 1] - tau, h) == 0.0 {
                    hi -= 1;
                }
                (w * range_sum(&pre, lo, hi), w * (hi - lo) as f64 * delta)
            })
            .collect();
        (v, n + 1)
    } else {
        let v: Vec<(f64, f64)> = (0..=n)
            .into_par_iter()
            .map(|k| direct_sums(path, kernel, h, times[k], 0..n))
            .collect();
        let work = match kernel.compact_radius() {
            Some(b) => (n + 1) * (2.0 * b * h / delta + 1.0) as usize,
            None => (n + 1) * n,
        };
        (v, work)
    }
}

fn side_range(i: usize, n: usize, side: Sided) -> std::ops::Range<usize> {
    match side {
        Sided::Left => i..n,
        Sided::Right => 0..i.min(n),
        Sided::Two => 0..n,
    }
}

/// Normalized one-sided estimate at the grid point `t_i`.
pub fn one_sided(path: &PricePath, kernel: &Kernel, h: f64, i: usize, side: Sided) -> Result<f64> {
    check_bandwidth(h)?;
    let range = side_range(i, path.n(), side);
    if range.is_empty() {
        return Err(Error::EmptySide { index: i });
    }
    let tau = path.time(i);
    let (num, den) = direct_sums(path, kernel, h, tau, range);
    finish(num, den, tau, true)
}

/// One-sided estimates at every grid point. Points with an empty side or a
/// degenerate normalizer are NaN (the left series at `t_n`, the right
/// series at `t_0`).
pub fn one_sided_series(path: &PricePath, kernel: &Kernel, h: f64, side: Sided) -> Result<Vec<f64>> {
    check_bandwidth(h)?;
    let n = path.n();
    let delta = path.delta();
    let ratio = |num: f64, den: f64| if den > NORMALIZER_FLOOR { num / den } else { f64::NAN };
    if kernel.is_exponential() {
        let p = exp_passes(path, h);
        return Ok((0..=n)
            .map(|k| match side {
                Sided::Left => ratio(p.num[1][k] + p.num[2][k], (p.den[1][k] + p.den[2][k]) * delta),
                Sided::Right => ratio(p.num[0][k], p.den[0][k] * delta),
                Sided::Two => ratio(
                    p.num[0][k] + p.num[1][k] + p.num[2][k],
                    (p.den[0][k] + p.den[1][k] + p.den[2][k]) * delta,
                ),
            })
            .collect());
    }
    Ok((0..=n)
        .into_par_iter()
        .map(|k| {
            let range = side_range(k, n, side);
            if range.is_empty() {
                return f64::NAN;
            }
            let (num, den) = direct_sums(path, kernel, h, path.time(k), range);
            ratio(num, den)
        })
        .collect())
}
