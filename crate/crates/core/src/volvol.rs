//! Two-time-scale realized volatility of volatility (TSRVV).
//!
//! Differences of one-sided spot-variance estimates at a coarse lag `k` and
//! at lag one are combined as
//! `(1/k) Σ_{i=b}^{n-k-b} (σ̂²_r(t_{i+k}) - σ̂²_l(t_i))²
//!   - (n-k+1)/(nk) Σ_{i=b+k-1}^{n-k-b} (σ̂²_r(t_{i+1}) - σ̂²_l(t_i))²`.
//! The left estimate uses increments starting at or after `t_i`, the right
//! estimate those starting before it. With that labelling these
//! differences pair two windows that overlap on `[t_i, t_{i+k}]`;
//! [`Pairing::Disjoint`] instead pairs the estimate from data after `t_{i+k}`
//! with the one from data before `t_i`.

use crate::error::{Error, Result};
use crate::estimator::{one_sided_series, PricePath, Sided};
use crate::kernels::Kernel;
use crate::numeric::csum;

#[derive(Debug, Clone, PartialEq)]
pub struct VolVolEstimate {
    /// Estimated `∫ g_t² dt` over `[t_b, T - t_b]`.
    pub ivv: f64,
    pub k: usize,
    pub b: usize,
    pub used_fallback: bool,
    pub first_term: f64,
    pub correction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMode {
    /// `c n^{2/3}`.
    TwoThirds,
    /// `c n^{3/4}`.
    ThreeQuarters,
}

/// Coarse scale `max(2, round(c n^p))` with `p = 2/3` or `3/4`.
pub fn default_k(n: usize, mode: KMode, c: f64) -> usize {
    let p = match mode {
        KMode::TwoThirds => 2.0 / 3.0,
        KMode::ThreeQuarters => 0.75,
    };
    ((c * (n as f64).powf(p)).round() as usize).max(2)
}

/// Boundary trim `max(1, round(0.05 n))`.
pub fn default_b(n: usize) -> usize {
    ((0.05 * n as f64).round() as usize).max(1)
}

/// Which one-sided estimates enter the differences at lag `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pairing {
    /// `σ̂²_r(t_{i+k}) - σ̂²_l(t_i)`.
    Overlapping,
    /// `σ̂²_l(t_{i+k}) - σ̂²_r(t_i)`.
    #[default]
    Disjoint,
}

impl Pairing {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "overlapping" => Ok(Self::Overlapping),
            "disjoint" => Ok(Self::Disjoint),
            _ => Err(Error::Config(format!(
                "unknown pairing {name:?} (expected overlapping or disjoint)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Overlapping => "overlapping",
            Self::Disjoint => "disjoint",
        }
    }
}

fn check_scales(n: usize, k: usize, b: usize) -> Result<()> {
    if k < 2 || 2 * b + k >= n {
        return Err(Error::InvalidScales { k, b, n });
    }
    Ok(())
}

fn sides(path: &PricePath, kernel: &Kernel, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let left = one_sided_series(path, kernel, h, Sided::Left)?;
    let right = one_sided_series(path, kernel, h, Sided::Right)?;
    Ok((left, right))
}

fn sq_diffs(left: &[f64], right: &[f64], lag: usize, range: std::ops::RangeInclusive<usize>) -> Result<f64> {
    let mut terms = Vec::with_capacity(range.clone().count());
    for i in range {
        let d = right[i + lag] - left[i];
        if !d.is_finite() {
            return Err(Error::DegenerateWeights {
                tau: i as f64,
                normalizer: 0.0,
            });
        }
        terms.push(d * d);
    }
    Ok(csum(terms))
}

fn paired_sq_diffs(
    left: &[f64],
    right: &[f64],
    lag: usize,
    range: std::ops::RangeInclusive<usize>,
    pairing: Pairing,
) -> Result<f64> {
    match pairing {
        Pairing::Overlapping => sq_diffs(left, right, lag, range),
        Pairing::Disjoint => sq_diffs(right, left, lag, range),
    }
}

/// TSRVV with coarse scale `k` and boundary trim `b`, pairing the one-sided
/// estimates exactly as in the defining formula. Falls back to the first
/// term alone when the bias-corrected value is not positive.
pub fn tsrvv(path: &PricePath, kernel: &Kernel, h: f64, k: usize, b: usize) -> Result<VolVolEstimate> {
    tsrvv_paired(path, kernel, h, k, b, Pairing::Overlapping)
}

/// [`tsrvv`] with a choice of [`Pairing`].
pub fn tsrvv_paired(
    path: &PricePath,
    kernel: &Kernel,
    h: f64,
    k: usize,
    b: usize,
    pairing: Pairing,
) -> Result<VolVolEstimate> {
    let n = path.n();
    check_scales(n, k, b)?;
    let (left, right) = sides(path, kernel, h)?;
    let last = n - k - b;
    let first_term = paired_sq_diffs(&left, &right, k, b..=last, pairing)? / k as f64;
    let second = if b + k - 1 <= last {
        paired_sq_diffs(&left, &right, 1, (b + k - 1)..=last, pairing)?
    } else {
        0.0
    };
    let correction = (n - k + 1) as f64 / (n as f64 * k as f64) * second;
    let corrected = first_term - correction;
    let (ivv, used_fallback) = if corrected > 0.0 {
        (corrected, false)
    } else {
        (first_term, true)
    };
    Ok(VolVolEstimate {
        ivv,
        k,
        b,
        used_fallback,
        first_term,
        correction,
    })
}

/// Variant with sums over the full index range and a `1/k` factor on both
/// terms, no boundary trim and no fallback.
#[doc(hidden)]
pub fn tsrvv_full_range(path: &PricePath, kernel: &Kernel, h: f64, k: usize) -> Result<f64> {
    let n = path.n();
    check_scales(n, k, 0)?;
    let (left, right) = sides(path, kernel, h)?;
    let coarse = sq_diffs(&left, &right, k, 0..=n - k)?;
    let fine = sq_diffs(&left, &right, 1, 0..=n - 1)?;
    Ok((coarse - fine) / k as f64)
}

/// `Σ (ΔX)²` over increments inside `[t_b, t_{n-b}]`.
pub fn window_iv(path: &PricePath, b: usize) -> f64 {
    let r = path.sq_increments();
    let n = r.len();
    if 2 * b >= n {
        return 0.0;
    }
    csum(r[b..n - b].iter().copied())
}

/// Heston vol-of-vol `ξ̂ = sqrt(IVV / IV)`.
pub fn heston_xi(ivv: f64, iv_hat: f64) -> f64 {
    if ivv <= 0.0 {
        0.0
    } else {
        (ivv / iv_hat).sqrt()
    }
}
