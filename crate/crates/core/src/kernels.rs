//! Kernel functions, the constants entering the bandwidth formulas, higher
//! order constructions and admissibility checks.
//!
//! Conventions:
//! - `K_h(x) = K(x / h) / h`.
//! - Every stored constant is a full-line integral over ℝ. Tabulated
//!   half-line values for symmetric kernels are half of these.
//! - Step kernels live on `[0, 1)` in bins of width `1/m` and are mirrored
//!   to `(-1, 1)`; their coefficients are renormalized at construction so
//!   the mirrored kernel integrates to one.

use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::covariance::{CovKind, CovStructure};
use crate::error::{Error, Result};
use crate::numeric::{integrate_pieces, Poly};

/// Absolute tolerance for kernel quadrature.
pub const KERNEL_QUAD_TOL: f64 = 1e-12;

/// Exponential kernel tail `½e^{-|x|}` is below 1e-14 beyond this point.
const EXP_TRUNCATION: f64 = 34.0;

type KernelFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A user-defined kernel given by a closure.
#[derive(Clone)]
pub struct CustomKernel {
    pub name: String,
    pub func: Arc<KernelFn>,
    /// Open support `(A, B)`, possibly infinite.
    pub support: (f64, f64),
    /// Finite interval outside of which the kernel is negligible.
    pub effective: (f64, f64),
    /// Points where the kernel or its derivative may jump.
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("effective", &self.effective)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum KernelKind {
    /// `½ e^{-|x|}`.
    Exponential,
    /// `½ 1{|x| < 1}`.
    Uniform,
    /// `(1 - |x|) 1{|x| < 1}`.
    Triangular,
    /// `¾ (1 - x²) 1{|x| < 1}`.
    Epanechnikov,
    /// `(p+1)/(2p) (1 - |x|^p) 1{|x| <= 1}`.
    OrderP {
        p: u32,
    },
    /// `a (x^{2q} + Σ λ_i x^{2i})` on `[-1, 1]`, stored as the full polynomial.
    ConstrainedOrder {
        q: u32,
        poly: Poly,
    },
    /// Normalized bin values on `[0, 1)`, mirrored.
    Step {
        values: Vec<f64>,
    },
    Custom(CustomKernel),
}

#[derive(Debug, Default)]
struct ConstCache {
    l2: OnceLock<f64>,
    bm_quad: OnceLock<f64>,
    /// Numerical quadratic forms keyed by covariance.
    quad: Mutex<Vec<(u64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct Kernel {
    kind: KernelKind,
    cache: Arc<ConstCache>,
}

impl Kernel {
    fn from_kind(kind: KernelKind) -> Self {
        Self {
            kind,
            cache: Arc::new(ConstCache::default()),
        }
    }

    /// Memoized value for covariance `key`, computed by `f` on a miss.
    pub(crate) fn cached_quadratic(&self, key: u64, f: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(&(_, v)) = self
            .cache
            .quad
            .lock()
            .expect("cache lock")
            .iter()
            .find(|(k, _)| *k == key)
        {
            return Ok(v);
        }
        let v = f()?;
        self.cache.quad.lock().expect("cache lock").push((key, v));
        Ok(v)
    }

    pub fn exponential() -> Self {
        Self::from_kind(KernelKind::Exponential)
    }

    pub fn uniform() -> Self {
        Self::from_kind(KernelKind::Uniform)
    }

    pub fn triangular() -> Self {
        Self::from_kind(KernelKind::Triangular)
    }

    pub fn epanechnikov() -> Self {
        Self::from_kind(KernelKind::Epanechnikov)
    }

    /// Symmetric step kernel from raw (unnormalized) bin coefficients on `[0, 1)`.
    pub fn step(coeffs: &[f64]) -> Result<Self> {
        let m = coeffs.len();
        if m == 0 {
            return Err(Error::InvalidArgument("step kernel needs at least one bin".into()));
        }
        let total: f64 = coeffs.iter().sum();
        if total.abs() < 1e-12 {
            return Err(Error::ZeroMass(total));
        }
        // mirrored integral is 2 Σ c_i / m
        let scale = m as f64 / (2.0 * total);
        Ok(Self::from_kind(KernelKind::Step {
            values: coeffs.iter().map(|c| c * scale).collect(),
        }))
    }

    pub fn custom(
        name: impl Into<String>,
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
        effective: (f64, f64),
        breakpoints: Vec<f64>,
    ) -> Self {
        Self::from_kind(KernelKind::Custom(CustomKernel {
            name: name.into(),
            func: Arc::new(func),
            support,
            effective,
            breakpoints,
        }))
    }

    /// Parses the CLI names `exponential`, `uniform`, `triangular`,
    /// `epanechnikov`, `order-p:<p>` and `constrained:<q>`.
    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        match lower.as_str() {
            "exponential" | "exp" => Ok(Self::exponential()),
            "uniform" | "unif" => Ok(Self::uniform()),
            "triangular" | "triangle" | "tri" => Ok(Self::triangular()),
            "epanechnikov" | "epan" => Ok(Self::epanechnikov()),
            other => {
                if let Some(p) = other.strip_prefix("order-p:") {
                    let p: u32 = p
                        .parse()
                        .map_err(|_| Error::Config(format!("bad kernel order in '{name}'")))?;
                    order_p_kernel(p)
                } else if let Some(q) = other.strip_prefix("constrained:") {
                    let q: u32 = q
                        .parse()
                        .map_err(|_| Error::Config(format!("bad kernel order in '{name}'")))?;
                    constrained_order_kernel(q)
                } else {
                    Err(Error::Config(format!("unknown kernel '{name}'")))
                }
            }
        }
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        match &self.kind {
            KernelKind::Exponential => "exponential".into(),
            KernelKind::Uniform => "uniform".into(),
            KernelKind::Triangular => "triangular".into(),
            KernelKind::Epanechnikov => "epanechnikov".into(),
            KernelKind::OrderP { p } => format!("order-p:{p}"),
            KernelKind::ConstrainedOrder { q, .. } => format!("constrained:{q}"),
            KernelKind::Step { values } => format!("step:{}", values.len()),
            KernelKind::Custom(c) => c.name.clone(),
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self.kind, KernelKind::Exponential)
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, KernelKind::Uniform)
    }

    /// `K(x)`; zero outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        match &self.kind {
            KernelKind::Exponential => 0.5 * (-ax).exp(),
            KernelKind::Uniform => {
                if ax < 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            KernelKind::Triangular => (1.0 - ax).max(0.0),
            KernelKind::Epanechnikov => {
                if ax < 1.0 {
                    0.75 * (1.0 - x * x)
                } else {
                    0.0
                }
            }
            KernelKind::OrderP { p } => {
                if ax <= 1.0 {
                    let p = *p as f64;
                    (p + 1.0) / (2.0 * p) * (1.0 - ax.powf(p))
                } else {
                    0.0
                }
            }
            KernelKind::ConstrainedOrder { poly, .. } => {
                if ax <= 1.0 {
                    poly.eval(ax)
                } else {
                    0.0
                }
            }
            KernelKind::Step { values } => {
                if ax < 1.0 {
                    let m = values.len();
                    values[((ax * m as f64) as usize).min(m - 1)]
                } else {
                    0.0
                }
            }
            KernelKind::Custom(c) => {
                if x > c.support.0 && x < c.support.1 {
                    (c.func)(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// `K_h(x) = K(x/h)/h`.
    #[inline]
    pub fn eval_scaled(&self, x: f64, h: f64) -> f64 {
        self.eval(x / h) / h
    }

    /// Open support `(A, B)`.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            KernelKind::Exponential => (f64::NEG_INFINITY, f64::INFINITY),
            KernelKind::Custom(c) => c.support,
            _ => (-1.0, 1.0),
        }
    }

    /// Finite integration domain.
    pub fn effective_support(&self) -> (f64, f64) {
        match &self.kind {
            KernelKind::Exponential => (-EXP_TRUNCATION, EXP_TRUNCATION),
            KernelKind::Custom(c) => c.effective,
            _ => (-1.0, 1.0),
        }
    }

    /// Radius `B` with `K(x) = 0` for `|x| >= B`, if the support is bounded.
    pub fn compact_radius(&self) -> Option<f64> {
        let (a, b) = self.support();
        if a.is_finite() && b.is_finite() {
            Some(a.abs().max(b.abs()))
        } else {
            None
        }
    }

    /// Points of non-smoothness, used to split quadrature domains.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            KernelKind::Exponential => vec![0.0],
            KernelKind::Step { values } => {
                let m = values.len();
                (0..=m)
                    .flat_map(|i| {
                        let x = i as f64 / m as f64;
                        [x, -x]
                    })
                    .collect()
            }
            KernelKind::Custom(c) => {
                let mut bp = c.breakpoints.clone();
                bp.extend([c.support.0, c.support.1].iter().filter(|v| v.is_finite()));
                bp
            }
            _ => vec![-1.0, 0.0, 1.0],
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            KernelKind::Custom(c) => {
                let (lo, hi) = c.effective;
                let r = lo.abs().max(hi.abs());
                (0..=200).all(|i| {
                    let x = r * i as f64 / 200.0;
                    (self.eval(x) - self.eval(-x)).abs() <= 1e-12 * (1.0 + self.eval(x).abs())
                })
            }
            _ => true,
        }
    }

    /// Symmetric polynomial on `[0, 1]` for the polynomial kernels.
    fn half_poly(&self) -> Option<Poly> {
        match &self.kind {
            KernelKind::Uniform => Some(Poly(vec![0.5])),
            KernelKind::Triangular => Some(Poly(vec![1.0, -1.0])),
            KernelKind::Epanechnikov => Some(Poly(vec![0.75, 0.0, -0.75])),
            KernelKind::OrderP { p } => {
                let c = (*p as f64 + 1.0) / (2.0 * *p as f64);
                let mut v = vec![0.0; *p as usize + 1];
                v[0] = c;
                v[*p as usize] = -c;
                Some(Poly(v))
            }
            KernelKind::ConstrainedOrder { poly, .. } => Some(poly.clone()),
            _ => None,
        }
    }

    /// `∫ K²` over ℝ.
    pub fn l2_norm(&self) -> Result<f64> {
        if let Some(v) = self.cache.l2.get() {
            return Ok(*v);
        }
        let v = match self.closed_form_l2() {
            Some(v) => v,
            None => self.l2_norm_numeric()?,
        };
        Ok(*self.cache.l2.get_or_init(|| v))
    }

    fn closed_form_l2(&self) -> Option<f64> {
        match &self.kind {
            KernelKind::Exponential => Some(0.25),
            KernelKind::Step { values } => {
                let m = values.len() as f64;
                Some(2.0 * values.iter().map(|v| v * v).sum::<f64>() / m)
            }
            KernelKind::Custom(_) => None,
            _ => self.half_poly().map(|p| 2.0 * p.mul(&p).integral(0.0, 1.0)),
        }
    }

    /// `∫ K²` by adaptive quadrature.
    pub fn l2_norm_numeric(&self) -> Result<f64> {
        let (lo, hi) = self.effective_support();
        integrate_pieces(|x| self.eval(x).powi(2), lo, hi, &self.breakpoints(), KERNEL_QUAD_TOL)
    }

    /// `∫ K`, always by quadrature.
    pub fn integral_numeric(&self) -> Result<f64> {
        let (lo, hi) = self.effective_support();
        integrate_pieces(|x| self.eval(x), lo, hi, &self.breakpoints(), KERNEL_QUAD_TOL)
    }

    /// `∫ K(x) x^p dx`.
    pub fn moment(&self, p: u32) -> Result<f64> {
        match self.closed_form_moment(p) {
            Some(v) => Ok(v),
            None => self.moment_numeric(p),
        }
    }

    fn closed_form_moment(&self, p: u32) -> Option<f64> {
        let odd = p % 2 == 1;
        match &self.kind {
            KernelKind::Custom(_) => None,
            _ if odd => Some(0.0),
            KernelKind::Exponential => Some((1..=p).map(f64::from).product()),
            KernelKind::Step { values } => {
                let m = values.len() as f64;
                let e = p as i32 + 1;
                Some(
                    2.0 * values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v * (((i + 1) as f64 / m).powi(e) - (i as f64 / m).powi(e)) / e as f64)
                        .sum::<f64>(),
                )
            }
            _ => self
                .half_poly()
                .map(|poly| 2.0 * poly.shift(p as usize).integral(0.0, 1.0)),
        }
    }

    pub fn moment_numeric(&self, p: u32) -> Result<f64> {
        let (lo, hi) = self.effective_support();
        integrate_pieces(
            |x| self.eval(x) * x.powi(p as i32),
            lo,
            hi,
            &self.breakpoints(),
            KERNEL_QUAD_TOL,
        )
    }

    /// Survivor function `L(x) = ∫_x^∞ K(u) du`.
    pub fn survivor(&self, x: f64) -> Result<f64> {
        match &self.kind {
            KernelKind::Exponential => Ok(if x >= 0.0 {
                0.5 * (-x).exp()
            } else {
                1.0 - 0.5 * x.exp()
            }),
            _ => {
                let (_, hi) = self.effective_support();
                if x >= hi {
                    return Ok(0.0);
                }
                integrate_pieces(|u| self.eval(u), x, hi, &self.breakpoints(), KERNEL_QUAD_TOL)
            }
        }
    }

    /// Closed-form `∬ K K C_γ` when one exists for this kernel and structure.
    pub fn closed_form_quadratic(&self, cov: &CovStructure) -> Option<f64> {
        match cov.kind() {
            CovKind::BrownianMin => self.bm_closed_form(),
            CovKind::DeterministicSmooth { m } => self.closed_form_moment(*m).map(|v| v * v),
            _ => None,
        }
    }

    fn bm_closed_form(&self) -> Option<f64> {
        if let Some(v) = self.cache.bm_quad.get() {
            return Some(*v);
        }
        // For symmetric K the form reduces to 2 ∫_0^∞ L(u)² du.
        let v = match &self.kind {
            KernelKind::Exponential => 0.25,
            KernelKind::Step { values } => {
                let m = values.len();
                let w = 1.0 / m as f64;
                let mut tail = 0.0;
                let mut acc = 0.0;
                for v in values.iter().rev() {
                    acc += tail * tail * w + tail * v * w * w + v * v * w * w * w / 3.0;
                    tail += v * w;
                }
                2.0 * acc
            }
            KernelKind::Custom(_) => return None,
            _ => {
                let p = self.half_poly()?;
                let anti = p.antiderivative();
                let l = Poly(vec![anti.eval(1.0)]).add(&anti.scale(-1.0));
                2.0 * l.mul(&l).integral(0.0, 1.0)
            }
        };
        Some(*self.cache.bm_quad.get_or_init(|| v))
    }

    /// `I(K) = ∫K² · ∬ K(x)K(y) min(|x|,|y|)1{xy>=0}`.
    pub fn bm_objective(&self) -> Result<f64> {
        Ok(self.l2_norm()? * CovStructure::brownian().quadratic_form(self)?)
    }

    /// Writes a step kernel as CSV with columns `x_left, coeff`.
    pub fn write_step_csv<W: std::io::Write>(&self, out: W, trailer: Option<(&str, f64)>) -> Result<()> {
        let KernelKind::Step { values } = &self.kind else {
            return Err(Error::InvalidArgument("only step kernels serialize to CSV".into()));
        };
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Data(format!("writing step kernel: {e}"));
        w.write_record(["x_left", "coeff"]).map_err(io)?;
        let m = values.len();
        for (i, v) in values.iter().enumerate() {
            w.write_record([format!("{}", i as f64 / m as f64), format!("{v:.17e}")])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        let mut inner = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        if let Some((key, value)) = trailer {
            writeln!(inner, "# {key},{value:.17e}").map_err(|e| Error::Data(e.to_string()))?;
        }
        Ok(())
    }

    /// Reads a step kernel from CSV with header `x_left, coeff`. Lines
    /// starting with `#` are ignored.
    pub fn read_step_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Data(format!("step kernel header: {e}")))?
            .clone();
        if headers.len() < 2 || &headers[0] != "x_left" || &headers[1] != "coeff" {
            return Err(Error::Data("step kernel CSV must have header 'x_left,coeff'".into()));
        }
        let mut xs = Vec::new();
        let mut cs = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Data(format!("line {line}: missing column {i}")))?
                    .parse::<f64>()
                    .map_err(|e| Error::Data(format!("line {line}: {e}")))
            };
            xs.push(parse(0)?);
            cs.push(parse(1)?);
        }
        let m = cs.len();
        for (i, x) in xs.iter().enumerate() {
            if (x - i as f64 / m as f64).abs() > 1e-9 {
                return Err(Error::Data(format!(
                    "line {}: x_left {x} is not the bin edge {}/{m}",
                    i + 2,
                    i
                )));
            }
        }
        Self::step(&cs)
    }

    pub fn read_step_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::read_step_csv(f)
    }
}

/// `K_p(x) = (p+1)/(2p) (1 - |x|^p)` on `[-1, 1]`.
pub fn order_p_kernel(p: u32) -> Result<Kernel> {
    if p == 0 {
        return Err(Error::InvalidArgument("order-p kernel needs p >= 1".into()));
    }
    Ok(Kernel::from_kind(KernelKind::OrderP { p }))
}

/// Symmetric kernel of order `2q` on `[-1, 1]` of the form
/// `a (x^{2q} + Σ_{i<q} λ_i x^{2i})`: unit mass, vanishing even moments of
/// order below `2q`, and stationary for `(∫K²)^{2q} ∫K x^{2q}`.
///
/// The moment constraints leave a one-parameter family in `λ_0`; the
/// stationarity condition `(4q+1) a M + λ_0/2 = 0` (with `M` the `2q`-th
/// half-line moment of the bracket) is quadratic in `λ_0` and is solved
/// directly.
pub fn constrained_order_kernel(q: u32) -> Result<Kernel> {
    if q < 2 {
        return Err(Error::InvalidArgument("constrained order kernel needs q >= 2".into()));
    }
    let qu = q as usize;
    let inv = |k: usize| 1.0 / (2 * k + 1) as f64;
    let r_count = qu - 1;
    // rows r = 1..q-1, columns λ_1..λ_{q-1}
    let mat = DMatrix::from_fn(r_count, r_count, |r, i| inv(i + 1 + r + 1));
    let sv = mat.singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::SingularSystem { cond });
    }
    let rhs_const = DVector::from_fn(r_count, |r, _| -inv(qu + r + 1));
    let rhs_t = DVector::from_fn(r_count, |r, _| -inv(r + 1));
    let lu = mat.lu();
    let u = lu.solve(&rhs_const).ok_or(Error::SingularSystem { cond })?;
    let v = lu.solve(&rhs_t).ok_or(Error::SingularSystem { cond })?;

    // M(t) = α0 + α1 t and S(t) = β0 + β1 t with λ_0 = t
    let alpha0 = inv(2 * qu) + (0..r_count).map(|i| u[i] * inv(qu + i + 1)).sum::<f64>();
    let alpha1 = inv(qu) + (0..r_count).map(|i| v[i] * inv(qu + i + 1)).sum::<f64>();
    let beta0 = inv(qu) + (0..r_count).map(|i| u[i] * inv(i + 1)).sum::<f64>();
    let beta1 = 1.0 + (0..r_count).map(|i| v[i] * inv(i + 1)).sum::<f64>();
    let c4 = (4 * qu + 1) as f64;
    let qa = beta1;
    let qb = c4 * alpha1 + beta0;
    let qc = c4 * alpha0;
    let mut disc = qb * qb - 4.0 * qa * qc;
    let scale = (qb * qb).max((4.0 * qa * qc).abs());
    if disc < 0.0 && disc > -1e-9 * scale {
        disc = 0.0;
    }
    if disc < 0.0 || qa == 0.0 {
        return Err(Error::SingularSystem { cond: f64::INFINITY });
    }
    let sq = disc.sqrt();
    let roots = [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)];

    let build = |t: f64| -> Option<(Poly, f64)> {
        let s = beta0 + beta1 * t;
        if s.abs() < 1e-14 {
            return None;
        }
        let a = 0.5 / s;
        let mut coeffs = vec![0.0; 2 * qu + 1];
        coeffs[2 * qu] = a;
        coeffs[0] = a * t;
        for i in 0..r_count {
            coeffs[2 * (i + 1)] = a * (u[i] + t * v[i]);
        }
        let poly = Poly(coeffs);
        let l2 = poly.mul(&poly).integral(0.0, 1.0);
        let mom = poly.shift(2 * qu).integral(0.0, 1.0);
        Some((poly, l2.powi(2 * q as i32) * mom.abs()))
    };
    let best = roots
        .iter()
        .filter_map(|&t| build(t))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::SingularSystem { cond: f64::INFINITY })?;
    Ok(Kernel::from_kind(KernelKind::ConstrainedOrder { q, poly: best.0 }))
}

/// `K_s(x) = (K(x) + K(-x)) / 2`. Symmetric kernels are returned unchanged.
pub fn symmetrize(kernel: &Kernel) -> Kernel {
    if kernel.is_symmetric() {
        return kernel.clone();
    }
    let (a, b) = kernel.support();
    let r = a.abs().max(b.abs());
    let (ea, eb) = kernel.effective_support();
    let er = ea.abs().max(eb.abs());
    let mut bp: Vec<f64> = kernel.breakpoints();
    bp.extend(kernel.breakpoints().iter().map(|x| -x));
    let inner = kernel.clone();
    Kernel::custom(
        format!("sym({})", kernel.name()),
        move |x| 0.5 * (inner.eval(x) + inner.eval(-x)),
        (-r, r),
        (-er, er),
        bp,
    )
}

/// Pass/fail per admissibility condition.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// Numerically integrated mass.
    pub integral: f64,
    pub unit_integral: bool,
    /// Lipschitz / piecewise-C¹ condition.
    pub lipschitz: bool,
    /// Finite `∫|K||x|^γ` and vanishing `K(x) x^{γ+1}` in the tails.
    pub tails: bool,
    pub quadratic_form: f64,
    pub positive_quadratic_form: bool,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.unit_integral && self.lipschitz && self.tails && self.positive_quadratic_form
    }
}

pub fn check_admissible(kernel: &Kernel, cov: &CovStructure) -> AdmissibilityReport {
    let integral = kernel.integral_numeric().unwrap_or(f64::NAN);
    let unit_integral = (integral - 1.0).abs() <= 1e-10;
    let gamma = cov.gamma();
    let lipschitz = match kernel.kind() {
        KernelKind::Step { values } => {
            // finite-difference bound across neighbouring bins
            let m = values.len() as f64;
            let bound = values.windows(2).map(|w| (w[1] - w[0]).abs() * m).fold(0.0, f64::max);
            bound.is_finite()
        }
        KernelKind::Custom(c) => {
            let (lo, hi) = c.effective;
            let n = 20_000;
            let dx = (hi - lo) / n as f64;
            (0..n).all(|i| {
                let x = lo + i as f64 * dx;
                let d = (kernel.eval(x + dx) - kernel.eval(x)).abs() / dx;
                d.is_finite() && d < 1e6
            })
        }
        _ => true,
    };
    let tails = match kernel.kind() {
        KernelKind::Custom(_) => {
            let (lo, hi) = kernel.effective_support();
            let moment = integrate_pieces(
                |x| kernel.eval(x).abs() * x.abs().powf(gamma),
                lo,
                hi,
                &kernel.breakpoints(),
                1e-8,
            );
            let edge = |x: f64| (kernel.eval(x) * x.abs().powf(gamma + 1.0)).abs();
            moment.map(|v| v.is_finite()).unwrap_or(false)
                && edge(lo * (1.0 - 1e-12)) < 1e-6
                && edge(hi * (1.0 - 1e-12)) < 1e-6
        }
        _ => true,
    };
    let quadratic_form = cov.quadratic_form(kernel).unwrap_or(f64::NAN);
    AdmissibilityReport {
        integral,
        unit_integral,
        lipschitz,
        tails,
        quadratic_form,
        positive_quadratic_form: quadratic_form > 1e-12,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtins() -> Vec<Kernel> {
        vec![
            Kernel::exponential(),
            Kernel::uniform(),
            Kernel::triangular(),
            Kernel::epanechnikov(),
        ]
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(Kernel::exponential().eval(0.0), 0.5);
        assert_eq!(Kernel::epanechnikov().eval(0.0), 0.75);
        assert_eq!(order_p_kernel(2).unwrap().eval(0.0), 0.75);
        assert_eq!(Kernel::uniform().eval(1.0), 0.0);
        assert_eq!(Kernel::triangular().eval(0.25), 0.75);
    }

    #[test]
    fn scaled_kernel_convention() {
        let k = Kernel::exponential();
        assert!((k.eval_scaled(0.0, 0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_l2_norms() {
        assert_eq!(Kernel::exponential().l2_norm().unwrap(), 0.25);
        assert!((Kernel::epanechnikov().l2_norm().unwrap() - 0.6).abs() < 1e-15);
        assert!((Kernel::triangular().l2_norm().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((Kernel::uniform().l2_norm().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_l2_matches_quadrature() {
        for k in builtins() {
            let a = k.l2_norm().unwrap();
            let b = k.l2_norm_numeric().unwrap();
            assert!((a - b).abs() < 1e-10, "{}: {a} vs {b}", k.name());
        }
    }

    #[test]
    fn order_p_matches_epanechnikov_and_triangular() {
        let k2 = order_p_kernel(2).unwrap();
        let k1 = order_p_kernel(1).unwrap();
        for i in -20..=20 {
            let x = i as f64 * 0.06;
            assert!((k2.eval(x) - Kernel::epanechnikov().eval(x)).abs() < 1e-15);
            assert!((k1.eval(x) - Kernel::triangular().eval(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn order_p_kernels_have_unit_mass() {
        for p in 1..=8 {
            let k = order_p_kernel(p).unwrap();
            assert!((k.integral_numeric().unwrap() - 1.0).abs() < 1e-12, "p = {p}");
            assert!((k.moment(0).unwrap() - 1.0).abs() < 1e-14);
            for r in (1..p).filter(|r| r % 2 == 1) {
                assert_eq!(k.moment(r).unwrap(), 0.0);
            }
            assert!(k.moment_numeric(p + (p % 2)).unwrap().abs() > 1e-6);
        }
        assert!(order_p_kernel(0).is_err());
    }

    #[test]
    fn constrained_kernel_q2_moments() {
        let k = constrained_order_kernel(2).unwrap();
        assert!((k.integral_numeric().unwrap() - 1.0).abs() < 1e-10);
        assert!(k.moment_numeric(2).unwrap().abs() < 1e-10);
        assert!(k.moment_numeric(4).unwrap().abs() > 1e-4);
        for i in 0..50 {
            let x = i as f64 / 50.0;
            assert_eq!(k.eval(x), k.eval(-x));
        }
    }

    #[test]
    fn constrained_kernel_q2_is_the_known_quartic() {
        // K ∝ (1 - x²)(3 - 7x²), normalized: 15/32 (1 - x²)(3 - 7x²)
        let k = constrained_order_kernel(2).unwrap();
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let expected = 15.0 / 32.0 * (1.0 - x * x) * (3.0 - 7.0 * x * x);
            assert!(
                (k.eval(x) - expected).abs() < 1e-9,
                "x = {x}: {} vs {expected}",
                k.eval(x)
            );
        }
    }

    #[test]
    fn constrained_kernels_higher_q() {
        for q in 2..=6 {
            let k = constrained_order_kernel(q).unwrap();
            assert!((k.integral_numeric().unwrap() - 1.0).abs() < 1e-10, "q = {q}");
            for r in 1..q {
                assert!(k.moment_numeric(2 * r).unwrap().abs() < 1e-10, "q = {q}, r = {r}");
            }
            assert!(k.moment_numeric(2 * q).unwrap().abs() > 1e-8);
        }
        assert!(constrained_order_kernel(1).is_err());
        assert!(matches!(
            constrained_order_kernel(14),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn symmetrize_fixed_point_and_one_sided_exponential() {
        let k = Kernel::epanechnikov();
        let s = symmetrize(&k);
        assert_eq!(s.name(), k.name());
        let one_sided = Kernel::custom(
            "exp+",
            |x: f64| (-x).exp(),
            (0.0, f64::INFINITY),
            (0.0, 40.0),
            vec![0.0],
        );
        let s = symmetrize(&one_sided);
        for i in -10..=10 {
            let x = i as f64 * 0.37;
            if x == 0.0 {
                continue;
            }
            assert!((s.eval(x) - 0.5 * (-x.abs()).exp()).abs() < 1e-15);
        }
        assert!((s.integral_numeric().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn step_kernel_normalizes_and_round_trips_csv() {
        let k = Kernel::step(&[3.0, 2.0, 1.0, 0.5]).unwrap();
        assert!((k.integral_numeric().unwrap() - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        k.write_step_csv(&mut buf, Some(("objective", 0.25))).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_left,coeff\n"));
        assert!(text.trim_end().ends_with(&format!("{:.17e}", 0.25)));
        let back = Kernel::read_step_csv(&buf[..]).unwrap();
        for i in 0..40 {
            let x = -1.0 + i as f64 * 0.05;
            assert!((back.eval(x) - k.eval(x)).abs() < 1e-14);
        }
        assert!(matches!(Kernel::step(&[1.0, -1.0]), Err(Error::ZeroMass(_))));
    }

    #[test]
    fn step_csv_rejects_bad_header() {
        let err = Kernel::read_step_csv("x,c\n0,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn survivor_function_values() {
        let k = Kernel::epanechnikov();
        // 1/4 (x - 1)^2 (x + 2)
        for &x in &[0.0, 0.3, 0.9] {
            let expected = 0.25 * (x - 1.0f64).powi(2) * (x + 2.0);
            assert!((k.survivor(x).unwrap() - expected).abs() < 1e-12);
        }
        assert!((Kernel::exponential().survivor(1.0).unwrap() - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn admissibility_reports() {
        let bm = CovStructure::brownian();
        assert!(check_admissible(&Kernel::exponential(), &bm).all_pass());
        let det = CovStructure::deterministic(1).unwrap();
        let rep = check_admissible(&Kernel::epanechnikov(), &det);
        assert!(rep.unit_integral && !rep.positive_quadratic_form);
        let fbm = CovStructure::fractional(0.75).unwrap();
        let step = Kernel::step(&[4.0, 3.0, 2.0, 1.0]).unwrap();
        let rep = check_admissible(&step, &fbm);
        assert!(rep.unit_integral && rep.lipschitz);
    }

    #[test]
    fn name_round_trip() {
        for name in [
            "exponential",
            "uniform",
            "triangular",
            "epanechnikov",
            "order-p:3",
            "constrained:2",
        ] {
            assert_eq!(Kernel::from_name(name).unwrap().name(), name);
        }
        assert!(Kernel::from_name("gaussian").is_err());
    }
}
