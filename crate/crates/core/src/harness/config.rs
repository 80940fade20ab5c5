//! Experiment configuration in TOML. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::simulate::{HestonConfig, MuSpec};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::paths")]
    pub paths: usize,
    /// Fraction `l/n` dropped at each end when averaging squared errors.
    #[serde(default = "defaults::trim")]
    pub trim: f64,
    #[serde(default = "defaults::kernels")]
    pub kernels: Vec<String>,
    /// `plugin`, `plugin:<iterations>`, `initial`, `oracle`, `cv` or `fixed:<h>`.
    #[serde(default = "defaults::bandwidths")]
    pub bandwidths: Vec<String>,
    /// Vol-of-vol values swept by `experiment volvol`.
    #[serde(default = "defaults::xi")]
    pub xi: Vec<f64>,
    #[serde(default)]
    pub scenarios: ScenarioGrid,
    #[serde(default)]
    pub heston: HestonParams,
    #[serde(default)]
    pub plugin: PluginParams,
    #[serde(default)]
    pub cv: CvParams,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGrid {
    pub days: Vec<u32>,
    pub samples_per_hour: Vec<u32>,
    pub rho: Vec<f64>,
    pub hours_per_day: f64,
    pub days_per_year: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HestonParams {
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub v0: f64,
    pub x0: f64,
    pub mu_alpha: f64,
    pub mu_beta: f64,
    pub substeps: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PluginParams {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Coarse TSRVV scale is `round(k_scale · n^{2/3})`.
    pub k_scale: f64,
    /// `disjoint` or `overlapping`; see [`crate::volvol::Pairing`].
    #[serde(default = "defaults::pairing")]
    pub pairing: String,
}

/// Cross-validation grid, relative to the initial plug-in bandwidth.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvParams {
    pub lo_factor: f64,
    pub hi_factor: f64,
    pub count: usize,
}

mod defaults {
    pub fn seed() -> u64 {
        20240101
    }
    pub fn paths() -> usize {
        500
    }
    pub fn trim() -> f64 {
        0.1
    }
    pub fn kernels() -> Vec<String> {
        vec!["exponential".into()]
    }
    pub fn bandwidths() -> Vec<String> {
        vec!["plugin".into()]
    }
    pub fn xi() -> Vec<f64> {
        vec![0.5]
    }
    pub fn pairing() -> String {
        "disjoint".into()
    }
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        Self {
            days: vec![5, 21],
            samples_per_hour: vec![12, 60],
            rho: vec![0.0],
            hours_per_day: 6.5,
            days_per_year: 252.0,
        }
    }
}

impl Default for HestonParams {
    fn default() -> Self {
        Self {
            kappa: 5.0,
            theta: 0.04,
            xi: 0.5,
            v0: 0.04,
            x0: 1.0,
            mu_alpha: 0.05,
            mu_beta: -0.5,
            substeps: 10,
        }
    }
}

impl Default for PluginParams {
    fn default() -> Self {
        Self {
            max_iter: 2,
            rel_tol: 0.01,
            k_scale: 1.0,
            pairing: defaults::pairing(),
        }
    }
}

impl Default for CvParams {
    fn default() -> Self {
        Self {
            lo_factor: 0.1,
            hi_factor: 10.0,
            count: 40,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: defaults::seed(),
            paths: defaults::paths(),
            trim: defaults::trim(),
            kernels: defaults::kernels(),
            bandwidths: defaults::bandwidths(),
            xi: defaults::xi(),
            scenarios: ScenarioGrid::default(),
            heston: HestonParams::default(),
            plugin: PluginParams::default(),
            cv: CvParams::default(),
        }
    }
}

/// One cell of the scenario grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub days: u32,
    pub samples_per_hour: u32,
    pub rho: f64,
    pub n: usize,
    pub horizon: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.paths == 0 {
            return bad("paths must be at least 1".into());
        }
        if !(0.0..=0.4).contains(&self.trim) {
            return bad(format!("trim must lie in [0, 0.4], got {}", self.trim));
        }
        if self.kernels.is_empty() || self.bandwidths.is_empty() {
            return bad("kernels and bandwidths must be non-empty".into());
        }
        let g = &self.scenarios;
        if g.days.is_empty() || g.samples_per_hour.is_empty() || g.rho.is_empty() {
            return bad("scenario grid has an empty axis".into());
        }
        if !(g.hours_per_day > 0.0 && g.days_per_year > 0.0) {
            return bad("hours_per_day and days_per_year must be positive".into());
        }
        if !(self.cv.lo_factor > 0.0 && self.cv.hi_factor >= self.cv.lo_factor && self.cv.count >= 1) {
            return bad("cv grid needs 0 < lo_factor <= hi_factor and count >= 1".into());
        }
        if !(self.plugin.k_scale > 0.0 && self.plugin.rel_tol >= 0.0) {
            return bad("plugin k_scale must be positive and rel_tol non-negative".into());
        }
        crate::volvol::Pairing::from_name(&self.plugin.pairing)?;
        for k in &self.kernels {
            crate::kernels::Kernel::from_name(k).map_err(|e| Error::Config(format!("kernel {k:?}: {e}")))?;
        }
        for b in &self.bandwidths {
            BandwidthMethod::parse(b)?;
        }
        for s in self.scenarios() {
            for &xi in &self.xi {
                self.heston_config(&s, xi).validate()?;
            }
            self.heston_config(&s, self.heston.xi).validate()?;
        }
        Ok(())
    }

    /// Grid cells in the order days, samples per hour, rho.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let g = &self.scenarios;
        let mut out = Vec::new();
        for &days in &g.days {
            for &sph in &g.samples_per_hour {
                for &rho in &g.rho {
                    let n = (days as f64 * g.hours_per_day * sph as f64).round() as usize;
                    out.push(Scenario {
                        days,
                        samples_per_hour: sph,
                        rho,
                        n,
                        horizon: days as f64 / g.days_per_year,
                    });
                }
            }
        }
        out
    }

    pub fn heston_config(&self, s: &Scenario, xi: f64) -> HestonConfig {
        let h = &self.heston;
        HestonConfig {
            kappa: h.kappa,
            theta: h.theta,
            xi,
            rho: s.rho,
            mu: MuSpec {
                alpha: h.mu_alpha,
                beta: h.mu_beta,
            },
            x0: h.x0,
            v0: h.v0,
            n: s.n,
            horizon: s.horizon,
            substeps: h.substeps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthMethod {
    /// Plug-in with the configured iteration budget and tolerance.
    Plugin,
    /// Plug-in with exactly this many iterations.
    PluginIters(usize),
    Initial,
    Oracle,
    CrossValidation,
    Fixed(f64),
}

impl BandwidthMethod {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let err = || Error::Config(format!("unknown bandwidth method {s:?}"));
        Ok(match s {
            "plugin" => Self::Plugin,
            "initial" => Self::Initial,
            "oracle" => Self::Oracle,
            "cv" => Self::CrossValidation,
            _ => {
                if let Some(k) = s.strip_prefix("plugin:") {
                    Self::PluginIters(k.parse().map_err(|_| err())?)
                } else if let Some(h) = s.strip_prefix("fixed:") {
                    let h: f64 = h.parse().map_err(|_| err())?;
                    if !(h > 0.0 && h.is_finite()) {
                        return Err(err());
                    }
                    Self::Fixed(h)
                } else {
                    return Err(err());
                }
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Plugin => "plugin".into(),
            Self::PluginIters(k) => format!("plugin:{k}"),
            Self::Initial => "initial".into(),
            Self::Oracle => "oracle".into(),
            Self::CrossValidation => "cv".into(),
            Self::Fixed(h) => format!("fixed:{h}"),
        }
    }
}
