//! Monte Carlo drivers for the MASE and vol-of-vol tables.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{BandwidthMethod, ExperimentConfig, Scenario};
use super::report::{fmt_f64, ExperimentReport};
use crate::bandwidth::{
    cross_validate, initial_bandwidth, log_grid, optimal_bandwidth_global, plugin_plan, PluginOptions, VolModelMoments,
};
use crate::covariance::CovStructure;
use crate::error::{Error, Result};
use crate::estimator::{spot_vol_grid, PricePath};
use crate::kernels::Kernel;
use crate::numeric::mean_and_se;
use crate::simulate::{path_rng, simulate_heston, SimulatedPath};
use crate::volvol::{default_b, default_k, heston_xi, tsrvv_paired, window_iv, KMode, Pairing};

/// Trimmed average squared error `Σ_{i=l}^{n-l} (σ̂²_i - σ²_i)² / (n - 2l + 1)`
/// with `l = floor(trim · n)`.
pub fn trimmed_ase(estimates: &[f64], truth: &[f64], trim: f64) -> f64 {
    let n = estimates.len() - 1;
    let l = (trim * n as f64).floor() as usize;
    let sq: Vec<f64> = (l..=n - l).map(|i| (estimates[i] - truth[i]).powi(2)).collect();
    crate::numeric::csum(sq) / (n - 2 * l + 1) as f64
}

/// Stream index for path `path` of scenario `scenario`, sweep value `sweep`.
pub fn stream_index(scenario: usize, sweep: usize, path: usize) -> u64 {
    ((scenario as u64) << 48) | ((sweep as u64) << 32) | path as u64
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn plugin_options(cfg: &ExperimentConfig, n: usize, iters: Option<usize>) -> PluginOptions {
    PluginOptions {
        max_iter: iters.unwrap_or(cfg.plugin.max_iter),
        rel_tol: if iters.is_some() { 0.0 } else { cfg.plugin.rel_tol },
        k: Some(default_k(n, KMode::TwoThirds, cfg.plugin.k_scale)),
        b: None,
        pairing: Pairing::from_name(&cfg.plugin.pairing).unwrap_or_default(),
    }
}

/// Bandwidth chosen by `method` on a simulated path with vol of vol `xi`.
pub fn select_bandwidth(
    cfg: &ExperimentConfig,
    sim: &SimulatedPath,
    kernel: &Kernel,
    method: BandwidthMethod,
    xi: f64,
) -> Result<f64> {
    let path = &sim.path;
    let cov = CovStructure::brownian();
    let (n, t) = (path.n(), path.horizon());
    match method {
        BandwidthMethod::Plugin => Ok(plugin_plan(path, kernel, &cov, &plugin_options(cfg, n, None))?.h),
        BandwidthMethod::PluginIters(k) => Ok(plugin_plan(path, kernel, &cov, &plugin_options(cfg, n, Some(k)))?.h),
        BandwidthMethod::Initial => initial_bandwidth(n, t, kernel, &cov),
        BandwidthMethod::Oracle => {
            let m = VolModelMoments {
                e_sigma4: sim.true_iq,
                l_scale: xi * xi * sim.true_iv,
            };
            optimal_bandwidth_global(n, t, &m, kernel, &cov)
        }
        BandwidthMethod::CrossValidation => {
            let h0 = initial_bandwidth(n, t, kernel, &cov)?;
            let grid = log_grid(h0 * cfg.cv.lo_factor, h0 * cfg.cv.hi_factor, cfg.cv.count);
            Ok(cross_validate(path, kernel, &grid, cfg.trim)?.h)
        }
        BandwidthMethod::Fixed(h) => Ok(h),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub ase: f64,
    pub h: f64,
}

/// Per-path squared errors for every kernel × bandwidth method of one
/// scenario. All combinations share the same simulated paths.
#[derive(Debug, Clone)]
pub struct MaseSamples {
    pub scenario: Scenario,
    pub combos: Vec<(String, BandwidthMethod)>,
    /// Indexed `[path][combo]`.
    pub outcomes: Vec<Vec<Result<PathOutcome>>>,
}

impl MaseSamples {
    /// Successful squared errors of combination `c`.
    pub fn ases(&self, c: usize) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter_map(|o| o[c].as_ref().ok().map(|p| p.ase))
            .collect()
    }

    /// Paired differences `ASE_a - ASE_b` over paths where both succeeded.
    pub fn paired_diff(&self, a: usize, b: usize) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter_map(|o| match (&o[a], &o[b]) {
                (Ok(x), Ok(y)) => Some(x.ase - y.ase),
                _ => None,
            })
            .collect()
    }

    pub fn combo(&self, kernel: &str, method: &str) -> Option<usize> {
        self.combos.iter().position(|(k, m)| k == kernel && m.label() == method)
    }
}

fn parse_combos(cfg: &ExperimentConfig) -> Result<Vec<(String, Kernel, BandwidthMethod)>> {
    let mut out = Vec::new();
    for k in &cfg.kernels {
        let kernel = Kernel::from_name(k).map_err(|e| Error::Config(format!("kernel {k:?}: {e}")))?;
        for b in &cfg.bandwidths {
            out.push((k.clone(), kernel.clone(), BandwidthMethod::parse(b)?));
        }
    }
    Ok(out)
}

/// Squared errors for scenario number `index` of the grid.
pub fn mase_samples(cfg: &ExperimentConfig, index: usize, scenario: Scenario) -> Result<MaseSamples> {
    let combos = parse_combos(cfg)?;
    let hcfg = cfg.heston_config(&scenario, cfg.heston.xi);
    hcfg.validate()?;
    let xi = hcfg.xi;
    let outcomes: Vec<Vec<Result<PathOutcome>>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, stream_index(index, 0, p));
            let sim = match simulate_heston(&hcfg, &mut rng) {
                Ok(s) => s,
                Err(e) => return vec![Err(e); combos.len()],
            };
            combos
                .iter()
                .map(|(_, kernel, method)| {
                    let h = select_bandwidth(cfg, &sim, kernel, *method, xi)?;
                    let series = spot_vol_grid(&sim.path, kernel, h, true)?;
                    Ok(PathOutcome {
                        ase: trimmed_ase(&series.estimates, &sim.true_var, cfg.trim),
                        h,
                    })
                })
                .collect()
        })
        .collect();
    Ok(MaseSamples {
        scenario,
        combos: combos.into_iter().map(|(k, _, m)| (k, m)).collect(),
        outcomes,
    })
}

fn common_metadata(report: &mut ExperimentReport, cfg: &ExperimentConfig, kind: &str) {
    report.meta("experiment", kind);
    report.meta("version", env!("CARGO_PKG_VERSION"));
    report.meta("seed", cfg.seed);
    report.meta("paths", cfg.paths);
    report.meta("trim", cfg.trim);
    let h = &cfg.heston;
    report.meta(
        "heston",
        format!(
            "kappa={} theta={} v0={} x0={} mu_alpha={} mu_beta={} substeps={}",
            h.kappa, h.theta, h.v0, h.x0, h.mu_alpha, h.mu_beta, h.substeps
        ),
    );
    let p = &cfg.plugin;
    report.meta(
        "plugin",
        format!(
            "max_iter={} rel_tol={} k_scale={} pairing={}",
            p.max_iter, p.rel_tol, p.k_scale, p.pairing
        ),
    );
    report.meta("units", "raw variance units; multiply mase by 1e5 for the x1e-5 scale");
}

fn scenario_cells(s: &Scenario) -> Vec<String> {
    vec![
        s.days.to_string(),
        s.samples_per_hour.to_string(),
        s.rho.to_string(),
        s.n.to_string(),
    ]
}

/// Runs every scenario, kernel and bandwidth method; returns the report and
/// the per-path samples behind it. `threads = None` uses the global pool.
pub fn run_mase(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<(ExperimentReport, Vec<MaseSamples>)> {
    cfg.validate()?;
    let start = Instant::now();
    let samples = with_pool(threads, || {
        cfg.scenarios()
            .into_iter()
            .enumerate()
            .map(|(i, s)| mase_samples(cfg, i, s))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut report = ExperimentReport::new(&[
        "days",
        "samples_per_hour",
        "rho",
        "n",
        "kernel",
        "bandwidth",
        "mase",
        "se",
        "mean_h",
        "paths_ok",
        "failures",
    ]);
    common_metadata(&mut report, cfg, "mase");
    report.meta("xi", cfg.heston.xi);
    let mut failures = 0;
    let mut first_failure = None;
    for s in &samples {
        for (c, (kernel, method)) in s.combos.iter().enumerate() {
            let ases = s.ases(c);
            let hs: Vec<f64> = s
                .outcomes
                .iter()
                .filter_map(|o| o[c].as_ref().ok().map(|p| p.h))
                .collect();
            let failed = s.outcomes.len() - ases.len();
            failures += failed;
            if first_failure.is_none() {
                first_failure = s
                    .outcomes
                    .iter()
                    .find_map(|o| o[c].as_ref().err().map(|e| e.to_string()));
            }
            let (mase, se) = mean_and_se(&ases);
            let (mean_h, _) = mean_and_se(&hs);
            let mut row = scenario_cells(&s.scenario);
            row.extend([
                kernel.clone(),
                method.label(),
                fmt_f64(mase),
                fmt_f64(se),
                fmt_f64(mean_h),
                ases.len().to_string(),
                failed.to_string(),
            ]);
            report.push_row(row);
        }
    }
    report.meta("failures", failures);
    if let Some(e) = first_failure {
        report.meta("first_failure", e);
    }
    report.runtime("seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    report.runtime(
        "threads",
        threads
            .map(|t| t.to_string())
            .unwrap_or_else(|| rayon::current_num_threads().to_string()),
    );
    Ok((report, samples))
}

/// Per-path `ξ̂` for one scenario and one true `ξ`.
#[derive(Debug, Clone)]
pub struct VolVolSamples {
    pub scenario: Scenario,
    pub xi: f64,
    pub xi_hat: Vec<Result<f64>>,
}

impl VolVolSamples {
    pub fn successes(&self) -> Vec<f64> {
        self.xi_hat.iter().filter_map(|r| r.as_ref().ok().copied()).collect()
    }
}

/// `ξ̂` on one path: plug-in bandwidth, TSRVV at that bandwidth, and the
/// realized variance over the same trimmed window.
pub fn estimate_xi(cfg: &ExperimentConfig, path: &PricePath, kernel: &Kernel) -> Result<f64> {
    let n = path.n();
    let opts = plugin_options(cfg, n, None);
    let plan = plugin_plan(path, kernel, &CovStructure::brownian(), &opts)?;
    let k = opts.k.unwrap_or_else(|| default_k(n, KMode::TwoThirds, 1.0));
    let b = default_b(n);
    let vv = tsrvv_paired(path, kernel, plan.h, k, b, opts.pairing)?;
    Ok(heston_xi(vv.ivv, window_iv(path, b)))
}

pub fn volvol_samples(
    cfg: &ExperimentConfig,
    index: usize,
    scenario: Scenario,
    xi_index: usize,
    xi: f64,
) -> Result<VolVolSamples> {
    let kernel = Kernel::from_name(&cfg.kernels[0]).map_err(|e| Error::Config(e.to_string()))?;
    let hcfg = cfg.heston_config(&scenario, xi);
    hcfg.validate()?;
    let xi_hat = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(cfg.seed, stream_index(index, xi_index, p));
            let sim = simulate_heston(&hcfg, &mut rng)?;
            estimate_xi(cfg, &sim.path, &kernel)
        })
        .collect();
    Ok(VolVolSamples { scenario, xi, xi_hat })
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Bias, standard deviation and root MSE of `ξ̂` for every scenario and
/// every configured `ξ`, using the first configured kernel.
pub fn run_volvol(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<(ExperimentReport, Vec<VolVolSamples>)> {
    cfg.validate()?;
    let start = Instant::now();
    let samples = with_pool(threads, || {
        let mut out = Vec::new();
        for (i, s) in cfg.scenarios().into_iter().enumerate() {
            for (j, &xi) in cfg.xi.iter().enumerate() {
                out.push(volvol_samples(cfg, i, s, j, xi)?);
            }
        }
        Ok::<_, Error>(out)
    })??;
    let mut report = ExperimentReport::new(&[
        "days",
        "samples_per_hour",
        "rho",
        "n",
        "kernel",
        "xi",
        "mean",
        "bias",
        "std",
        "rmse",
        "median",
        "se_bias",
        "paths_ok",
        "failures",
    ]);
    common_metadata(&mut report, cfg, "volvol");
    let mut failures = 0;
    for s in &samples {
        let ok = s.successes();
        let failed = s.xi_hat.len() - ok.len();
        failures += failed;
        let (mean, se) = mean_and_se(&ok);
        let bias = mean - s.xi;
        let var = if ok.len() > 1 {
            ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ok.len() - 1) as f64
        } else {
            0.0
        };
        let mse = ok.iter().map(|x| (x - s.xi).powi(2)).sum::<f64>() / ok.len().max(1) as f64;
        let mut row = scenario_cells(&s.scenario);
        row.extend([
            cfg.kernels[0].clone(),
            s.xi.to_string(),
            fmt_f64(mean),
            fmt_f64(bias),
            fmt_f64(var.sqrt()),
            fmt_f64(mse.sqrt()),
            fmt_f64(median(&ok)),
            fmt_f64(se),
            ok.len().to_string(),
            failed.to_string(),
        ]);
        report.push_row(row);
    }
    report.meta("failures", failures);
    report.runtime("seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    report.runtime(
        "threads",
        threads
            .map(|t| t.to_string())
            .unwrap_or_else(|| rayon::current_num_threads().to_string()),
    );
    Ok((report, samples))
}
