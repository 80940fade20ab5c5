//! End-to-end estimation from a price CSV.

use std::io::{Read, Write};

use crate::asymptotics::bands;
use crate::bandwidth::{
    cross_validate, initial_bandwidth, log_grid, plugin_plan, BandwidthPlan, PluginOptions, Provenance,
};
use crate::covariance::CovStructure;
use crate::error::{Error, Result};
use crate::estimator::{spot_vol_grid, PricePath, SpotVolSeries};
use crate::kernels::Kernel;
use crate::volvol::{default_b, default_k, tsrvv_paired, KMode, Pairing};

use super::report::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthChoice {
    Plugin(PluginOptions),
    Initial,
    Fixed(f64),
    /// Log grid of `count` points between the given multiples of the initial
    /// bandwidth.
    CrossValidation {
        lo_factor: f64,
        hi_factor: f64,
        count: usize,
        trim: f64,
    },
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub kernel: Kernel,
    pub bandwidth: BandwidthChoice,
    pub boundary_corrected: bool,
    /// Coverage level of pointwise bands, if wanted.
    pub bands: Option<f64>,
}

impl EstimateOptions {
    pub fn new(kernel: Kernel) -> Self {
        Self {
            kernel,
            bandwidth: BandwidthChoice::Plugin(PluginOptions::default()),
            boundary_corrected: true,
            bands: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub series: SpotVolSeries,
    pub plan: BandwidthPlan,
    pub n: usize,
    pub horizon: f64,
    pub bands: Option<Vec<(f64, f64)>>,
    pub band_level: Option<f64>,
    /// Average `g²` used for the bands.
    pub g_sq: Option<f64>,
}

pub fn choose_bandwidth(path: &PricePath, kernel: &Kernel, choice: &BandwidthChoice) -> Result<BandwidthPlan> {
    let cov = CovStructure::brownian();
    match choice {
        BandwidthChoice::Plugin(opts) => plugin_plan(path, kernel, &cov, opts),
        BandwidthChoice::Initial => {
            let h = initial_bandwidth(path.n(), path.horizon(), kernel, &cov)?;
            Ok(BandwidthPlan {
                h,
                provenance: Provenance::Initial,
                history: vec![],
            })
        }
        BandwidthChoice::Fixed(h) => Ok(BandwidthPlan {
            h: *h,
            provenance: Provenance::Fixed,
            history: vec![],
        }),
        BandwidthChoice::CrossValidation {
            lo_factor,
            hi_factor,
            count,
            trim,
        } => {
            let h0 = initial_bandwidth(path.n(), path.horizon(), kernel, &cov)?;
            cross_validate(path, kernel, &log_grid(h0 * lo_factor, h0 * hi_factor, *count), *trim)
        }
    }
}

/// Reads `time,log_price[,...]` rows and estimates the spot variance at
/// every observation time.
pub fn estimate_cmd<R: Read>(input: R, opts: &EstimateOptions) -> Result<EstimateOutput> {
    let (path, _) = PricePath::read_csv(input)?;
    estimate_path(&path, opts)
}

pub fn estimate_path(path: &PricePath, opts: &EstimateOptions) -> Result<EstimateOutput> {
    let plan = choose_bandwidth(path, &opts.kernel, &opts.bandwidth)?;
    let series = spot_vol_grid(path, &opts.kernel, plan.h, opts.boundary_corrected)?;
    let (band_vals, g_sq) = match opts.bands {
        None => (None, None),
        Some(level) => {
            let n = path.n();
            let (k, b, pairing) = match &opts.bandwidth {
                BandwidthChoice::Plugin(p) => (
                    p.k.unwrap_or_else(|| default_k(n, KMode::TwoThirds, 1.0)),
                    p.b.unwrap_or_else(|| default_b(n)),
                    p.pairing,
                ),
                _ => (default_k(n, KMode::TwoThirds, 1.0), default_b(n), Pairing::default()),
            };
            let vv = tsrvv_paired(path, &opts.kernel, plan.h, k, b, pairing)?;
            let g_sq = vv.ivv / (path.horizon() - 2.0 * b as f64 * path.delta());
            let bv = bands(
                &series,
                g_sq,
                &opts.kernel,
                &CovStructure::brownian(),
                path.delta(),
                level,
            )?;
            (Some(bv), Some(g_sq))
        }
    };
    Ok(EstimateOutput {
        series,
        plan,
        n: path.n(),
        horizon: path.horizon(),
        bands: band_vals,
        band_level: opts.bands,
        g_sq,
    })
}

impl EstimateOutput {
    /// `time,spot_var,bandwidth[,lo,hi]` with a metadata header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Data(format!("write failed: {e}"));
        let mut meta = vec![
            ("kernel", self.series.kernel.clone()),
            ("n", self.n.to_string()),
            ("horizon", fmt_f64(self.horizon)),
            ("bandwidth", fmt_f64(self.plan.h)),
            ("bandwidth_method", format!("{:?}", self.plan.provenance)),
            ("boundary_corrected", self.series.boundary_corrected.to_string()),
        ];
        for s in &self.plan.history {
            meta.push((
                "plugin_step",
                format!(
                    "iteration={} h={} iq={} ivv={} fallback={}",
                    s.iteration,
                    fmt_f64(s.h),
                    fmt_f64(s.iq),
                    fmt_f64(s.ivv),
                    s.used_fallback
                ),
            ));
        }
        if let (Some(level), Some(g)) = (self.band_level, self.g_sq) {
            meta.push(("band_level", level.to_string()));
            meta.push((
                "band_g_sq",
                format!(
                    "{} (window average IVV/T substituted for the pointwise value)",
                    fmt_f64(g)
                ),
            ));
        }
        for (k, v) in meta {
            writeln!(out, "# metadata: {k}={v}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Data(format!("write failed: {e}"));
        let h = fmt_f64(self.plan.h);
        if self.bands.is_some() {
            w.write_record(["time", "spot_var", "bandwidth", "lo", "hi"])
                .map_err(err)?;
        } else {
            w.write_record(["time", "spot_var", "bandwidth"]).map_err(err)?;
        }
        for (i, (t, s)) in self.series.times.iter().zip(&self.series.estimates).enumerate() {
            let mut rec = vec![t.to_string(), s.to_string(), h.clone()];
            if let Some(b) = &self.bands {
                rec.push(b[i].0.to_string());
                rec.push(b[i].1.to_string());
            }
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }
}

/// `time,log_price,true_var` for a simulated path.
pub fn write_path_csv<W: Write>(out: W, path: &PricePath, true_var: Option<&[f64]>) -> Result<()> {
    let err = |e: csv::Error| Error::Data(format!("write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    if true_var.is_some() {
        w.write_record(["time", "log_price", "true_var"]).map_err(err)?;
    } else {
        w.write_record(["time", "log_price"]).map_err(err)?;
    }
    for (i, x) in path.log_prices().iter().enumerate() {
        let mut rec = vec![path.time(i).to_string(), x.to_string()];
        if let Some(v) = true_var {
            rec.push(v[i].to_string());
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Data(format!("write failed: {e}")))?;
    Ok(())
}
