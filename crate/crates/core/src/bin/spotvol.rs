use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spotvol::bandwidth::PluginOptions;
use spotvol::harness::estimate::{choose_bandwidth, estimate_path, write_path_csv};
use spotvol::harness::{run_mase, run_volvol, BandwidthChoice, EstimateOptions, ExperimentConfig};
use spotvol::kernel_optimizer::optimize;
use spotvol::simulate::{path_rng, simulate_heston, HestonConfig};
use spotvol::volvol::{default_b, default_k, heston_xi, tsrvv_paired, window_iv, KMode, Pairing};
use spotvol::{Error, Kernel};

#[derive(Parser)]
#[command(name = "spotvol", version, about = "Kernel spot volatility estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a Heston path as `time,log_price,true_var`.
    Simulate(SimulateArgs),
    /// Spot variance at every observation time of a price CSV.
    Estimate(EstimateArgs),
    /// Integrated vol of vol by TSRVV.
    Volvol(VolvolArgs),
    /// Numerically optimal step kernel for covariance exponent gamma.
    OptimalKernel(OptimalKernelArgs),
    /// Monte Carlo experiments from a TOML config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    /// Horizon in years.
    #[arg(long, default_value_t = 21.0 / 252.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.04)]
    theta: f64,
    #[arg(long, default_value_t = 0.5)]
    xi: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long, default_value_t = 0.04)]
    v0: f64,
    #[arg(long, default_value_t = 10)]
    substeps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct BandwidthArgs {
    /// Kernel name: exponential, uniform, triangular, epanechnikov,
    /// order-p:<p>, constrained:<q>, or a step-kernel CSV path.
    #[arg(long, default_value = "exponential")]
    kernel: String,
    /// `plugin`, `initial`, `cv` or a positive number.
    #[arg(long, default_value = "plugin")]
    bandwidth: String,
    #[arg(long, default_value_t = 2)]
    plugin_iters: usize,
    #[arg(long, default_value_t = 0.01)]
    plugin_tol: f64,
    /// Cross-validation grid `lo:hi:count` as multiples of the initial bandwidth.
    #[arg(long, default_value = "0.1:10:40")]
    cv_grid: String,
    #[arg(long, default_value_t = 0.1)]
    trim: f64,
    /// One-sided pairing inside TSRVV: `disjoint` or `overlapping`.
    #[arg(long, default_value = "disjoint")]
    pairing: String,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    bw: BandwidthArgs,
    #[arg(long)]
    no_boundary_correction: bool,
    /// Add pointwise bands at this coverage level.
    #[arg(long)]
    bands: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VolvolArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    bw: BandwidthArgs,
    /// Coarse scale; defaults to `n^{2/3}`.
    #[arg(long)]
    k: Option<usize>,
    /// Boundary trim; defaults to `max(1, round(0.05 n))`.
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimalKernelArgs {
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 128)]
    bins: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Mase,
    Volvol,
}

#[derive(Args)]
struct ExperimentArgs {
    kind: ExperimentKind,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::Data(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<File, Error> {
    File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))
}

fn load_kernel(name: &str) -> Result<Kernel, Error> {
    let p = Path::new(name);
    if p.extension().is_some_and(|e| e == "csv") {
        return Kernel::read_step_file(p);
    }
    Kernel::from_name(name).map_err(|e| Error::Config(format!("kernel {name:?}: {e}")))
}

fn bandwidth_choice(a: &BandwidthArgs) -> Result<BandwidthChoice, Error> {
    Ok(match a.bandwidth.as_str() {
        "plugin" => BandwidthChoice::Plugin(PluginOptions {
            max_iter: a.plugin_iters,
            rel_tol: a.plugin_tol,
            k: None,
            b: None,
            pairing: Pairing::from_name(&a.pairing)?,
        }),
        "initial" => BandwidthChoice::Initial,
        "cv" => {
            let parts: Vec<&str> = a.cv_grid.split(':').collect();
            let bad = || Error::Config(format!("cv grid must be lo:hi:count, got {:?}", a.cv_grid));
            if parts.len() != 3 {
                return Err(bad());
            }
            BandwidthChoice::CrossValidation {
                lo_factor: parts[0].parse().map_err(|_| bad())?,
                hi_factor: parts[1].parse().map_err(|_| bad())?,
                count: parts[2].parse().map_err(|_| bad())?,
                trim: a.trim,
            }
        }
        other => match other.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => BandwidthChoice::Fixed(h),
            _ => return Err(Error::Config(format!("unknown bandwidth {other:?}"))),
        },
    })
}

fn read_path(input: &Path) -> Result<spotvol::estimator::PricePath, Error> {
    Ok(spotvol::estimator::PricePath::read_csv(open(input)?)?.0)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = HestonConfig {
                kappa: a.kappa,
                theta: a.theta,
                xi: a.xi,
                rho: a.rho,
                v0: a.v0,
                substeps: a.substeps,
                ..HestonConfig::standard(a.n, a.horizon)
            };
            let sim = simulate_heston(&cfg, &mut path_rng(a.seed, 0))?;
            write_path_csv(output(&a.out)?, &sim.path, Some(&sim.true_var))
        }
        Command::Estimate(a) => {
            let opts = EstimateOptions {
                kernel: load_kernel(&a.bw.kernel)?,
                bandwidth: bandwidth_choice(&a.bw)?,
                boundary_corrected: !a.no_boundary_correction,
                bands: a.bands,
            };
            let out = estimate_path(&read_path(&a.input)?, &opts)?;
            out.write_csv(output(&a.out)?)
        }
        Command::Volvol(a) => {
            let kernel = load_kernel(&a.bw.kernel)?;
            let path = read_path(&a.input)?;
            let n = path.n();
            let k = a.k.unwrap_or_else(|| default_k(n, KMode::TwoThirds, 1.0));
            let b = a.b.unwrap_or_else(|| default_b(n));
            let mut choice = bandwidth_choice(&a.bw)?;
            if let BandwidthChoice::Plugin(p) = &mut choice {
                p.k = Some(k);
                p.b = Some(b);
            }
            let plan = choose_bandwidth(&path, &kernel, &choice)?;
            let vv = tsrvv_paired(&path, &kernel, plan.h, k, b, Pairing::from_name(&a.bw.pairing)?)?;
            let iv = window_iv(&path, b);
            let mut w = output(&a.out)?;
            let io = |e: io::Error| Error::Data(format!("write failed: {e}"));
            writeln!(w, "# metadata: kernel={}", kernel.name()).map_err(io)?;
            writeln!(w, "# metadata: n={n}").map_err(io)?;
            writeln!(w, "# metadata: pairing={}", a.bw.pairing).map_err(io)?;
            writeln!(
                w,
                "bandwidth,k,b,ivv,iv_window,xi_hat,first_term,correction,used_fallback"
            )
            .map_err(io)?;
            writeln!(
                w,
                "{:e},{k},{b},{:e},{:e},{:e},{:e},{:e},{}",
                plan.h,
                vv.ivv,
                iv,
                heston_xi(vv.ivv, iv),
                vv.first_term,
                vv.correction,
                vv.used_fallback
            )
            .map_err(io)?;
            w.flush().map_err(io)
        }
        Command::OptimalKernel(a) => {
            let res = optimize(a.gamma, a.bins, a.restarts, a.seed).map_err(|e| match e {
                Error::InvalidArgument(m) => Error::Config(m),
                other => other,
            })?;
            log::info!("best restart {} objective {:e}", res.best_restart, res.objective);
            res.kernel
                .write_step_csv(output(&a.out)?, Some(("objective", res.objective)))
        }
        Command::Experiment(a) => {
            let mut cfg = match &a.config {
                Some(p) => ExperimentConfig::from_file(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(p) = a.paths {
                cfg.paths = p;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let report = match a.kind {
                ExperimentKind::Mase => run_mase(&cfg, a.threads)?.0,
                ExperimentKind::Volvol => run_volvol(&cfg, a.threads)?.0,
            };
            report.write_csv(output(&a.out)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
