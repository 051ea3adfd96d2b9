//! Command-line front end: `gaussian`, `cf`, `iid-baseline`,
//! `asymptotics`, and `pressure` subcommands, config loading with flag
//! overrides, caching, and artifact emission.
//!
//! Exit codes: 0 success, 2 configuration errors, 3 solver/certification
//! errors, 4 cache corruption.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::cache;
use crate::cf;
use crate::config::{ConfigFile, ResolvedExperiment};
use crate::deviation::{self, Experiment, LdParams, RateHandle, SampleSource};
use crate::error::{Error, Result};
use crate::gaussian;
use crate::pressure::{self, PressureSolver};
use crate::report::{self, AsymptoticsPayload, RunManifest, RunSummary};

#[derive(Parser)]
#[command(
    name = "birklab",
    version,
    about = "Deviation-series asymptotics for Birkhoff sums: Gaussian series, \
             continued fractions, Monte Carlo deviation statistics, and Gauss-map \
             thermodynamics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gaussian series reports: the Heyde sum, its far tail, the
    /// log-weighted sum.
    Gaussian(GaussianArgs),
    /// Continued-fraction digits, convergents, and Diophantine checks
    /// (JSON lines).
    Cf(CfArgs),
    /// Exact i.i.d. baselines for the deviation-series limits.
    IidBaseline(IidArgs),
    /// Full deviation-series experiment on an interval map (config-driven).
    Asymptotics(AsymptoticsArgs),
    /// Pressure, Lyapunov spectrum, and rate-function tables.
    Pressure(PressureArgs),
}

#[derive(Args)]
struct GaussianArgs {
    /// ρ for the Heyde sum ρ²ΣΦ(−ρ√n).
    #[arg(long)]
    rho: f64,
    /// Also report the scaled far tail ρ²Σ_{n≥K/ρ²}Φ(−ρ√n).
    #[arg(long)]
    k: Option<f64>,
    /// Also report the log-weighted sum IV(ε) at this ε.
    #[arg(long)]
    eps: Option<f64>,
    /// σ for the log-weighted sum.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

#[derive(Args)]
struct CfArgs {
    /// "p/q", a decimal in (0,1), or a named constant
    /// (golden, sqrt2, e, pi — fractional parts).
    #[arg(long)]
    input: String,
    /// Digits to extract.
    #[arg(long, default_value_t = 10)]
    digits: usize,
    /// Convergents to report (defaults to the digit count).
    #[arg(long)]
    convergents: Option<usize>,
    /// Working precision in bits for named constants.
    #[arg(long, default_value_t = 256)]
    bits: u64,
    /// Also run the two-sided Diophantine check per index.
    #[arg(long)]
    diophantine: bool,
}

#[derive(Args)]
struct IidArgs {
    /// "gaussian" or "bernoulli".
    #[arg(long)]
    dist: String,
    /// Comma-separated strictly decreasing ε grid.
    #[arg(long, value_delimiter = ',')]
    eps_grid: Vec<f64>,
    /// σ of the Gaussian baseline.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// ε grid for the log-weighted (Spătaru) report; defaults to the
    /// Heyde grid.
    #[arg(long, value_delimiter = ',')]
    spataru_grid: Option<Vec<f64>>,
    #[arg(long, default_value = "birklab-runs")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AsymptoticsArgs {
    /// TOML config path; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Recompute even when a cached payload exists.
    #[arg(long)]
    no_cache: bool,
    #[arg(long, default_value = "birklab-runs")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PressureArgs {
    /// TOML config path (solver + table sections).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    branch_direct: Option<usize>,
    #[arg(long, default_value = "birklab-runs")]
    out_dir: PathBuf,
}

/// Entry point for the binary: parse, dispatch, map errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Gaussian(args) => cmd_gaussian(args),
        Cmd::Cf(args) => cmd_cf(args),
        Cmd::IidBaseline(args) => cmd_iid(args),
        Cmd::Asymptotics(args) => cmd_asymptotics(args),
        Cmd::Pressure(args) => cmd_pressure(args),
    }
}

fn cmd_gaussian(args: GaussianArgs) -> Result<()> {
    let heyde = gaussian::heyde_gaussian_sum(args.rho)?;
    let mut out = serde_json::json!({
        "rho": heyde.rho,
        "value": heyde.value,
        "scaled": heyde.scaled,
        "truncation_n": heyde.truncation_n,
        "tail_bound": heyde.tail_bound,
    });
    if let Some(k) = args.k {
        out["tail_sum"] = serde_json::json!({
            "k": k,
            "scaled": gaussian::tail_gaussian_sum(args.rho, k)?,
        });
    }
    if let Some(eps) = args.eps {
        let iv = gaussian::log_weighted_gaussian_sum(eps, args.sigma)?;
        out["log_weighted"] = serde_json::json!({
            "eps": eps,
            "sigma": args.sigma,
            "value": iv,
            "normalized": iv / -eps.ln(),
        });
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn cmd_cf(args: CfArgs) -> Result<()> {
    let x = cf::parse_input(&args.input, args.bits)?;
    let expansion = cf::cf_digits(&x, args.digits)?;
    let digits: Vec<String> = expansion.digits.iter().map(|d| d.to_string()).collect();
    println!(
        "{}",
        serde_json::json!({
            "type": "digits",
            "input": args.input,
            "digits": digits,
            "terminated": expansion.terminated,
        })
    );
    let want = args.convergents.unwrap_or(args.digits).min(expansion.len());
    let pairs = cf::convergents(&expansion, want)?;
    for pair in &pairs {
        println!(
            "{}",
            serde_json::json!({
                "type": "convergent",
                "n": pair.index,
                "p": pair.p.to_string(),
                "q": pair.q.to_string(),
                "log_q": pair.log_q(),
                "levy_statistic": pair.log_q() / pair.index as f64,
            })
        );
    }
    if args.diophantine && want > 1 {
        let report = cf::diophantine_check(&x, want - 1)?;
        for rec in &report.records {
            println!(
                "{}",
                serde_json::json!({
                    "type": "diophantine",
                    "n": rec.n,
                    "lower": rec.lower,
                    "error": rec.error,
                    "upper": rec.upper,
                    "terminal": rec.terminal,
                    "passed": rec.passed,
                })
            );
        }
    }
    Ok(())
}

fn iid_experiment(args: &IidArgs) -> Result<Experiment> {
    let (source, rate) = match args.dist.as_str() {
        "gaussian" => (
            SampleSource::IidGaussian { sigma: args.sigma },
            RateHandle::Quadratic {
                sigma2: args.sigma * args.sigma,
            },
        ),
        "bernoulli" => (SampleSource::IidBernoulliBit, RateHandle::BernoulliBit),
        other => {
            return Err(Error::Config(format!(
                "unknown baseline {other:?} (gaussian, bernoulli)"
            )))
        }
    };
    Ok(Experiment {
        source,
        eps_grid: args.eps_grid.clone(),
        n_max: usize::MAX,
        samples: 10_000,
        seed: 0,
        ld: LdParams::default(),
        rate,
    })
}

fn cmd_iid(args: IidArgs) -> Result<()> {
    if args.eps_grid.is_empty() {
        return Err(Error::Config("--eps-grid is required".into()));
    }
    let exp = iid_experiment(&args)?;
    exp.validate()?;
    let series = deviation::lambda_series_multi(&exp)?;
    let heyde = deviation::heyde_from_series(&series);
    let spataru = match &args.spataru_grid {
        Some(grid) => {
            let mut e2 = exp.clone();
            e2.eps_grid = grid.clone();
            deviation::spataru_limit_estimate(&e2)?
        }
        None => deviation::spataru_limit_estimate(&exp)?,
    };
    let sigma2 = vec![deviation::estimate_sigma2(&exp, 100)?];
    let payload = AsymptoticsPayload {
        series,
        heyde,
        spataru,
        sigma2,
        ks: Vec::new(),
    };

    // hash over the flag-level description of the run
    let desc = serde_json::json!({
        "dist": args.dist,
        "eps_grid": args.eps_grid,
        "sigma": args.sigma,
        "spataru_grid": args.spataru_grid,
    });
    let hash = sha256_hex(desc.to_string().as_bytes());
    let summary = RunSummary::new(&hash, "iid-baseline", payload);
    write_run_artifacts(&args.out_dir, "iid-baseline", &hash, &summary)?;
    println!("{}", report::to_json_pretty(&summary)?);
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Compute the full asymptotics payload for a resolved experiment.
pub fn compute_asymptotics(resolved: &ResolvedExperiment) -> Result<AsymptoticsPayload> {
    let exp = &resolved.experiment;
    let series = deviation::lambda_series_multi(exp)?;
    let heyde = deviation::heyde_from_series(&series);
    let spataru = deviation::spataru_from_series(&series);
    let mut sigma2 = Vec::new();
    for &n_cal in &resolved.sigma2_n_cal {
        sigma2.push(deviation::estimate_sigma2(exp, n_cal)?);
    }
    let sigma = sigma2
        .first()
        .map(|v| v.sigma2.max(0.0).sqrt())
        .filter(|s| *s > 0.0);
    let mut ks = Vec::new();
    if let Some(sigma) = sigma {
        for &n in &resolved.ks_n {
            ks.push(deviation::ks_distance(exp, n, sigma)?);
        }
    }
    Ok(AsymptoticsPayload {
        series,
        heyde,
        spataru,
        sigma2,
        ks,
    })
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        Ok(f())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a {threads}-thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

fn cmd_asymptotics(args: AsymptoticsArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(grid) = &args.eps_grid {
        cfg.experiment.eps_grid = grid.clone();
    }
    if let Some(samples) = args.samples {
        cfg.experiment.samples = samples;
    }
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(n_max) = args.n_max {
        cfg.experiment.n_max = n_max;
    }
    if let Some(threads) = args.threads {
        cfg.experiment.threads = threads;
    }
    // Hash before resolving: a cache hit skips the whole estimator
    // stack, including the thermo rate-function build.
    let hash = cfg.canonical_hash();
    let cache_dir = cache::cache_dir(&args.out_dir);

    let cached = if args.no_cache {
        None
    } else {
        cache::load(&cache_dir, &hash)?
    };
    let payload = match cached {
        Some(p) => p,
        None => {
            let resolved = cfg.resolve()?;
            debug_assert_eq!(resolved.hash, hash);
            let payload = with_pool(resolved.threads, || compute_asymptotics(&resolved))??;
            cache::store(&cache_dir, &hash, &payload)?;
            payload
        }
    };
    let summary = RunSummary::new(&hash, "asymptotics", payload);
    write_run_artifacts(&args.out_dir, "asymptotics", &hash, &summary)?;
    println!("{}", report::to_json_pretty(&summary)?);
    Ok(())
}

fn write_run_artifacts(
    out_dir: &Path,
    subcommand: &str,
    hash: &str,
    summary: &RunSummary,
) -> Result<()> {
    let dir = report::run_dir(out_dir, subcommand, hash);
    let csv_path = dir.join("per_n.csv");
    let summary_path = dir.join("summary.json");
    let manifest_path = dir.join("manifest.json");
    report::write_artifact(&csv_path, &report::per_n_csv(&summary.payload.series))?;
    report::write_artifact(&summary_path, &report::to_json_pretty(summary)?)?;
    let manifest = RunManifest::new(
        hash,
        subcommand,
        vec![
            csv_path.display().to_string(),
            summary_path.display().to_string(),
        ],
    );
    report::write_artifact(&manifest_path, &report::to_json_pretty(&manifest)?)?;
    Ok(())
}

fn cmd_pressure(args: PressureArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(degree) = args.degree {
        cfg.solver.degree = degree;
    }
    if let Some(bd) = args.branch_direct {
        cfg.solver.branch_direct = bd;
    }
    let hash = cfg.canonical_hash();
    let solver = Arc::new(PressureSolver::new(cfg.solver)?);

    let t = &cfg.pressure_tables;
    if t.beta_count < 2 || t.alpha_count < 2 {
        return Err(Error::Config(
            "pressure tables need at least two grid points".into(),
        ));
    }
    let beta_grid: Vec<f64> = (0..t.beta_count)
        .map(|i| t.beta_lo + (t.beta_hi - t.beta_lo) * i as f64 / (t.beta_count - 1) as f64)
        .collect();
    let rows = pressure::pressure_table(&solver, &beta_grid)?;
    let two_gamma = crate::gauss_lyapunov();
    let alpha_grid: Vec<f64> = (0..t.alpha_count)
        .map(|i| {
            two_gamma - t.alpha_halfwidth
                + 2.0 * t.alpha_halfwidth * i as f64 / (t.alpha_count - 1) as f64
        })
        .collect();
    let srows = pressure::spectrum_table(&solver, &alpha_grid)?;
    let curvature = solver.rate_second_derivative_at_0()?;
    let (p_at_one, diag) = solver.pressure(1.0)?;
    let (p1_at_one, p2_at_one) = solver.pressure_derivatives(1.0)?;

    let mut pressure_csv = String::from("beta,P,P1,P2\n");
    for r in &rows {
        pressure_csv.push_str(&format!("{},{},{},{}\n", r.beta, r.p, r.p1, r.p2));
    }
    let mut spectrum_csv = String::from("alpha,beta,b,I\n");
    for r in &srows {
        spectrum_csv.push_str(&format!("{},{},{},{}\n", r.alpha, r.beta, r.b, r.rate));
    }

    let dir = report::run_dir(&args.out_dir, "pressure", &hash);
    let pressure_path = dir.join("pressure.csv");
    let spectrum_path = dir.join("spectrum.csv");
    report::write_artifact(&pressure_path, &pressure_csv)?;
    report::write_artifact(&spectrum_path, &spectrum_csv)?;
    let manifest = RunManifest::new(
        &hash,
        "pressure",
        vec![
            pressure_path.display().to_string(),
            spectrum_path.display().to_string(),
        ],
    );
    report::write_artifact(
        &dir.join("manifest.json"),
        &report::to_json_pretty(&manifest)?,
    )?;

    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "config_hash": hash,
            "degree": cfg.solver.degree,
            "p_at_1": p_at_one,
            "refinement_delta": diag.refinement_delta,
            "minus_p1_at_1": -p1_at_one,
            "p2_at_1": p2_at_one,
            "rate_curvature": curvature,
            "outputs": [pressure_path.display().to_string(), spectrum_path.display().to_string()],
        }))
        .expect("json")
    );
    Ok(())
}
