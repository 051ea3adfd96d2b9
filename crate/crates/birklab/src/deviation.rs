//! Deviation-measure estimation: Λₙ±(ε) per n, the deviation series
//! Λ(ε) = Σₙ Λₙ(ε) with a large-deviation-certified truncation, the
//! ε²-scaled limit and log-weighted variants, variance estimation, and
//! Kolmogorov–Smirnov diagnostics.
//!
//! Sampling measure is Lebesgue on (0,1); centering constants come from
//! the invariant measure through [`Observable::mean`]. Two estimator
//! backends share every interface: orbit Monte Carlo for interval maps,
//! and exact-law evaluation for the i.i.d. baselines (Gaussian via Φ,
//! fair bits via binomial tails).
//!
//! Monte Carlo orbits are keyed by (seed, stream, sample), so thread
//! count and work partitioning cannot move a single bit. One sample set
//! serves every ε — and the whole series shares orbit prefixes across n —
//! so monotonicity in ε is exact in the estimates, not just in the law.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian;
use crate::maps::{IntervalMap, Observable, DD_SWITCH};
use crate::pressure::RateFunction;
use crate::rng::CounterRng;

/// Stream tags separating the RNG substreams of one experiment.
mod stream {
    /// Per-n estimates use n itself as the stream.
    pub const SERIES: u64 = u64::MAX - 1;
    pub const SIGMA2: u64 = u64::MAX - 2;
    pub const KS: u64 = u64::MAX - 3;
    pub const GREEN_KUBO: u64 = u64::MAX - 4;
}

/// Max samples lost to orbit termination before the run is rejected.
const TERMINATION_RATE_LIMIT: f64 = 1e-3;

/// Relative tail target: truncate once the LD bound is below this times
/// the partial sum.
const TAIL_REL_TARGET: f64 = 1e-3;

/// Chunk width for deterministic parallel reduction.
const CHUNK: usize = 4096;

/// What generates the normalized sums Sₙf/n.
#[derive(Clone)]
pub enum SampleSource {
    /// Orbit Monte Carlo over an interval map.
    Map {
        map: Arc<IntervalMap>,
        observable: Arc<Observable>,
    },
    /// i.i.d. N(0, σ²) increments: Λₙ±(ε) = Φ(−ε√n/σ) exactly.
    IidGaussian { sigma: f64 },
    /// i.i.d. fair ±1/2 bits: exact binomial tails.
    IidBernoulliBit,
}

impl SampleSource {
    /// sup |f − mean| when known: deviations at ε beyond it are impossible.
    fn centered_sup_bound(&self) -> Option<f64> {
        match self {
            SampleSource::Map { observable, .. } => observable.centered_sup_bound(),
            SampleSource::IidGaussian { .. } => None,
            SampleSource::IidBernoulliBit => Some(0.5),
        }
    }

    /// Exact per-n deviation measure when the law is known in closed form.
    fn exact_lambda(&self, n: usize, eps: f64) -> Option<(f64, f64)> {
        match self {
            SampleSource::Map { .. } => None,
            SampleSource::IidGaussian { sigma } => {
                let p = gaussian::phi_cdf(-eps * (n as f64).sqrt() / sigma).ok()?;
                Some((p, p))
            }
            SampleSource::IidBernoulliBit => {
                let (plus, minus) = bernoulli_bit_lambda(n as u64, eps);
                Some((plus, minus))
            }
        }
    }

    fn is_exact(&self) -> bool {
        !matches!(self, SampleSource::Map { .. })
    }
}

/// Large-deviation constants: Λₙ±(ε) ≤ C·e^{−I(±ε)n} for ε ∈ (0, δ),
/// n > M/ε. C defaults to 1 and is not rigorous for the Gauss map —
/// the bound's existence is imported, its constant is not quantified.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdParams {
    pub c: f64,
    pub delta: f64,
    pub m: f64,
}

impl Default for LdParams {
    fn default() -> Self {
        LdParams {
            c: 1.0,
            delta: 0.5,
            m: 1.0,
        }
    }
}

/// Rate-function handle used to certify series tails.
#[derive(Clone)]
pub enum RateHandle {
    /// I(ε) = ε²/(2σ²): the Chernoff bound for Gaussian increments.
    Quadratic { sigma2: f64 },
    /// Cramér rate of fair ±1/2 bits.
    BernoulliBit,
    /// Thermodynamic rate function from the pressure stack.
    Thermo(Arc<RateFunction>),
}

impl RateHandle {
    pub fn eval(&self, eps: f64) -> Result<f64> {
        match self {
            RateHandle::Quadratic { sigma2 } => {
                if *sigma2 <= 0.0 {
                    return Err(Error::TailCertification(
                        "quadratic rate needs sigma2 > 0".into(),
                    ));
                }
                Ok(eps * eps / (2.0 * sigma2))
            }
            RateHandle::BernoulliBit => {
                if eps >= 0.5 {
                    return Ok(f64::INFINITY);
                }
                let p = 0.5 + eps;
                let q = 0.5 - eps;
                Ok(std::f64::consts::LN_2 + p * p.ln() + q * q.ln())
            }
            RateHandle::Thermo(rate) => rate.eval(eps),
        }
    }
}

/// A full experiment: source, ε grid, orbit horizon, sampling budget,
/// seed, and the LD certification constants.
#[derive(Clone)]
pub struct Experiment {
    pub source: SampleSource,
    pub eps_grid: Vec<f64>,
    pub n_max: usize,
    pub samples: usize,
    pub seed: u64,
    pub ld: LdParams,
    pub rate: RateHandle,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return Err(Error::Config("eps_grid must be non-empty".into()));
        }
        for w in self.eps_grid.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Config(format!(
                    "eps_grid must be strictly decreasing, got {} before {}",
                    w[0], w[1]
                )));
            }
        }
        for &e in &self.eps_grid {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Config(format!(
                    "eps values must be positive, got {e}"
                )));
            }
            if e >= self.ld.delta {
                return Err(Error::Config(format!(
                    "eps {e} is not below the LD window delta = {}",
                    self.ld.delta
                )));
            }
        }
        if self.samples < 1000 {
            return Err(Error::Config(format!(
                "samples = {} is below the statistical floor of 1000",
                self.samples
            )));
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be positive".into()));
        }
        Ok(())
    }
}

/// One per-n deviation estimate with binomial standard errors.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LambdaEstimate {
    pub n: usize,
    pub eps: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub stderr_plus: f64,
    pub stderr_minus: f64,
}

/// The assembled series Λ(ε) = Σ_{n≤N} Λₙ(ε) with its certified tail.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DeviationSeries {
    pub eps: f64,
    pub per_n: Vec<LambdaEstimate>,
    pub truncation_n: usize,
    /// Certified bound on the discarded Σ_{n>N} Λₙ(ε).
    pub tail_remainder: f64,
    /// Σ over per_n of (λ⁺ + λ⁻).
    pub value: f64,
    /// Standard error of `value` from per-orbit deviation counts
    /// (zero for exact i.i.d. backends).
    pub stderr: f64,
}

/// σ² estimate with the method tag and cross-check outcome.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct VarianceEstimate {
    pub sigma2: f64,
    pub method: String,
    pub n_used: usize,
    pub stderr: f64,
    /// Green–Kubo cross-check value and its stderr.
    pub autocovariance_sigma2: f64,
    pub autocovariance_stderr: f64,
    /// Set when the two routes disagree beyond 3 combined stderr or the
    /// autocovariance sum turns negative beyond noise.
    pub warning: Option<String>,
}

/// Kolmogorov–Smirnov distance of Sₙf/(σ√n) from Φ.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct KsReport {
    pub n: usize,
    pub delta_n: f64,
}

/// P(Bin(n, 1/2) ≥ k0) by pmf recurrence from the tail edge.
pub fn binomial_tail_ge(n: u64, k0: u64) -> f64 {
    if k0 > n {
        return 0.0;
    }
    if k0 == 0 {
        return 1.0;
    }
    // ln pmf(k0) = lnC(n,k0) − n ln 2
    let ln_pmf = libm::lgamma(n as f64 + 1.0)
        - libm::lgamma(k0 as f64 + 1.0)
        - libm::lgamma((n - k0) as f64 + 1.0)
        - n as f64 * std::f64::consts::LN_2;
    let mut pmf = ln_pmf.exp();
    let mut total = 0.0;
    let mut k = k0;
    while k <= n {
        total += pmf;
        if pmf < 1e-18 * total {
            break;
        }
        // pmf(k+1)/pmf(k) = (n−k)/(k+1) at p = 1/2
        pmf *= (n - k) as f64 / (k + 1) as f64;
        k += 1;
    }
    total.min(1.0)
}

/// P(Bin(n, 1/2) ≤ k).
pub fn binomial_cdf_le(n: u64, k: u64) -> f64 {
    if k >= n {
        return 1.0;
    }
    // symmetry: P(X ≤ k) = P(X ≥ n − k)
    binomial_tail_ge(n, n - k)
}

/// Exact (Λₙ⁺(ε), Λₙ⁻(ε)) for i.i.d. fair ±1/2 bits. The head-count
/// thresholds are found under the same f64 comparison the orbit
/// estimator applies — a rounded n·(1/2+ε) product can sit one atom off
/// right at a boundary (e.g. 100·0.55).
pub fn bernoulli_bit_lambda(n: u64, eps: f64) -> (f64, f64) {
    let nf = n as f64;
    let half = nf / 2.0;
    // smallest k with (k − n/2)/n ≥ ε
    let mut k_plus = (((0.5 + eps) * nf).floor() as i64 - 2).clamp(0, n as i64 + 1) as u64;
    while k_plus <= n && (k_plus as f64 - half) / nf < eps {
        k_plus += 1;
    }
    // largest k with (k − n/2)/n ≤ −ε
    let mut k_minus = (((0.5 - eps) * nf).ceil() as i64 + 2).min(n as i64);
    while k_minus >= 0 && (k_minus as f64 - half) / nf > -eps {
        k_minus -= 1;
    }
    let plus = binomial_tail_ge(n, k_plus);
    let minus = if k_minus < 0 {
        0.0
    } else {
        binomial_cdf_le(n, k_minus as u64)
    };
    (plus, minus)
}

/// Accumulated per-chunk counts for one ε.
#[derive(Clone)]
struct EpsCounts {
    /// counts[n-1] = (plus, minus)
    per_n: Vec<(u64, u64)>,
    /// Σ per-orbit total deviation count and its square, for the series
    /// stderr.
    orbit_total: f64,
    orbit_total_sq: f64,
}

impl EpsCounts {
    fn new(n_max: usize) -> EpsCounts {
        EpsCounts {
            per_n: vec![(0, 0); n_max],
            orbit_total: 0.0,
            orbit_total_sq: 0.0,
        }
    }

    fn merge(&mut self, other: &EpsCounts) {
        for (a, b) in self.per_n.iter_mut().zip(&other.per_n) {
            a.0 += b.0;
            a.1 += b.1;
        }
        self.orbit_total += other.orbit_total;
        self.orbit_total_sq += other.orbit_total_sq;
    }
}

/// Walk `samples` orbits to `n_max` steps, thresholding the running
/// averages against every ε. Deterministic under any thread count:
/// fixed chunks, merged in index order.
fn mc_deviation_counts(
    map: &IntervalMap,
    obs: &Observable,
    mean: f64,
    eps_list: &[f64],
    n_max: usize,
    samples: usize,
    rng: CounterRng,
) -> Result<(Vec<EpsCounts>, u64)> {
    let use_dd = n_max > DD_SWITCH;
    let chunks: Vec<usize> = (0..samples.div_ceil(CHUNK)).collect();
    let results: Vec<(Vec<EpsCounts>, u64)> = chunks
        .par_iter()
        .map(|&c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(samples);
            let mut counts: Vec<EpsCounts> =
                eps_list.iter().map(|_| EpsCounts::new(n_max)).collect();
            let mut terminated = 0u64;
            let mut totals = vec![0u64; eps_list.len()];
            for i in lo..hi {
                for t in totals.iter_mut() {
                    *t = 0;
                }
                let mut acc = if map.is_doubling() {
                    map.orbit_accumulator_bit_tape(obs, rng, i as u64)
                        .expect("doubling map accepts tapes")
                } else {
                    map.orbit_accumulator(obs, rng.uniform_open01(i as u64), use_dd)
                };
                let mut alive = true;
                for n in 1..=n_max {
                    match acc.step() {
                        Ok(sum) => {
                            let avg = sum / n as f64 - mean;
                            for (e, &eps) in eps_list.iter().enumerate() {
                                if avg >= eps {
                                    counts[e].per_n[n - 1].0 += 1;
                                    totals[e] += 1;
                                } else if avg <= -eps {
                                    counts[e].per_n[n - 1].1 += 1;
                                    totals[e] += 1;
                                }
                            }
                        }
                        Err(_) => {
                            alive = false;
                            break;
                        }
                    }
                }
                if !alive {
                    terminated += 1;
                } else {
                    for (e, &t) in totals.iter().enumerate() {
                        counts[e].orbit_total += t as f64;
                        counts[e].orbit_total_sq += (t * t) as f64;
                    }
                }
            }
            (counts, terminated)
        })
        .collect();

    let mut merged: Vec<EpsCounts> = eps_list.iter().map(|_| EpsCounts::new(n_max)).collect();
    let mut terminated = 0u64;
    for (chunk_counts, t) in &results {
        terminated += t;
        for (m, c) in merged.iter_mut().zip(chunk_counts) {
            m.merge(c);
        }
    }
    if terminated as f64 > TERMINATION_RATE_LIMIT * samples as f64 {
        return Err(Error::Integrity(format!(
            "{terminated} of {samples} orbits terminated (> {:.2}%): sampling hit \
             branch endpoints abnormally often",
            TERMINATION_RATE_LIMIT * 100.0
        )));
    }
    Ok((merged, terminated))
}

fn binomial_stderr(p_hat: f64, m: f64) -> f64 {
    (p_hat * (1.0 - p_hat) / m).sqrt()
}

/// Monte Carlo (or exact, for i.i.d. sources) estimate of
/// (Λₙ⁺(ε), Λₙ⁻(ε)) at a single n, sampling keyed by (seed, n, index).
pub fn estimate_lambda_n(exp: &Experiment, n: usize, eps: f64) -> Result<LambdaEstimate> {
    if n == 0 || !(eps > 0.0) {
        return Err(Error::domain("estimate_lambda_n needs n >= 1 and eps > 0"));
    }
    if let Some(bound) = exp.source.centered_sup_bound() {
        if eps > bound {
            return Ok(LambdaEstimate {
                n,
                eps,
                lambda_plus: 0.0,
                lambda_minus: 0.0,
                stderr_plus: 0.0,
                stderr_minus: 0.0,
            });
        }
    }
    if let Some((plus, minus)) = exp.source.exact_lambda(n, eps) {
        return Ok(LambdaEstimate {
            n,
            eps,
            lambda_plus: plus,
            lambda_minus: minus,
            stderr_plus: 0.0,
            stderr_minus: 0.0,
        });
    }
    let SampleSource::Map { map, observable } = &exp.source else {
        unreachable!()
    };
    let rng = CounterRng::new(exp.seed, n as u64);
    let (counts, terminated) = mc_deviation_counts(
        map,
        observable,
        observable.mean,
        &[eps],
        n,
        exp.samples,
        rng,
    )?;
    let m = (exp.samples as u64 - terminated) as f64;
    let (plus, minus) = counts[0].per_n[n - 1];
    let p = plus as f64 / m;
    let q = minus as f64 / m;
    Ok(LambdaEstimate {
        n,
        eps,
        lambda_plus: p,
        lambda_minus: q,
        stderr_plus: binomial_stderr(p, m),
        stderr_minus: binomial_stderr(q, m),
    })
}

/// Truncation index for the series at `eps`: the smallest N with
/// N ≥ M/ε and C·e^{−I·N}/(1−e^{−I}) below the target.
fn tail_bound(ld: &LdParams, rate: f64, n: usize) -> f64 {
    let q = (-rate).exp();
    ld.c * (-rate * n as f64).exp() * q / (1.0 - q)
}

fn truncation_for(ld: &LdParams, rate: f64, eps: f64, target_abs: f64) -> usize {
    let floor_n = (ld.m / eps).ceil() as usize + 1;
    let q = (-rate).exp();
    // C·q^{N+1}/(1−q) < target  ⇒  N > (ln C − ln(target(1−q)))/rate − 1
    let n = ((ld.c / (target_abs * (1.0 - q))).ln() / rate).ceil();
    let n = if n.is_finite() && n > 0.0 {
        n as usize
    } else {
        1
    };
    n.max(floor_n)
}

/// Assemble the deviation series at every ε of the experiment grid in
/// one pass (orbit prefixes shared across n and across ε).
pub fn lambda_series_multi(exp: &Experiment) -> Result<Vec<DeviationSeries>> {
    exp.validate()?;
    let mut out: Vec<Option<DeviationSeries>> = vec![None; exp.eps_grid.len()];

    // ε beyond the sup bound: exact zero series without sampling.
    let sup = exp.source.centered_sup_bound();
    let mut live: Vec<(usize, f64, f64)> = Vec::new(); // (slot, eps, rate)
    for (slot, &eps) in exp.eps_grid.iter().enumerate() {
        if let Some(bound) = sup {
            if eps > bound {
                out[slot] = Some(DeviationSeries {
                    eps,
                    per_n: Vec::new(),
                    truncation_n: 0,
                    tail_remainder: 0.0,
                    value: 0.0,
                    stderr: 0.0,
                });
                continue;
            }
        }
        let rate = exp.rate.eval(eps)?;
        if !(rate > 0.0) {
            return Err(Error::TailCertification(format!(
                "rate function non-positive at eps = {eps}: I = {rate}; \
                 eps is outside the positivity region"
            )));
        }
        if rate.is_infinite() {
            out[slot] = Some(DeviationSeries {
                eps,
                per_n: Vec::new(),
                truncation_n: 0,
                tail_remainder: 0.0,
                value: 0.0,
                stderr: 0.0,
            });
            continue;
        }
        live.push((slot, eps, rate));
    }
    if live.is_empty() {
        return Ok(out.into_iter().map(|s| s.expect("filled")).collect());
    }

    match &exp.source {
        source if source.is_exact() => {
            for &(slot, eps, rate) in &live {
                let mut per_n = Vec::new();
                let mut value = 0.0f64;
                let mut n = 0usize;
                let floor_n = (exp.ld.m / eps).ceil() as usize + 1;
                loop {
                    n += 1;
                    let (plus, minus) = source.exact_lambda(n, eps).expect("exact source");
                    value += plus + minus;
                    per_n.push(LambdaEstimate {
                        n,
                        eps,
                        lambda_plus: plus,
                        lambda_minus: minus,
                        stderr_plus: 0.0,
                        stderr_minus: 0.0,
                    });
                    if n >= floor_n && tail_bound(&exp.ld, rate, n) < TAIL_REL_TARGET * value {
                        break;
                    }
                    if n >= 200_000_000 {
                        return Err(Error::TailCertification(format!(
                            "series at eps = {eps} not certified within 2e8 terms"
                        )));
                    }
                }
                out[slot] = Some(DeviationSeries {
                    eps,
                    tail_remainder: tail_bound(&exp.ld, rate, n),
                    truncation_n: n,
                    per_n,
                    value,
                    stderr: 0.0,
                });
            }
        }
        SampleSource::Map { map, observable } => {
            // Iterative deepening: rerun the (deterministic) pass with a
            // doubled horizon until every live ε certifies its tail.
            let rng = CounterRng::new(exp.seed, stream::SERIES);
            let eps_list: Vec<f64> = live.iter().map(|&(_, e, _)| e).collect();
            let mut horizon = live
                .iter()
                .map(|&(_, eps, rate)| truncation_for(&exp.ld, rate, eps, TAIL_REL_TARGET))
                .max()
                .expect("nonempty");
            loop {
                horizon = horizon.min(exp.n_max.max(1));
                let (counts, terminated) = mc_deviation_counts(
                    map,
                    observable,
                    observable.mean,
                    &eps_list,
                    horizon,
                    exp.samples,
                    rng,
                )?;
                let m = (exp.samples as u64 - terminated) as f64;
                let mut all_done = true;
                for (idx, &(slot, eps, rate)) in live.iter().enumerate() {
                    // smallest N ≥ M/ε with the bound below target
                    let mut partial = 0.0f64;
                    let mut chosen = None;
                    let floor_n = ((exp.ld.m / eps).ceil() as usize + 1).min(horizon);
                    for n in 1..=horizon {
                        let (p, q) = counts[idx].per_n[n - 1];
                        partial += (p + q) as f64 / m;
                        if n >= floor_n
                            && tail_bound(&exp.ld, rate, n) < TAIL_REL_TARGET * partial.max(1e-12)
                        {
                            chosen = Some(n);
                            break;
                        }
                    }
                    match chosen {
                        Some(n_trunc) => {
                            let per_n: Vec<LambdaEstimate> = (1..=n_trunc)
                                .map(|n| {
                                    let (p, q) = counts[idx].per_n[n - 1];
                                    let lp = p as f64 / m;
                                    let lq = q as f64 / m;
                                    LambdaEstimate {
                                        n,
                                        eps,
                                        lambda_plus: lp,
                                        lambda_minus: lq,
                                        stderr_plus: binomial_stderr(lp, m),
                                        stderr_minus: binomial_stderr(lq, m),
                                    }
                                })
                                .collect();
                            let value: f64 =
                                per_n.iter().map(|e| e.lambda_plus + e.lambda_minus).sum();
                            // per-orbit count variance over the full horizon
                            // dominates the truncated-series variance
                            let mean_t = counts[idx].orbit_total / m;
                            let var_t = (counts[idx].orbit_total_sq / m - mean_t * mean_t).max(0.0);
                            out[slot] = Some(DeviationSeries {
                                eps,
                                per_n,
                                truncation_n: n_trunc,
                                tail_remainder: tail_bound(&exp.ld, rate, n_trunc),
                                value,
                                stderr: (var_t / m).sqrt(),
                            });
                        }
                        None => all_done = false,
                    }
                }
                if all_done {
                    break;
                }
                if horizon >= exp.n_max {
                    return Err(Error::TailCertification(format!(
                        "series tail not certified within n_max = {}; raise n_max or \
                         enlarge the LD window",
                        exp.n_max
                    )));
                }
                horizon *= 2;
                // redo every sampled slot at the deeper horizon so all of
                // them come from one pass (zero slots keep truncation 0)
                for slot_out in out.iter_mut() {
                    if slot_out
                        .as_ref()
                        .map(|s| s.truncation_n > 0)
                        .unwrap_or(false)
                    {
                        *slot_out = None;
                    }
                }
            }
        }
        _ => unreachable!("exact sources handled above"),
    }

    Ok(out.into_iter().map(|s| s.expect("filled")).collect())
}

/// Single-ε convenience wrapper over [`lambda_series_multi`].
pub fn lambda_series(exp: &Experiment, eps: f64) -> Result<DeviationSeries> {
    let mut one = exp.clone();
    one.eps_grid = vec![eps];
    Ok(lambda_series_multi(&one)?.remove(0))
}

/// One scaled series point ε²Λ(ε).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ScaledPoint {
    pub eps: f64,
    pub scaled: f64,
    pub stderr: f64,
}

/// ε²Λ(ε) over the grid plus the linear-in-ε extrapolation to 0.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HeydeReport {
    pub points: Vec<ScaledPoint>,
    /// Intercept of the a + b·ε fit through the three smallest ε.
    pub extrapolated: f64,
    /// Heuristic uncertainty of the intercept.
    pub extrapolated_stderr: f64,
    /// The raw value at the smallest ε, for comparison.
    pub raw_smallest: f64,
}

/// Least squares a + b·x; returns (a, stderr_a) given per-point stderrs.
fn linear_intercept(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        let (sum, var) = points
            .iter()
            .fold((0.0, 0.0), |(s, v), p| (s + p.1, v + p.2 * p.2));
        return (sum / n, var.sqrt() / n);
    }
    let a = (sy * sxx - sx * sxy) / det;
    // propagate the per-point errors through the intercept weights
    let var_a: f64 = points
        .iter()
        .map(|p| {
            let w = (sxx - sx * p.0) / det;
            (w * p.2).powi(2)
        })
        .sum();
    (a, var_a.sqrt())
}

/// The ε → 0 limit of ε²Λ(ε) via the grid and a linear fit over the three
/// smallest ε (raw smallest-ε value reported alongside).
pub fn heyde_limit_estimate(exp: &Experiment) -> Result<HeydeReport> {
    let series = lambda_series_multi(exp)?;
    Ok(heyde_from_series(&series))
}

/// Heyde report from already-assembled series rows.
pub fn heyde_from_series(series: &[DeviationSeries]) -> HeydeReport {
    let points: Vec<ScaledPoint> = series
        .iter()
        .map(|s| ScaledPoint {
            eps: s.eps,
            scaled: s.eps * s.eps * s.value,
            stderr: s.eps * s.eps * s.stderr,
        })
        .collect();
    let mut smallest: Vec<(f64, f64, f64)> =
        points.iter().map(|p| (p.eps, p.scaled, p.stderr)).collect();
    smallest.sort_by(|a, b| a.0.total_cmp(&b.0));
    smallest.truncate(3);
    let (extrapolated, extrapolated_stderr) = linear_intercept(&smallest);
    HeydeReport {
        raw_smallest: smallest.first().map(|p| p.1).unwrap_or(0.0),
        points,
        extrapolated,
        extrapolated_stderr,
    }
}

/// One normalized log-weighted point (−log ε)⁻¹ Σ Λₙ(ε)/n.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SpataruPoint {
    pub eps: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SpataruReport {
    pub points: Vec<SpataruPoint>,
    /// |normalized − 2| non-increasing along the decreasing ε grid.
    pub monotone_toward_two: bool,
}

/// The log-weighted series (−log ε)⁻¹ ΣΛₙ(ε)/n over the grid.
///
/// The Gaussian baseline routes through the dedicated Φ-series machinery
/// (exact and fast at tiny ε); other sources reuse the LD-truncated rows.
pub fn spataru_limit_estimate(exp: &Experiment) -> Result<SpataruReport> {
    exp.validate()?;
    if let SampleSource::IidGaussian { sigma } = &exp.source {
        let mut points = Vec::with_capacity(exp.eps_grid.len());
        for &eps in &exp.eps_grid {
            let iv = gaussian::log_weighted_gaussian_sum(eps, *sigma)?;
            points.push(SpataruPoint {
                eps,
                normalized: 2.0 * iv / -eps.ln(),
            });
        }
        return Ok(assemble_spataru(points));
    }
    let series = lambda_series_multi(exp)?;
    Ok(spataru_from_series(&series))
}

/// Spătaru report from already-assembled series rows.
pub fn spataru_from_series(series: &[DeviationSeries]) -> SpataruReport {
    let mut points = Vec::with_capacity(series.len());
    for s in series {
        let sum: f64 = s
            .per_n
            .iter()
            .map(|e| (e.lambda_plus + e.lambda_minus) / e.n as f64)
            .sum();
        let tail = if s.truncation_n > 0 {
            s.tail_remainder / s.truncation_n as f64
        } else {
            0.0
        };
        points.push(SpataruPoint {
            eps: s.eps,
            normalized: (sum + tail) / -s.eps.ln(),
        });
    }
    assemble_spataru(points)
}

fn assemble_spataru(points: Vec<SpataruPoint>) -> SpataruReport {
    let mut monotone = true;
    for w in points.windows(2) {
        if (w[1].normalized - 2.0).abs() > (w[0].normalized - 2.0).abs() + 1e-12 {
            monotone = false;
        }
    }
    SpataruReport {
        points,
        monotone_toward_two: monotone,
    }
}

/// Batch-means σ² = Var(Sₙf/√n) over independent orbits, cross-checked
/// by a Green–Kubo autocovariance series with adaptive lag cutoff.
pub fn estimate_sigma2(exp: &Experiment, n_cal: usize) -> Result<VarianceEstimate> {
    if n_cal < 2 {
        return Err(Error::domain("estimate_sigma2 needs n_cal >= 2"));
    }
    match &exp.source {
        SampleSource::IidGaussian { sigma } => {
            return Ok(VarianceEstimate {
                sigma2: sigma * sigma,
                method: "exact".into(),
                n_used: n_cal,
                stderr: 0.0,
                autocovariance_sigma2: sigma * sigma,
                autocovariance_stderr: 0.0,
                warning: None,
            })
        }
        SampleSource::IidBernoulliBit => {
            return Ok(VarianceEstimate {
                sigma2: 0.25,
                method: "exact".into(),
                n_used: n_cal,
                stderr: 0.0,
                autocovariance_sigma2: 0.25,
                autocovariance_stderr: 0.0,
                warning: None,
            })
        }
        SampleSource::Map { .. } => {}
    }
    let SampleSource::Map { map, observable } = &exp.source else {
        unreachable!()
    };
    let mean = observable.mean;

    // Constant observables have no fluctuation at all.
    if observable.centered_sup_bound() == Some(0.0) {
        return Ok(VarianceEstimate {
            sigma2: 0.0,
            method: "batch-means".into(),
            n_used: n_cal,
            stderr: 0.0,
            autocovariance_sigma2: 0.0,
            autocovariance_stderr: 0.0,
            warning: None,
        });
    }

    let rng = CounterRng::new(exp.seed, stream::SIGMA2 ^ n_cal as u64);
    let values = collect_normalized_sums(map, observable, mean, n_cal, exp.samples, rng)?;
    let m = values.len() as f64;
    let mean_v: f64 = values.iter().sum::<f64>() / m;
    let var: f64 = values.iter().map(|v| (v - mean_v).powi(2)).sum::<f64>() / (m - 1.0);
    // stderr of the sample variance from the fourth moment
    let mu4: f64 = values.iter().map(|v| (v - mean_v).powi(4)).sum::<f64>() / m;
    let stderr = ((mu4 - var * var).max(0.0) / m).sqrt();

    // KS gate on the normalization: the batch means should already be
    // near-Gaussian at this n.
    if var > 0.0 {
        let mut z: Vec<f64> = values.iter().map(|v| v / var.sqrt()).collect();
        let delta = ks_statistic_against_phi(&mut z);
        if delta >= 0.05 {
            return Err(Error::Integrity(format!(
                "KS diagnostic {delta:.4} at n_cal = {n_cal} fails the < 0.05 gate; \
                 n_cal too small for the CLT regime"
            )));
        }
    }

    let (gk, gk_se, negative_tail) = green_kubo_sigma2(map, observable, mean, exp, n_cal)?;
    let mut warning = None;
    if negative_tail {
        warning = Some("autocovariance sum dipped negative beyond noise".into());
    } else if (var - gk).abs() > 3.0 * (stderr + gk_se) {
        warning = Some(format!(
            "batch-means {var:.4} and autocovariance {gk:.4} disagree beyond 3 stderr"
        ));
    }
    Ok(VarianceEstimate {
        sigma2: var,
        method: "batch-means".into(),
        n_used: n_cal,
        stderr,
        autocovariance_sigma2: gk,
        autocovariance_stderr: gk_se,
        warning,
    })
}

/// (Sₙf − n·mean)/√n over independent keyed orbits.
fn collect_normalized_sums(
    map: &IntervalMap,
    obs: &Observable,
    mean: f64,
    n: usize,
    samples: usize,
    rng: CounterRng,
) -> Result<Vec<f64>> {
    let use_dd = n > DD_SWITCH;
    let chunks: Vec<usize> = (0..samples.div_ceil(CHUNK)).collect();
    let per_chunk: Vec<(Vec<f64>, u64)> = chunks
        .par_iter()
        .map(|&c| {
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(samples);
            let mut vals = Vec::with_capacity(hi - lo);
            let mut terminated = 0u64;
            for i in lo..hi {
                let mut acc = if map.is_doubling() {
                    map.orbit_accumulator_bit_tape(obs, rng, i as u64)
                        .expect("doubling map accepts tapes")
                } else {
                    map.orbit_accumulator(obs, rng.uniform_open01(i as u64), use_dd)
                };
                let mut sum = Ok(0.0);
                for _ in 0..n {
                    sum = acc.step();
                    if sum.is_err() {
                        break;
                    }
                }
                match sum {
                    Ok(s) => vals.push((s - n as f64 * mean) / (n as f64).sqrt()),
                    Err(_) => terminated += 1,
                }
            }
            (vals, terminated)
        })
        .collect();
    let mut values = Vec::with_capacity(samples);
    let mut terminated = 0u64;
    for (vals, t) in per_chunk {
        values.extend(vals);
        terminated += t;
    }
    if terminated as f64 > TERMINATION_RATE_LIMIT * samples as f64 {
        return Err(Error::Integrity(format!(
            "{terminated} of {samples} orbits terminated during variance estimation"
        )));
    }
    Ok(values)
}

/// Green–Kubo: σ² = c₀ + 2Σ_{ℓ≥1} c_ℓ with an adaptive cutoff, averaged
/// over independent orbits.
fn green_kubo_sigma2(
    map: &IntervalMap,
    obs: &Observable,
    mean: f64,
    exp: &Experiment,
    n_cal: usize,
) -> Result<(f64, f64, bool)> {
    const ORBITS: usize = 24;
    let len = (n_cal * 16).clamp(4096, 200_000);
    let max_lag = 200.min(len / 16);
    let rng = CounterRng::new(exp.seed, stream::GREEN_KUBO);
    let estimates: Vec<Option<(f64, bool)>> = (0..ORBITS)
        .into_par_iter()
        .map(|i| {
            let mut acc = if map.is_doubling() {
                map.orbit_accumulator_bit_tape(obs, rng, i as u64)
                    .expect("doubling tape")
            } else {
                map.orbit_accumulator(obs, rng.uniform_open01(i as u64), true)
            };
            let mut series = Vec::with_capacity(len);
            let mut prev = 0.0;
            for _ in 0..len {
                match acc.step() {
                    Ok(s) => {
                        series.push(s - prev - mean);
                        prev = s;
                    }
                    Err(_) => return None,
                }
            }
            let m = series.len() as f64;
            let bar: f64 = series.iter().sum::<f64>() / m;
            let cov = |lag: usize| -> f64 {
                let mut s = 0.0;
                for t in 0..series.len() - lag {
                    s += (series[t] - bar) * (series[t + lag] - bar);
                }
                s / (m - lag as f64)
            };
            let c0 = cov(0);
            let noise = c0 / (m.sqrt());
            let mut total = c0;
            let mut quiet = 0;
            for lag in 1..=max_lag {
                let c = cov(lag);
                total += 2.0 * c;
                if c.abs() < 2.0 * noise {
                    quiet += 1;
                    if quiet >= 3 {
                        break;
                    }
                } else {
                    quiet = 0;
                }
            }
            Some((total, total < -2.0 * noise))
        })
        .collect();
    let kept: Vec<(f64, bool)> = estimates.into_iter().flatten().collect();
    if kept.len() < ORBITS / 2 {
        return Err(Error::Integrity(
            "too many Green-Kubo orbits terminated".into(),
        ));
    }
    let m = kept.len() as f64;
    let mean_gk: f64 = kept.iter().map(|e| e.0).sum::<f64>() / m;
    let var_gk: f64 =
        kept.iter().map(|e| (e.0 - mean_gk).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let negative = kept.iter().any(|e| e.1);
    Ok((mean_gk, (var_gk / m).sqrt(), negative))
}

/// Two-sided KS statistic of a sample against Φ (sorts in place).
pub fn ks_statistic_against_phi(sample: &mut [f64]) -> f64 {
    sample.sort_by(|a, b| a.total_cmp(b));
    let m = sample.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = gaussian::phi_cdf(x).unwrap_or(0.5);
        sup = sup
            .max((f - i as f64 / m).abs())
            .max(((i + 1) as f64 / m - f).abs());
    }
    sup
}

/// Δₙ = sup |law of Sₙf/(σ√n) − Φ|: exact for the fair-bit baseline,
/// sampled otherwise.
pub fn ks_distance(exp: &Experiment, n: usize, sigma: f64) -> Result<KsReport> {
    if !(sigma > 0.0) {
        return Err(Error::domain("ks_distance needs sigma > 0"));
    }
    match &exp.source {
        SampleSource::IidBernoulliBit => {
            // exact: sup over the binomial atoms, both one-sided limits
            let nn = n as u64;
            let mut sup = 0.0f64;
            let mut cdf_prev = 0.0;
            for k in 0..=nn {
                let cdf = binomial_cdf_le(nn, k);
                let z = (k as f64 - n as f64 / 2.0) / (sigma * (n as f64).sqrt());
                let phi = gaussian::phi_cdf(z)?;
                sup = sup.max((cdf - phi).abs()).max((cdf_prev - phi).abs());
                cdf_prev = cdf;
            }
            Ok(KsReport { n, delta_n: sup })
        }
        SampleSource::IidGaussian { sigma: s } => {
            let rng = CounterRng::new(exp.seed, stream::KS ^ n as u64);
            let mut z: Vec<f64> = (0..exp.samples as u64)
                .map(|i| rng.normal_at(i, 0) * s / sigma)
                .collect();
            Ok(KsReport {
                n,
                delta_n: ks_statistic_against_phi(&mut z),
            })
        }
        SampleSource::Map { map, observable } => {
            let rng = CounterRng::new(exp.seed, stream::KS ^ n as u64);
            let mut z =
                collect_normalized_sums(map, observable, observable.mean, n, exp.samples, rng)?;
            for v in z.iter_mut() {
                *v /= sigma;
            }
            Ok(KsReport {
                n,
                delta_n: ks_statistic_against_phi(&mut z),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{self, IntervalMap, Observable};

    fn binary_bit_experiment(samples: usize, seed: u64) -> Experiment {
        Experiment {
            source: SampleSource::Map {
                map: Arc::new(IntervalMap::binary()),
                observable: Arc::new(Observable::centered_bit()),
            },
            eps_grid: vec![0.1, 0.05],
            n_max: 100_000,
            samples,
            seed,
            ld: LdParams::default(),
            rate: RateHandle::BernoulliBit,
        }
    }

    #[test]
    fn binomial_tail_anchors() {
        // P(Bin(100, 1/2) ≥ 60) = 0.028443966820490392
        assert!((binomial_tail_ge(100, 60) - 0.02844396682049039).abs() < 1e-12);
        assert_eq!(binomial_tail_ge(10, 0), 1.0);
        assert_eq!(binomial_tail_ge(10, 11), 0.0);
        assert!((binomial_tail_ge(10, 5) + binomial_cdf_le(10, 4) - 1.0).abs() < 1e-12);
        // symmetry
        assert!((binomial_cdf_le(100, 40) - binomial_tail_ge(100, 60)).abs() < 1e-14);
    }

    #[test]
    fn zero_observable_gives_zero_everywhere() {
        let exp = Experiment {
            source: SampleSource::Map {
                map: Arc::new(IntervalMap::gauss()),
                observable: Arc::new(Observable::zero()),
            },
            eps_grid: vec![0.3, 0.2],
            n_max: 1000,
            samples: 1000,
            seed: 1,
            ld: LdParams::default(),
            rate: RateHandle::Quadratic { sigma2: 1.0 },
        };
        let est = estimate_lambda_n(&exp, 5, 0.2).unwrap();
        assert_eq!((est.lambda_plus, est.lambda_minus), (0.0, 0.0));
        let series = lambda_series_multi(&exp).unwrap();
        assert!(series.iter().all(|s| s.value == 0.0));
        let heyde = heyde_limit_estimate(&exp).unwrap();
        assert_eq!(heyde.extrapolated, 0.0);
        let spataru = spataru_limit_estimate(&exp).unwrap();
        assert!(spataru.points.iter().all(|p| p.normalized == 0.0));
    }

    #[test]
    fn eps_beyond_sup_bound_is_exact_zero() {
        let exp = binary_bit_experiment(1000, 7);
        // sup |f| = 1/2 < 0.7: impossible deviation, no sampling needed
        let est = estimate_lambda_n(&exp, 1, 0.7).unwrap();
        assert_eq!((est.lambda_plus, est.lambda_minus), (0.0, 0.0));
    }

    #[test]
    fn binary_map_matches_binomial_oracle() {
        // Λₙ⁺(0.1) at n = 100 is P(Bin(100,1/2) ≥ 60) = 0.0284…
        let exp = binary_bit_experiment(100_000, 42);
        let est = estimate_lambda_n(&exp, 100, 0.1).unwrap();
        let exact = binomial_tail_ge(100, 60);
        assert!(
            (est.lambda_plus - exact).abs() < 4.0 * est.stderr_plus,
            "plus {} vs exact {exact} (se {})",
            est.lambda_plus,
            est.stderr_plus
        );
        assert!((est.lambda_minus - exact).abs() < 4.0 * est.stderr_minus);
    }

    #[test]
    fn lambda_series_binary_vs_exact_summation() {
        let mc = binary_bit_experiment(60_000, 11);
        let exact = Experiment {
            source: SampleSource::IidBernoulliBit,
            ..mc.clone()
        };
        let eps = 0.05;
        let s_mc = lambda_series(&mc, eps).unwrap();
        let s_exact = lambda_series(&exact, eps).unwrap();
        assert!(s_exact.stderr == 0.0);
        let gap = (s_mc.value - s_exact.value).abs();
        assert!(
            gap < 3.0 * s_mc.stderr.max(1e-12),
            "MC {} vs exact {} (se {})",
            s_mc.value,
            s_exact.value,
            s_mc.stderr
        );
        // tail actually certified
        assert!(s_exact.tail_remainder < TAIL_REL_TARGET * s_exact.value);
    }

    #[test]
    fn eps_monotonicity_is_exact_with_shared_samples() {
        let exp = binary_bit_experiment(20_000, 3);
        let series = lambda_series_multi(&exp).unwrap();
        // smaller eps ⇒ larger (or equal) per-n estimates, deterministically
        let n_common = series[0].per_n.len().min(series[1].per_n.len());
        for i in 0..n_common {
            // grid is decreasing: series[1] has the smaller eps
            assert!(
                series[1].per_n[i].lambda_plus >= series[0].per_n[i].lambda_plus,
                "monotonicity broken at n = {}",
                i + 1
            );
        }
    }

    #[test]
    fn gaussian_heyde_limit_is_one() {
        let exp = Experiment {
            source: SampleSource::IidGaussian { sigma: 1.0 },
            eps_grid: vec![0.1, 0.05, 0.02],
            n_max: usize::MAX,
            samples: 1000,
            seed: 0,
            ld: LdParams::default(),
            rate: RateHandle::Quadratic { sigma2: 1.0 },
        };
        let heyde = heyde_limit_estimate(&exp).unwrap();
        assert!(
            (heyde.extrapolated - 1.0).abs() < 0.05,
            "extrapolated {} (points {:?})",
            heyde.extrapolated,
            heyde.points
        );
    }

    #[test]
    fn bernoulli_heyde_limit_is_quarter() {
        let exp = Experiment {
            source: SampleSource::IidBernoulliBit,
            eps_grid: vec![0.1, 0.05, 0.02],
            n_max: usize::MAX,
            samples: 1000,
            seed: 0,
            ld: LdParams::default(),
            rate: RateHandle::BernoulliBit,
        };
        let heyde = heyde_limit_estimate(&exp).unwrap();
        assert!(
            (heyde.extrapolated - 0.25).abs() < 0.025,
            "extrapolated {}",
            heyde.extrapolated
        );
    }

    #[test]
    fn spataru_gaussian_trend() {
        let exp = Experiment {
            source: SampleSource::IidGaussian { sigma: 1.0 },
            eps_grid: vec![1e-2, 1e-3, 1e-4],
            n_max: usize::MAX,
            samples: 1000,
            seed: 0,
            ld: LdParams {
                delta: 0.5,
                ..Default::default()
            },
            rate: RateHandle::Quadratic { sigma2: 1.0 },
        };
        let rep = spataru_limit_estimate(&exp).unwrap();
        let at_1e3 = rep.points[1].normalized;
        assert!((1.6..=2.4).contains(&at_1e3), "value {at_1e3}");
        assert!(rep.monotone_toward_two, "points {:?}", rep.points);
    }

    #[test]
    fn sigma2_bernoulli_bits() {
        let exp = binary_bit_experiment(20_000, 5);
        let est = estimate_sigma2(&exp, 400).unwrap();
        assert!(
            (est.sigma2 - 0.25).abs() < 0.05 * 0.25,
            "sigma2 {} ± {}",
            est.sigma2,
            est.stderr
        );
        assert!(est.warning.is_none(), "{:?}", est.warning);
        // Green-Kubo agrees for i.i.d. bits
        assert!((est.autocovariance_sigma2 - 0.25).abs() < 0.05);
    }

    #[test]
    fn sigma2_constant_observable_is_zero() {
        let exp = Experiment {
            source: SampleSource::Map {
                map: Arc::new(IntervalMap::gauss()),
                observable: Arc::new(Observable::constant(3.0)),
            },
            eps_grid: vec![0.1],
            n_max: 1000,
            samples: 1000,
            seed: 2,
            ld: LdParams::default(),
            rate: RateHandle::Quadratic { sigma2: 1.0 },
        };
        assert_eq!(estimate_sigma2(&exp, 100).unwrap().sigma2, 0.0);
    }

    #[test]
    fn ks_distance_behaviors() {
        // Gaussian baseline: pure sampling noise, ~1.36/√m at 95%.
        let exp = Experiment {
            source: SampleSource::IidGaussian { sigma: 1.0 },
            eps_grid: vec![0.1],
            n_max: 1000,
            samples: 4000,
            seed: 9,
            ld: LdParams::default(),
            rate: RateHandle::Quadratic { sigma2: 1.0 },
        };
        let d = ks_distance(&exp, 50, 1.0).unwrap();
        assert!(d.delta_n < 1.95 / (4000f64).sqrt(), "delta {}", d.delta_n);

        // Fair bits: discreteness dominates at n = 10, fades by n = 1000.
        let bits = Experiment {
            source: SampleSource::IidBernoulliBit,
            ..exp.clone()
        };
        let d10 = ks_distance(&bits, 10, 0.5).unwrap();
        let d1000 = ks_distance(&bits, 1000, 0.5).unwrap();
        assert!(d10.delta_n > d1000.delta_n);
        assert!(d10.delta_n > 0.05 && d1000.delta_n < 0.02);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let exp = binary_bit_experiment(30_000, 77);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| lambda_series_multi(&exp).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
            assert_eq!(x.truncation_n, y.truncation_n);
            for (p, q) in x.per_n.iter().zip(&y.per_n) {
                assert_eq!(p.lambda_plus.to_bits(), q.lambda_plus.to_bits());
                assert_eq!(p.lambda_minus.to_bits(), q.lambda_minus.to_bits());
            }
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut exp = binary_bit_experiment(5000, 0);
        exp.eps_grid = vec![0.05, 0.1];
        assert!(matches!(lambda_series_multi(&exp), Err(Error::Config(_))));
        let mut exp = binary_bit_experiment(5000, 0);
        exp.samples = 10;
        assert!(matches!(exp.validate(), Err(Error::Config(_))));
        let mut exp = binary_bit_experiment(5000, 0);
        exp.eps_grid = vec![0.9];
        assert!(matches!(exp.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn series_sum_respects_unit_bound() {
        // λ⁺ₙ + λ⁻ₙ ≤ 1 + 2·stderr on every assembled row.
        let exp = binary_bit_experiment(5000, 21);
        for s in lambda_series_multi(&exp).unwrap() {
            for e in &s.per_n {
                assert!(
                    e.lambda_plus + e.lambda_minus <= 1.0 + 2.0 * (e.stderr_plus + e.stderr_minus),
                    "unit bound broken at n = {}",
                    e.n
                );
            }
        }
    }

    #[test]
    fn per_n_estimates_track_phi_within_ks_diagnostic() {
        // Coupling of the two pillars: |λₙ(ε) − 2Φ(−ε√n/σ)| ≤ 2Δₙ plus
        // Monte Carlo noise, with Δₙ the exact binomial-vs-Φ distance.
        let exp = binary_bit_experiment(50_000, 33);
        let eps = 0.1;
        let sigma = 0.5;
        let m = exp.samples as f64;
        for n in [10usize, 50, 100, 400, 800] {
            let est = estimate_lambda_n(&exp, n, eps).unwrap();
            let lambda = est.lambda_plus + est.lambda_minus;
            let phi_pair = 2.0 * gaussian::phi_cdf(-eps * (n as f64).sqrt() / sigma).unwrap();
            let delta = ks_distance(
                &Experiment {
                    source: SampleSource::IidBernoulliBit,
                    ..exp.clone()
                },
                n,
                sigma,
            )
            .unwrap()
            .delta_n;
            let mc_noise = 4.0 * (lambda.max(1e-4) / m).sqrt();
            assert!(
                (lambda - phi_pair).abs() <= 2.0 * delta + mc_noise,
                "n={n}: lambda {lambda:.4} vs 2Phi {phi_pair:.4}, Delta_n {delta:.4}"
            );
        }
    }

    #[test]
    fn gauss_clt_ks_is_small_at_n_1000() {
        let exp = Experiment {
            source: SampleSource::Map {
                map: Arc::new(IntervalMap::gauss()),
                observable: Arc::new(Observable::log_derivative(crate::gauss_lyapunov())),
            },
            eps_grid: vec![0.3],
            n_max: 2000,
            samples: 4000,
            seed: 8,
            ld: LdParams::default(),
            rate: RateHandle::Quadratic { sigma2: 3.45 },
        };
        // σ ≈ √3.45 from the batch-means calibration
        let d = ks_distance(&exp, 1000, 3.45f64.sqrt()).unwrap();
        assert!(d.delta_n < 0.05, "Delta_1000 = {}", d.delta_n);
        assert!((0.0..=1.0).contains(&d.delta_n));
    }

    #[test]
    fn abnormal_termination_rate_is_an_integrity_error() {
        // x ↦ 4x mod 1 is exact in floats (doubling twice), so every
        // 53-bit seed reaches an endpoint within ~27 steps; the sampler
        // must refuse rather than silently return biased counts.
        let mk = |k: u64| crate::maps::Branch {
            lo: k as f64 * 0.25,
            hi: (k + 1) as f64 * 0.25,
            closed_left: true,
            closed_right: false,
            formula: crate::maps::BranchFormula::Affine {
                slope: 4.0,
                intercept: -(k as f64),
            },
        };
        let quadrupling = IntervalMap::from_branches(
            "finite:quadrupling",
            (0..4).map(mk).collect(),
            1,
            4.0,
            0.0,
        )
        .unwrap();
        assert!(!quadrupling.is_doubling());
        let exp = Experiment {
            source: SampleSource::Map {
                map: Arc::new(quadrupling),
                observable: Arc::new(Observable::centered_bit()),
            },
            eps_grid: vec![0.1],
            n_max: 60,
            samples: 2000,
            seed: 13,
            ld: LdParams::default(),
            rate: RateHandle::Quadratic { sigma2: 0.25 },
        };
        assert!(matches!(
            estimate_lambda_n(&exp, 60, 0.1),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn rate_positivity_is_enforced() {
        let exp = Experiment {
            source: SampleSource::Map {
                map: Arc::new(IntervalMap::gauss()),
                observable: Arc::new(Observable::log_derivative(crate::gauss_lyapunov())),
            },
            eps_grid: vec![0.3],
            n_max: 4000,
            samples: 1000,
            seed: 3,
            ld: LdParams::default(),
            rate: RateHandle::Quadratic { sigma2: 0.0 },
        };
        assert!(matches!(
            lambda_series_multi(&exp),
            Err(Error::TailCertification(_))
        ));
    }

    #[test]
    fn gauss_log_deriv_series_certifies() {
        let _ = maps::observable_by_id("log-deriv", &IntervalMap::gauss()).unwrap();
        let exp = Experiment {
            source: SampleSource::Map {
                map: Arc::new(IntervalMap::gauss()),
                observable: Arc::new(Observable::log_derivative(crate::gauss_lyapunov())),
            },
            eps_grid: vec![0.3],
            n_max: 20_000,
            samples: 4000,
            seed: 12,
            // quadratic stand-in near the thermo value 1/σ² ≈ 0.48
            rate: RateHandle::Quadratic { sigma2: 2.1 },
            ld: LdParams::default(),
        };
        let s = lambda_series(&exp, 0.3).unwrap();
        assert!(s.value > 0.0);
        assert!(s.tail_remainder < TAIL_REL_TARGET * s.value);
        assert!(s.truncation_n > (1.0f64 / 0.3).ceil() as usize);
    }
}
