//! Numerical thermodynamic formalism for the Gauss map: the pressure
//! P(β) as the log of the leading eigenvalue of the β-weighted transfer
//! operator
//!
//! (L_β g)(x) = Σ_{k≥1} (k+x)^{−2β} g(1/(k+x)),
//!
//! its derivatives, the Legendre data β(α) and b(α), and the
//! large-deviation rate function I(ε) = (ε+2γ)(1 − b(ε+2γ)).
//!
//! Discretization: polynomial collocation at Chebyshev–Lobatto nodes on
//! the unit interval (barycentric interpolation), the branch sum taken directly up to
//! `branch_direct` and closed with a second-order Taylor tail whose
//! coefficient sums Σ_{k>K}(k+x)^{−s} are evaluated by Euler–Maclaurin.
//! Derivatives of P are Richardson-extrapolated central differences;
//! β(α) is a bracketed root of P′(β) + α = 0.
//!
//! Pressure evaluations at distinct β are independent; results are
//! memoized behind a mutex so derivative stencils and root finds reuse
//! eigensolves.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

/// Collocation and domain parameters for the pressure solver.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Chebyshev collocation degree (number of nodes minus one).
    pub degree: usize,
    /// Branches summed directly; the rest go through the analytic tail.
    pub branch_direct: usize,
    /// Lower edge of the computable β window (operator norm diverges at 1/2).
    pub beta_min: f64,
    /// Upper edge of the β window.
    pub beta_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            degree: 40,
            branch_direct: 4_000,
            beta_min: 0.6,
            beta_max: 4.0,
        }
    }
}

/// Convergence metadata attached to a pressure value.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PressureDiagnostics {
    pub degree: usize,
    pub branch_direct: usize,
    pub eigen_iterations: usize,
    pub eigen_residual: f64,
    /// |P at degree d − P at degree d+2|.
    pub refinement_delta: f64,
}

/// One point of the Lyapunov spectrum b(α) = (P(β(α)) + αβ(α))/α.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SpectrumPoint {
    pub alpha: f64,
    pub beta_of_alpha: f64,
    pub b: f64,
}

/// Both routes to I″(0) and their relative gap.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RateCurvatureReport {
    /// Second difference of I at 0.
    pub direct: f64,
    /// −2b″(2γ)γ with b″(2γ) = β′(2γ)/(2γ), β′ = −1/P″(β(2γ)).
    pub via_spectrum: f64,
    pub rel_gap: f64,
}

/// Node/derivative data shared by every β at a fixed degree.
struct DegreeGrid {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    /// First- and second-derivative rows at the x = 0 node.
    d1_at0: Vec<f64>,
    d2_at0: Vec<f64>,
    /// ln(k + x_j) for k = 1..=branch_direct, flattened per node.
    log_kx: Vec<f64>,
    /// 1/(k + x_j), same layout.
    inv_kx: Vec<f64>,
}

impl DegreeGrid {
    fn build(degree: usize, branch_direct: usize) -> DegreeGrid {
        let n = degree + 1;
        // Chebyshev–Lobatto on [0,1], descending: x_0 = 1, x_degree = 0.
        let nodes: Vec<f64> = (0..n)
            .map(|j| 0.5 * (1.0 + (std::f64::consts::PI * j as f64 / degree as f64).cos()))
            .collect();
        let bary: Vec<f64> = (0..n)
            .map(|j| {
                let w = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == degree {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect();

        // Chebyshev differentiation matrix on [0,1] (standard [-1,1] form
        // scaled by 2), diagonal by negative row sums.
        let t: Vec<f64> = (0..n)
            .map(|j| (std::f64::consts::PI * j as f64 / degree as f64).cos())
            .collect();
        let c = |j: usize| if j == 0 || j == degree { 2.0 } else { 1.0 };
        let mut d = vec![vec![0.0f64; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            let mut diag = 0.0;
            for (j, entry) in row.iter_mut().enumerate() {
                if i != j {
                    let v =
                        (c(i) / c(j)) * (if (i + j) % 2 == 0 { 1.0 } else { -1.0 }) / (t[i] - t[j]);
                    *entry = 2.0 * v;
                    diag -= v;
                }
            }
            row[i] = 2.0 * diag;
        }
        let zero_row = degree; // x = 0 is the last node
        let d1_at0 = d[zero_row].clone();
        let mut d2_at0 = vec![0.0f64; n];
        for (m, row) in d.iter().enumerate() {
            let w = d1_at0[m];
            if w != 0.0 {
                for (j, v) in row.iter().enumerate() {
                    d2_at0[j] += w * v;
                }
            }
        }

        let mut log_kx = Vec::with_capacity(n * branch_direct);
        let mut inv_kx = Vec::with_capacity(n * branch_direct);
        for &x in &nodes {
            for k in 1..=branch_direct {
                let kx = k as f64 + x;
                log_kx.push(kx.ln());
                inv_kx.push(1.0 / kx);
            }
        }
        DegreeGrid {
            nodes,
            bary,
            d1_at0,
            d2_at0,
            log_kx,
            inv_kx,
        }
    }

    /// Barycentric Lagrange row ℓ_i(y) appended into `row` with weight w.
    fn accumulate_lagrange_row(&self, y: f64, w: f64, row: &mut [f64]) {
        // exact node hit
        for (i, &x) in self.nodes.iter().enumerate() {
            if y == x {
                row[i] += w;
                return;
            }
        }
        let mut denom = 0.0;
        for (i, &x) in self.nodes.iter().enumerate() {
            denom += self.bary[i] / (y - x);
        }
        let scale = w / denom;
        for (i, &x) in self.nodes.iter().enumerate() {
            row[i] += scale * self.bary[i] / (y - x);
        }
    }
}

/// Σ_{k > K} (k+x)^{−s} by Euler–Maclaurin on the Hurwitz tail at
/// a = K+1+x, with B₂ and B₄ corrections (error ≪ 1e−16 for a ≥ 100).
fn hurwitz_tail(s: f64, a: f64) -> f64 {
    let am = a.powf(-s);
    let leading = a * am / (s - 1.0); // a^{1-s}/(s-1)
    let b2 = s * am / a / 12.0;
    let b4 = -s * (s + 1.0) * (s + 2.0) * am / (a * a * a) / 720.0;
    leading + 0.5 * am + b2 + b4
}

/// Cached result of one eigensolve.
#[derive(Debug, Clone, Copy)]
struct EigenValueEntry {
    log_eig: f64,
    iterations: usize,
    residual: f64,
}

/// Memoizing pressure solver for the Gauss transfer operator.
pub struct PressureSolver {
    pub cfg: SolverConfig,
    grids: Mutex<HashMap<usize, Arc<DegreeGrid>>>,
    cache: Mutex<HashMap<(u64, usize), EigenValueEntry>>,
}

impl PressureSolver {
    pub fn new(cfg: SolverConfig) -> Result<PressureSolver> {
        if cfg.beta_min <= 0.5 {
            return Err(Error::Config(format!(
                "beta_min must exceed 1/2 (operator diverges there), got {}",
                cfg.beta_min
            )));
        }
        if cfg.beta_max <= cfg.beta_min {
            return Err(Error::Config("empty beta window".into()));
        }
        if cfg.degree < 8 || cfg.degree > 200 {
            return Err(Error::Config(format!(
                "degree {} out of [8, 200]",
                cfg.degree
            )));
        }
        if cfg.branch_direct < 100 {
            return Err(Error::Config("branch_direct must be at least 100".into()));
        }
        Ok(PressureSolver {
            cfg,
            grids: Mutex::new(HashMap::new()),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn with_defaults() -> PressureSolver {
        PressureSolver::new(SolverConfig::default()).expect("default config is valid")
    }

    fn grid(&self, degree: usize) -> Arc<DegreeGrid> {
        let mut grids = self.grids.lock().expect("grid lock");
        grids
            .entry(degree)
            .or_insert_with(|| Arc::new(DegreeGrid::build(degree, self.cfg.branch_direct)))
            .clone()
    }

    fn check_beta(&self, beta: f64) -> Result<()> {
        if !beta.is_finite() || beta < self.cfg.beta_min || beta > self.cfg.beta_max {
            return Err(Error::Range(format!(
                "beta {beta} outside the computable window [{}, {}]",
                self.cfg.beta_min, self.cfg.beta_max
            )));
        }
        Ok(())
    }

    /// Collocation matrix of L_β at the given degree.
    fn build_matrix(&self, beta: f64, grid: &DegreeGrid) -> Vec<Vec<f64>> {
        let n = grid.nodes.len();
        let kmax = self.cfg.branch_direct;
        let s = 2.0 * beta;
        let mut m = vec![vec![0.0f64; n]; n];
        for (j, row) in m.iter_mut().enumerate() {
            let base = j * kmax;
            for k in 0..kmax {
                let w = (-s * grid.log_kx[base + k]).exp();
                let y = grid.inv_kx[base + k];
                grid.accumulate_lagrange_row(y, w, row);
            }
            // Second-order Taylor tail at y = 0 (node index n−1):
            // Σ_{k>K} w·g(y) ≈ T₀·g(0) + T₁·g′(0) + T₂·g″(0)/2.
            let a = kmax as f64 + 1.0 + grid.nodes[j];
            let t0 = hurwitz_tail(s, a);
            let t1 = hurwitz_tail(s + 1.0, a);
            let t2 = hurwitz_tail(s + 2.0, a);
            row[n - 1] += t0;
            for ((entry, d1), d2) in row.iter_mut().zip(&grid.d1_at0).zip(&grid.d2_at0) {
                *entry += t1 * d1 + 0.5 * t2 * d2;
            }
        }
        m
    }

    /// Leading eigenvalue by power iteration started from the Gauss
    /// density profile; residual-certified.
    fn eigensolve(&self, beta: f64, degree: usize) -> Result<EigenValueEntry> {
        let key = (beta.to_bits(), degree);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*hit);
        }
        let grid = self.grid(degree);
        let m = self.build_matrix(beta, &grid);
        let mut v: Vec<f64> = grid.nodes.iter().map(|&x| 1.0 / (1.0 + x)).collect();
        let matvec = |v: &[f64]| -> Vec<f64> {
            m.iter()
                .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        };
        let mut lambda = 0.0f64;
        let mut iterations = 0usize;
        let mut quiet = 0u32;
        const MAX_ITER: usize = 50_000;
        loop {
            let w = matvec(&v);
            let num: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            let den: f64 = v.iter().map(|a| a * a).sum();
            let next = num / den;
            let scale = w.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
            if !(scale > 0.0) || !next.is_finite() {
                return Err(Error::Solver(format!(
                    "power iteration degenerated at beta = {beta} (degree {degree})"
                )));
            }
            v = w.iter().map(|x| x / scale).collect();
            iterations += 1;
            if (next - lambda).abs() <= 1e-15 * next.abs().max(1e-300) {
                quiet += 1;
                if quiet >= 3 {
                    lambda = next;
                    break;
                }
            } else {
                quiet = 0;
            }
            lambda = next;
            if iterations >= MAX_ITER {
                return Err(Error::Solver(format!(
                    "power iteration stagnated at beta = {beta} after {MAX_ITER} rounds \
                     (last eigenvalue {lambda})"
                )));
            }
        }
        // certify: ‖Mv − λv‖∞ relative to ‖v‖∞ = 1
        let w = matvec(&v);
        let residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0f64, f64::max);
        if residual > 1e-9 {
            return Err(Error::Solver(format!(
                "eigenvalue residual {residual:.3e} too large at beta = {beta}"
            )));
        }
        if lambda <= 0.0 {
            return Err(Error::Solver(format!(
                "non-positive leading eigenvalue at beta = {beta}"
            )));
        }
        let entry = EigenValueEntry {
            log_eig: lambda.ln(),
            iterations,
            residual,
        };
        self.cache.lock().expect("cache lock").insert(key, entry);
        Ok(entry)
    }

    /// P(β) at the configured degree (the canonical value used by the
    /// derivative stencils).
    pub fn pressure_value(&self, beta: f64) -> Result<f64> {
        self.check_beta(beta)?;
        Ok(self.eigensolve(beta, self.cfg.degree)?.log_eig)
    }

    /// P(β) plus refinement diagnostics (degree d vs d+2).
    pub fn pressure(&self, beta: f64) -> Result<(f64, PressureDiagnostics)> {
        self.check_beta(beta)?;
        let coarse = self.eigensolve(beta, self.cfg.degree)?;
        let fine = self.eigensolve(beta, self.cfg.degree + 2)?;
        let delta = (coarse.log_eig - fine.log_eig).abs();
        if delta > 1e-6 {
            return Err(Error::Solver(format!(
                "degree refinement moved P({beta}) by {delta:.3e}; discretization not converged"
            )));
        }
        Ok((
            coarse.log_eig,
            PressureDiagnostics {
                degree: self.cfg.degree,
                branch_direct: self.cfg.branch_direct,
                eigen_iterations: coarse.iterations,
                eigen_residual: coarse.residual,
                refinement_delta: delta,
            },
        ))
    }

    /// Apply the discretized operator to node values (for fixed-point
    /// residual witnesses).
    pub fn apply_operator(&self, beta: f64, values_at_nodes: &[f64]) -> Result<Vec<f64>> {
        self.check_beta(beta)?;
        let grid = self.grid(self.cfg.degree);
        if values_at_nodes.len() != grid.nodes.len() {
            return Err(Error::domain(format!(
                "expected {} node values, got {}",
                grid.nodes.len(),
                values_at_nodes.len()
            )));
        }
        let m = self.build_matrix(beta, &grid);
        Ok(m.iter()
            .map(|row| row.iter().zip(values_at_nodes).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Collocation nodes at the configured degree (descending from 1 to 0).
    pub fn nodes(&self) -> Vec<f64> {
        self.grid(self.cfg.degree).nodes.clone()
    }

    /// Step sizes for the Richardson stencils, shrunk near the β window
    /// edges so every evaluation stays inside.
    fn stencil_step(&self, beta: f64) -> f64 {
        let room = (beta - self.cfg.beta_min).min(self.cfg.beta_max - beta);
        (0.02f64).min(0.45 * room).max(1e-4)
    }

    /// (P′, P″) by Richardson-extrapolated central differences.
    /// Errors with a convexity violation if P″ ≤ 0.
    pub fn pressure_derivatives(&self, beta: f64) -> Result<(f64, f64)> {
        self.check_beta(beta)?;
        let h = self.stencil_step(beta);
        let p = self.pressure_value(beta)?;
        let pp1 = self.pressure_value(beta + h)?;
        let pm1 = self.pressure_value(beta - h)?;
        let pp2 = self.pressure_value(beta + 0.5 * h)?;
        let pm2 = self.pressure_value(beta - 0.5 * h)?;

        let d_h = (pp1 - pm1) / (2.0 * h);
        let d_h2 = (pp2 - pm2) / h;
        let p1 = (4.0 * d_h2 - d_h) / 3.0;

        let s_h = (pp1 - 2.0 * p + pm1) / (h * h);
        let s_h2 = (pp2 - 2.0 * p + pm2) / (0.25 * h * h);
        let p2 = (4.0 * s_h2 - s_h) / 3.0;
        if p2 <= 0.0 {
            return Err(Error::Solver(format!(
                "convexity violation: P''({beta}) = {p2:.3e} <= 0 signals discretization failure"
            )));
        }
        Ok((p1, p2))
    }

    /// The achievable α window (−P′ over the usable β range, edges pulled
    /// in so derivative stencils fit).
    pub fn alpha_window(&self) -> Result<(f64, f64)> {
        let lo_beta = self.cfg.beta_min + 0.05;
        let hi_beta = self.cfg.beta_max - 0.05;
        let (p1_hi, _) = self.pressure_derivatives(hi_beta)?;
        let (p1_lo, _) = self.pressure_derivatives(lo_beta)?;
        Ok((-p1_hi, -p1_lo))
    }

    /// β(α): the root of P′(β) + α = 0, found by bracketed bisection with
    /// Illinois acceleration to |P′(β) + α| < 1e−10.
    pub fn beta_of_alpha(&self, alpha: f64) -> Result<f64> {
        let lo_beta = self.cfg.beta_min + 0.05;
        let hi_beta = self.cfg.beta_max - 0.05;
        let g = |beta: f64| -> Result<f64> { Ok(self.pressure_derivatives(beta)?.0 + alpha) };
        let mut a = lo_beta;
        let mut b = hi_beta;
        let mut ga = g(a)?;
        let gb = g(b)?;
        if ga >= 0.0 || gb <= 0.0 {
            let (alo, ahi) = (
                -self.pressure_derivatives(hi_beta)?.0,
                -self.pressure_derivatives(lo_beta)?.0,
            );
            return Err(Error::Range(format!(
                "alpha {alpha} outside the computable window ({alo:.6}, {ahi:.6})"
            )));
        }
        // g is strictly increasing (P is convex): Illinois false position.
        let mut gb = gb;
        let mut side = 0i8;
        for _ in 0..200 {
            let mid = (a * gb - b * ga) / (gb - ga);
            let mid = if mid.is_finite() && mid > a && mid < b {
                mid
            } else {
                0.5 * (a + b)
            };
            let gm = g(mid)?;
            if gm.abs() < 1e-10 {
                return Ok(mid);
            }
            if gm > 0.0 {
                b = mid;
                gb = gm;
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            } else {
                a = mid;
                ga = gm;
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            }
            if b - a < 1e-14 {
                return Ok(0.5 * (a + b));
            }
        }
        Err(Error::Solver(format!(
            "beta_of_alpha failed to converge for alpha = {alpha}"
        )))
    }

    /// Spectrum point b(α) = (P(β(α)) + αβ(α))/α, clamped checks included.
    pub fn spectrum_b(&self, alpha: f64) -> Result<SpectrumPoint> {
        if !(alpha > 0.0) {
            return Err(Error::Range(format!("alpha must be positive, got {alpha}")));
        }
        let beta = self.beta_of_alpha(alpha)?;
        let p = self.pressure_value(beta)?;
        let b = (p + alpha * beta) / alpha;
        if !(-0.05..=1.05).contains(&b) {
            return Err(Error::Solver(format!(
                "spectrum value b({alpha}) = {b} escapes [0,1] beyond tolerance"
            )));
        }
        Ok(SpectrumPoint {
            alpha,
            beta_of_alpha: beta,
            b,
        })
    }

    /// I(ε) = (ε + 2γ)(1 − b(ε + 2γ)).
    pub fn rate_function(&self, eps: f64) -> Result<f64> {
        let alpha = eps + crate::gauss_lyapunov();
        let point = self.spectrum_b(alpha)?;
        Ok(alpha * (1.0 - point.b))
    }

    /// I′(0) by a Richardson central difference (the plain stencil would
    /// carry an O(h²·I‴) term; I is not even in ε).
    pub fn rate_first_derivative_at_0(&self) -> Result<f64> {
        let h = 0.04;
        let d_h = (self.rate_function(h)? - self.rate_function(-h)?) / (2.0 * h);
        let d_h2 = (self.rate_function(0.5 * h)? - self.rate_function(-0.5 * h)?) / h;
        Ok((4.0 * d_h2 - d_h) / 3.0)
    }

    /// I″(0) two ways: a Richardson second difference of I at 0, and the
    /// closed chain −2b″(2γ)γ with b″(2γ) = β′(2γ)/(2γ), β′ = −1/P″.
    /// Errors if the routes disagree by more than 5%.
    pub fn rate_second_derivative_at_0(&self) -> Result<RateCurvatureReport> {
        let h = 0.08;
        let i0 = self.rate_function(0.0)?;
        let ip1 = self.rate_function(h)?;
        let im1 = self.rate_function(-h)?;
        let ip2 = self.rate_function(0.5 * h)?;
        let im2 = self.rate_function(-0.5 * h)?;
        let s_h = (ip1 - 2.0 * i0 + im1) / (h * h);
        let s_h2 = (ip2 - 2.0 * i0 + im2) / (0.25 * h * h);
        let direct = (4.0 * s_h2 - s_h) / 3.0;

        let two_gamma = crate::gauss_lyapunov();
        let beta_star = self.beta_of_alpha(two_gamma)?;
        let (_, p2) = self.pressure_derivatives(beta_star)?;
        let beta_prime = -1.0 / p2;
        let b_second = beta_prime / two_gamma;
        let via_spectrum = -2.0 * b_second * (0.5 * two_gamma);

        let rel_gap = (direct - via_spectrum).abs() / via_spectrum.abs().max(1e-300);
        if !(direct > 0.0) || !(via_spectrum > 0.0) {
            return Err(Error::Solver(format!(
                "I''(0) must be positive: direct {direct}, spectrum {via_spectrum}"
            )));
        }
        if rel_gap > 0.05 {
            return Err(Error::Consistency(format!(
                "I''(0) routes disagree by {:.2}%: direct {direct} vs spectrum {via_spectrum}",
                rel_gap * 100.0
            )));
        }
        Ok(RateCurvatureReport {
            direct,
            via_spectrum,
            rel_gap,
        })
    }
}

/// The rate function as a reusable handle: domain, evaluator, curvature.
pub struct RateFunction {
    solver: Arc<PressureSolver>,
    pub eps_min: f64,
    pub eps_max: f64,
    pub second_deriv_at_0: f64,
}

impl RateFunction {
    pub fn build(solver: Arc<PressureSolver>) -> Result<RateFunction> {
        let (alpha_lo, alpha_hi) = solver.alpha_window()?;
        let two_gamma = crate::gauss_lyapunov();
        let curvature = solver.rate_second_derivative_at_0()?;
        Ok(RateFunction {
            solver,
            eps_min: alpha_lo - two_gamma,
            eps_max: alpha_hi - two_gamma,
            second_deriv_at_0: curvature.via_spectrum,
        })
    }

    pub fn eval(&self, eps: f64) -> Result<f64> {
        if eps <= self.eps_min || eps >= self.eps_max {
            return Err(Error::Range(format!(
                "eps {eps} outside the rate function domain ({:.4}, {:.4})",
                self.eps_min, self.eps_max
            )));
        }
        self.solver.rate_function(eps)
    }
}

/// Row of the (β, P, P′, P″) table emitted by the CLI.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PressureRow {
    pub beta: f64,
    pub p: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Sampled pressure table; construction enforces P″ > 0 and strictly
/// increasing P′ across the grid.
pub fn pressure_table(solver: &PressureSolver, beta_grid: &[f64]) -> Result<Vec<PressureRow>> {
    let mut rows = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        let p = solver.pressure_value(beta)?;
        let (p1, p2) = solver.pressure_derivatives(beta)?;
        rows.push(PressureRow { beta, p, p1, p2 });
    }
    for w in rows.windows(2) {
        if w[1].p1 <= w[0].p1 {
            return Err(Error::Solver(format!(
                "P' fails to increase between beta {} and {}",
                w[0].beta, w[1].beta
            )));
        }
    }
    Ok(rows)
}

/// Row of the (α, β, b, I) spectrum table.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SpectrumRow {
    pub alpha: f64,
    pub beta: f64,
    pub b: f64,
    pub rate: f64,
}

pub fn spectrum_table(solver: &PressureSolver, alpha_grid: &[f64]) -> Result<Vec<SpectrumRow>> {
    let mut rows = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let pt = solver.spectrum_b(alpha)?;
        rows.push(SpectrumRow {
            alpha,
            beta: pt.beta_of_alpha,
            b: pt.b,
            rate: alpha * (1.0 - pt.b),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    use std::sync::OnceLock;

    // one shared solver so eigensolves memoize across the whole suite
    fn solver() -> &'static PressureSolver {
        static SOLVER: OnceLock<PressureSolver> = OnceLock::new();
        SOLVER.get_or_init(PressureSolver::with_defaults)
    }

    #[test]
    fn gauss_density_is_fixed_point_at_beta_one() {
        // (L₁ h)(x) = h(x) for h(x) = 1/(1+x): pointwise residual at the
        // collocation nodes certifies the discretization directly.
        let s = solver();
        let nodes = s.nodes();
        let h: Vec<f64> = nodes.iter().map(|&x| 1.0 / (1.0 + x)).collect();
        let out = s.apply_operator(1.0, &h).unwrap();
        let residual = out
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(residual < 1e-10, "fixed-point residual {residual:.3e}");
    }

    #[test]
    fn pressure_anchors() {
        let s = solver();
        let (p1v, diag) = s.pressure(1.0).unwrap();
        assert!(p1v.abs() < 1e-8, "P(1) = {p1v:.3e}");
        assert!(
            diag.refinement_delta < 1e-9,
            "delta {:.3e}",
            diag.refinement_delta
        );

        let (p2v, diag2) = s.pressure(2.0).unwrap();
        assert!(p2v < 0.0, "P(2) = {p2v}");
        assert!(diag2.refinement_delta < 1e-9);

        // convexity probe
        let a = s.pressure_value(0.9).unwrap();
        let b = s.pressure_value(1.1).unwrap();
        assert!(a + b > 2.0 * s.pressure_value(1.0).unwrap());

        // domain guard
        assert!(s.pressure_value(0.55).is_err());
        assert!(s.pressure_value(4.5).is_err());
    }

    #[test]
    fn pressure_derivative_anchors() {
        let s = solver();
        let (p1, p2) = s.pressure_derivatives(1.0).unwrap();
        // −P′(1) = ∫ log|G′| dμ_G = 2γ = π²/(6 log 2)
        assert!(
            (-p1 - crate::gauss_lyapunov()).abs() < 1e-5,
            "-P'(1) = {} vs {}",
            -p1,
            crate::gauss_lyapunov()
        );
        assert!(p2 > 0.0);
    }

    #[test]
    fn derivative_step_consistency() {
        // Halving the Richardson base step moves P′ by < 1e−7.
        let s = solver();
        let h = s.stencil_step(1.3);
        let d = |hh: f64| {
            let dp = (s.pressure_value(1.3 + hh).unwrap() - s.pressure_value(1.3 - hh).unwrap())
                / (2.0 * hh);
            let dp2 = (s.pressure_value(1.3 + 0.5 * hh).unwrap()
                - s.pressure_value(1.3 - 0.5 * hh).unwrap())
                / hh;
            (4.0 * dp2 - dp) / 3.0
        };
        assert!((d(h) - d(0.5 * h)).abs() < 1e-7);
    }

    #[test]
    fn beta_of_alpha_anchors() {
        let s = solver();
        let two_gamma = crate::gauss_lyapunov();
        let beta = s.beta_of_alpha(two_gamma).unwrap();
        assert!((beta - 1.0).abs() < 1e-6, "beta(2γ) = {beta}");
        // β decreasing through 1 around 2γ
        assert!(s.beta_of_alpha(two_gamma + 0.1).unwrap() < 1.0);
        assert!(s.beta_of_alpha(two_gamma - 0.1).unwrap() > 1.0);
        // far outside the window
        assert!(matches!(s.beta_of_alpha(1e6), Err(Error::Range(_))));
    }

    #[test]
    fn beta_of_alpha_monotone() {
        let s = solver();
        let two_gamma = crate::gauss_lyapunov();
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let alpha = two_gamma - 0.38 + i as f64 * 0.04;
            let beta = s.beta_of_alpha(alpha).unwrap();
            assert!(beta < last, "beta not decreasing at alpha = {alpha}");
            // Legendre closure: −P′(β(α)) returns α.
            let (p1, _) = s.pressure_derivatives(beta).unwrap();
            assert!((-p1 - alpha).abs() < 1e-8);
            last = beta;
        }
    }

    #[test]
    fn spectrum_maximum_at_generic_exponent() {
        let s = solver();
        let two_gamma = crate::gauss_lyapunov();
        let b0 = s.spectrum_b(two_gamma).unwrap();
        assert!((b0.b - 1.0).abs() < 1e-6, "b(2γ) = {}", b0.b);
        let bp = s.spectrum_b(two_gamma + 0.2).unwrap();
        let bm = s.spectrum_b(two_gamma - 0.2).unwrap();
        assert!(bp.b < 1.0 && bm.b < 1.0);
        // concavity across a small scan
        let alphas: Vec<f64> = (0..7).map(|i| two_gamma - 0.3 + 0.1 * i as f64).collect();
        let bs: Vec<f64> = alphas.iter().map(|&a| s.spectrum_b(a).unwrap().b).collect();
        for w in bs.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-6, "b not concave: {w:?}");
        }
        let max = bs.iter().cloned().fold(f64::MIN, f64::max);
        assert!(b0.b >= max - 1e-9);
    }

    #[test]
    fn rate_function_anchors() {
        let s = solver();
        assert!(s.rate_function(0.0).unwrap().abs() < 1e-6);
        assert!(s.rate_function(0.3).unwrap() > 0.0);
        assert!(s.rate_function(-0.3).unwrap() > 0.0);
        let d = s.rate_first_derivative_at_0().unwrap();
        assert!(d.abs() < 1e-6, "I'(0) = {d:.3e}");
    }

    #[test]
    fn rate_curvature_routes_agree() {
        let s = solver();
        let report = s.rate_second_derivative_at_0().unwrap();
        assert!(report.direct > 0.0 && report.via_spectrum > 0.0);
        assert!(
            report.rel_gap < 0.01,
            "routes differ by {:.3}%",
            report.rel_gap * 100.0
        );
    }

    #[test]
    fn rate_function_handle_domain() {
        let rate = RateFunction::build(Arc::new(PressureSolver::with_defaults())).unwrap();
        assert!(rate.eps_min < 0.0 && rate.eps_max > 0.5);
        assert!(rate.second_deriv_at_0 > 0.0);
        assert!(rate.eval(0.25).unwrap() > 0.0);
        assert!(rate.eval(rate.eps_max + 1.0).is_err());
    }

    #[test]
    fn tables_are_consistent() {
        let s = solver();
        let rows = pressure_table(s, &[0.8, 1.0, 1.2, 1.5]).unwrap();
        assert!(rows.iter().all(|r| r.p2 > 0.0));
        assert!(rows.windows(2).all(|w| w[1].p1 > w[0].p1));
        let two_gamma = crate::gauss_lyapunov();
        let srows = spectrum_table(s, &[two_gamma - 0.2, two_gamma, two_gamma + 0.2]).unwrap();
        assert!(srows[1].b > srows[0].b && srows[1].b > srows[2].b);
        assert!(srows.iter().all(|r| r.rate >= -1e-9));
    }

    #[test]
    fn branch_tail_correction_is_refinement_stable() {
        // Quadrupling the directly summed branches must not move P:
        // the analytic tail is doing its job at both cutoffs.
        let coarse = PressureSolver::new(SolverConfig {
            branch_direct: 2_000,
            ..SolverConfig::default()
        })
        .unwrap();
        let fine = PressureSolver::new(SolverConfig {
            branch_direct: 16_000,
            ..SolverConfig::default()
        })
        .unwrap();
        for beta in [0.62, 1.0, 2.5] {
            let a = coarse.pressure_value(beta).unwrap();
            let b = fine.pressure_value(beta).unwrap();
            assert!((a - b).abs() < 1e-11, "beta {beta}: {a} vs {b}");
        }
    }

    #[test]
    fn hurwitz_tail_matches_direct_sum() {
        for &(s, k) in &[(1.2f64, 500usize), (2.0, 300), (3.7, 200)] {
            let a = k as f64 + 1.0 + 0.37;
            let em = hurwitz_tail(s, a);
            // compensated summation: 2e6 bare adds would cost ~1e-10
            // relative all by themselves
            let mut direct = 0.0f64;
            let mut carry = 0.0f64;
            for m in 0..2_000_000u64 {
                let term = (m as f64 + a).powf(-s) - carry;
                let t = direct + term;
                carry = (t - direct) - term;
                direct = t;
            }
            // compare on the truncated range: add the analytic remainder of
            // the direct sum itself
            let rest = hurwitz_tail(s, 2_000_000.0 + a);
            assert!(
                (em - direct - rest).abs() < 1e-12 * em,
                "s={s}, k={k}: {em} vs {}",
                direct + rest
            );
        }
    }
}
