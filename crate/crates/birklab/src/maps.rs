//! Expanding Markov interval maps: countable families of monotone C²
//! branches on the unit interval, concrete instances (Gauss, binary, user-defined
//! finite maps), observables, orbits, and Birkhoff sums.
//!
//! Branches carry closed-form formulas (affine or Möbius), so derivatives
//! and inverses are exact expressions rather than numerical ones. The
//! Gauss map's countable branch family is represented by its indexing
//! rule; enumeration-style checks truncate it explicitly.
//!
//! Points that land exactly on a branch endpoint terminate the orbit —
//! that set has measure zero, and under the Gauss map it is where the
//! rationals finish.
//!
//! Orbit precision: plain doubles up to [`DD_SWITCH`] steps, double-double
//! beyond. The doubling map is special: its arithmetic is exact, so a
//! 53-bit seed hits 0 after 53 shifts. Its Monte Carlo orbits therefore
//! run on a lazily revealed bit tape — an unlimited-precision uniform
//! seed — instead of a fixed-width float.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Orbit precision switches from f64 to double-double beyond this length;
/// expansion ~e^{2γn} eats a 53-bit significand near n ≈ 45 on the Gauss map.
pub const DD_SWITCH: usize = 40;

/// Enumerated prefix of an infinite branch family used by condition checks.
const INFINITE_FAMILY_TRUNCATION: usize = 400;

/// Closed-form monotone branch formula.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BranchFormula {
    Affine {
        slope: f64,
        intercept: f64,
    },
    /// (a·x + b)/(c·x + d)
    Moebius {
        a: f64,
        b: f64,
        c: f64,
        d: f64,
    },
}

impl BranchFormula {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            BranchFormula::Affine { slope, intercept } => slope * x + intercept,
            BranchFormula::Moebius { a, b, c, d } => (a * x + b) / (c * x + d),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            BranchFormula::Affine { slope, .. } => slope,
            BranchFormula::Moebius { a, b, c, d } => {
                let den = c * x + d;
                (a * d - b * c) / (den * den)
            }
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            BranchFormula::Affine { .. } => 0.0,
            BranchFormula::Moebius { a, b, c, d } => {
                let den = c * x + d;
                -2.0 * c * (a * d - b * c) / (den * den * den)
            }
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            BranchFormula::Affine { slope, intercept } => (y - intercept) / slope,
            BranchFormula::Moebius { a, b, c, d } => (d * y - b) / (a - c * y),
        }
    }

    pub fn eval_dd(&self, x: Dd) -> Dd {
        match *self {
            BranchFormula::Affine { slope, intercept } => x.mul_f64(slope).add_f64(intercept),
            BranchFormula::Moebius { a, b, c, d } => {
                let num = x.mul_f64(a).add_f64(b);
                let den = x.mul_f64(c).add_f64(d);
                num.div(den)
            }
        }
    }
}

/// One monotone branch on a subinterval of the unit interval.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub closed_left: bool,
    pub closed_right: bool,
    pub formula: BranchFormula,
}

impl Branch {
    pub fn interior_contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    /// Image interval (lo, hi) of the branch under its formula.
    pub fn image(&self) -> (f64, f64) {
        let a = self.formula.eval(self.lo);
        let b = self.formula.eval(self.hi);
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone)]
enum BranchFamily {
    /// The Gauss rule x ↦ 1/x − k on (1/(k+1), 1/k], k = 1, 2, …
    Gauss,
    Finite(Vec<Branch>),
}

/// An expanding Markov interval map with its verification constants:
/// `expansion_power` p and `expansion_constant` λ such that
/// |(T^p)′| ≥ λ > 1, and `renyi_bound` dominating |T″|/|T′|².
#[derive(Debug, Clone)]
pub struct IntervalMap {
    pub id: String,
    family: BranchFamily,
    pub expansion_power: u32,
    pub expansion_constant: f64,
    pub renyi_bound: f64,
}

fn gauss_branch(k: u64) -> Branch {
    Branch {
        lo: 1.0 / (k as f64 + 1.0),
        hi: 1.0 / k as f64,
        closed_left: false,
        closed_right: true,
        formula: BranchFormula::Moebius {
            a: -(k as f64),
            b: 1.0,
            c: 1.0,
            d: 0.0,
        },
    }
}

impl IntervalMap {
    /// The Gauss map G(x) = 1/x − ⌊1/x⌋. |(G²)′| ≥ 4 on branch
    /// interiors and |G″|/|G′|² = 2x ≤ 2.
    pub fn gauss() -> Self {
        IntervalMap {
            id: "gauss".into(),
            family: BranchFamily::Gauss,
            expansion_power: 2,
            expansion_constant: 4.0,
            renyi_bound: 2.0,
        }
    }

    /// The doubling map x ↦ 2x mod 1.
    pub fn binary() -> Self {
        let branches = vec![
            Branch {
                lo: 0.0,
                hi: 0.5,
                closed_left: true,
                closed_right: false,
                formula: BranchFormula::Affine {
                    slope: 2.0,
                    intercept: 0.0,
                },
            },
            Branch {
                lo: 0.5,
                hi: 1.0,
                closed_left: true,
                closed_right: false,
                formula: BranchFormula::Affine {
                    slope: 2.0,
                    intercept: -1.0,
                },
            },
        ];
        IntervalMap {
            id: "binary".into(),
            family: BranchFamily::Finite(branches),
            expansion_power: 1,
            expansion_constant: 2.0,
            renyi_bound: 0.0,
        }
    }

    /// A user-defined finite-branch map. Branch domains must have pairwise
    /// disjoint interiors and tile the unit interval up to measure zero.
    pub fn from_branches(
        id: impl Into<String>,
        mut branches: Vec<Branch>,
        expansion_power: u32,
        expansion_constant: f64,
        renyi_bound: f64,
    ) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Config("finite map needs at least one branch".into()));
        }
        branches.sort_by(|p, q| p.lo.total_cmp(&q.lo));
        let mut covered = 0.0;
        let mut cursor = 0.0f64;
        for b in &branches {
            if b.is_empty() {
                return Err(Error::Config(format!(
                    "degenerate branch [{}, {}]",
                    b.lo, b.hi
                )));
            }
            if b.lo < cursor - 1e-12 {
                return Err(Error::Config(format!(
                    "branch domains overlap near x = {}",
                    b.lo
                )));
            }
            if (b.lo - cursor).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "branch domains leave a gap between {} and {}",
                    cursor, b.lo
                )));
            }
            let d0 = b.formula.derivative(b.lo + 0.25 * b.len());
            let d1 = b.formula.derivative(b.hi - 0.25 * b.len());
            if d0.abs() < 1e-9 || d1.abs() < 1e-9 || d0.signum() != d1.signum() {
                return Err(Error::Config(format!(
                    "branch on [{}, {}] is not strictly monotone",
                    b.lo, b.hi
                )));
            }
            covered += b.len();
            cursor = b.hi;
        }
        if (covered - 1.0).abs() > 1e-12 || (cursor - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "branch domains cover total length {covered}, expected 1"
            )));
        }
        if !(expansion_constant > 1.0) {
            return Err(Error::Config("expansion constant must exceed 1".into()));
        }
        Ok(IntervalMap {
            id: id.into(),
            family: BranchFamily::Finite(branches),
            expansion_power,
            expansion_constant,
            renyi_bound,
        })
    }

    pub fn is_infinite_family(&self) -> bool {
        matches!(self.family, BranchFamily::Gauss)
    }

    /// The doubling map gets exact bit-tape orbits in the Monte Carlo
    /// estimators; float arithmetic is exact for it and would park every
    /// 53-bit seed on 0 after 53 shifts.
    pub fn is_doubling(&self) -> bool {
        match &self.family {
            BranchFamily::Finite(bs) => {
                bs.len() == 2
                    && matches!(bs[0].formula, BranchFormula::Affine { slope, intercept }
                        if slope == 2.0 && intercept == 0.0)
                    && matches!(bs[1].formula, BranchFormula::Affine { slope, intercept }
                        if slope == 2.0 && intercept == -1.0)
            }
            BranchFamily::Gauss => false,
        }
    }

    /// Enumerated branch list; infinite families are cut at `truncation`.
    pub fn branches_truncated(&self, truncation: usize) -> Vec<Branch> {
        match &self.family {
            BranchFamily::Gauss => (1..=truncation as u64).map(gauss_branch).collect(),
            BranchFamily::Finite(bs) => bs.clone(),
        }
    }

    /// Branch whose interior holds x, if any.
    pub fn branch_at(&self, x: f64) -> Option<Branch> {
        if !(0.0 < x && x < 1.0) || !x.is_finite() {
            return None;
        }
        match &self.family {
            BranchFamily::Gauss => {
                let k = (1.0 / x).floor();
                // x == 1/k exactly is a branch endpoint.
                if k < 1.0 || x * k == 1.0 {
                    return None;
                }
                Some(gauss_branch(k as u64))
            }
            BranchFamily::Finite(bs) => bs.iter().find(|b| b.interior_contains(x)).copied(),
        }
    }

    /// T(x). Branch endpoints and points outside every branch interior
    /// signal orbit termination.
    pub fn apply(&self, x: f64) -> Result<f64> {
        match self.branch_at(x) {
            Some(b) => Ok(b.formula.eval(x)),
            None => Err(Error::OrbitTerminated {
                survived: 0,
                requested: 1,
            }),
        }
    }

    /// log |T′(x)|.
    pub fn log_derivative(&self, x: f64) -> Result<f64> {
        match self.branch_at(x) {
            Some(b) => Ok(b.formula.derivative(x).abs().ln()),
            None => Err(Error::OrbitTerminated {
                survived: 0,
                requested: 1,
            }),
        }
    }

    /// Walk the orbit of `x0`, accumulating the Birkhoff sum of `obs`.
    pub fn orbit_accumulator<'m>(
        &'m self,
        obs: &'m Observable,
        x0: f64,
        use_dd: bool,
    ) -> OrbitAccumulator<'m> {
        OrbitAccumulator {
            map: self,
            obs,
            point: if use_dd {
                OrbitPoint::Extended(Dd::from_f64(x0))
            } else {
                OrbitPoint::Plain(x0)
            },
            sum: 0.0,
            steps: 0,
            dead: false,
        }
    }

    /// Exact doubling-map orbit over a lazily revealed uniform seed:
    /// sample `index` of the (seed, stream)-keyed generator.
    pub fn orbit_accumulator_bit_tape<'m>(
        &'m self,
        obs: &'m Observable,
        rng: CounterRng,
        index: u64,
    ) -> Result<OrbitAccumulator<'m>> {
        if !self.is_doubling() {
            return Err(Error::Precondition(
                "bit-tape orbits are only exact for the doubling map".into(),
            ));
        }
        Ok(OrbitAccumulator {
            map: self,
            obs,
            point: OrbitPoint::Tape(BitTape {
                rng,
                index,
                words: Vec::new(),
                pos: 0,
            }),
            sum: 0.0,
            steps: 0,
            dead: false,
        })
    }

    /// Sₙf(x) = Σ_{k<n} f(T^k x). Orbits longer than [`DD_SWITCH`] are
    /// carried in double-double precision.
    pub fn birkhoff_sum(&self, obs: &Observable, x0: f64, n: usize) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let mut acc = self.orbit_accumulator(obs, x0, n > DD_SWITCH);
        let mut value = 0.0;
        for _ in 0..n {
            value = acc.step().map_err(|e| match e {
                Error::OrbitTerminated { survived, .. } => Error::OrbitTerminated {
                    survived,
                    requested: n,
                },
                other => other,
            })?;
        }
        Ok(value)
    }

    /// Sample every branch (truncated list for infinite families) and
    /// report the constants behind the expansion, distortion, Markov and
    /// partition conditions.
    pub fn verify_conditions(&self, probe_count: usize) -> Result<ConditionReport> {
        if probe_count == 0 {
            return Err(Error::domain("probe_count must be at least 1"));
        }
        let mut branches = self.branches_truncated(INFINITE_FAMILY_TRUNCATION);
        branches.sort_by(|p, q| p.lo.total_cmp(&q.lo));
        let p = self.expansion_power.max(1);

        let mut min_iter_deriv = f64::INFINITY;
        let mut max_distortion = 0.0f64;
        let mut markov = true;

        let domain_lo = branches.first().map(|b| b.lo).unwrap_or(0.0);
        let domain_hi = branches.last().map(|b| b.hi).unwrap_or(1.0);

        for b in &branches {
            let (img_lo, img_hi) = b.image();
            if img_lo > domain_lo + 1e-9 || img_hi < domain_hi - 1e-9 {
                markov = false;
            }
            for i in 0..probe_count {
                let x = b.lo + (i as f64 + 0.5) / probe_count as f64 * b.len();
                // |(T^p)'(x)| accumulated along p orbit steps.
                let mut deriv = 1.0f64;
                let mut y = x;
                let mut alive = true;
                for _ in 0..p {
                    match self.branch_at(y) {
                        Some(br) => {
                            deriv *= br.formula.derivative(y).abs();
                            y = br.formula.eval(y);
                        }
                        None => {
                            alive = false;
                            break;
                        }
                    }
                }
                if alive {
                    min_iter_deriv = min_iter_deriv.min(deriv);
                }
                let d = b.formula.derivative(x);
                let d2 = b.formula.second_derivative(x);
                max_distortion = max_distortion.max(d2.abs() / (d * d));
            }
        }

        // Enumerated branches must tile an interval ending at 1; infinite
        // families are allowed the truncation gap at 0.
        let mut tiled = (domain_hi - 1.0).abs() <= 1e-12;
        let mut covered = 0.0;
        let mut cursor = domain_lo;
        for b in &branches {
            if (b.lo - cursor).abs() > 1e-12 {
                tiled = false;
            }
            covered += b.len();
            cursor = b.hi;
        }
        let uncovered = 1.0 - covered;
        let partition_ok = tiled
            && if self.is_infinite_family() {
                (uncovered - domain_lo).abs() <= 1e-12
            } else {
                uncovered.abs() <= 1e-12
            };

        let expansion_ok = min_iter_deriv >= self.expansion_constant;
        let distortion_ok = max_distortion <= self.renyi_bound + 1e-12;
        Ok(ConditionReport {
            probes_per_branch: probe_count,
            branches_checked: branches.len(),
            uncovered_length: uncovered,
            min_iterate_derivative: min_iter_deriv,
            max_distortion,
            markov_covering: markov,
            partition_ok,
            expansion_ok,
            distortion_ok,
            passed: partition_ok && markov && expansion_ok && distortion_ok,
        })
    }
}

/// Sampled verification of the expansion, distortion, Markov covering and
/// partition conditions.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionReport {
    pub probes_per_branch: usize,
    pub branches_checked: usize,
    pub uncovered_length: f64,
    pub min_iterate_derivative: f64,
    pub max_distortion: f64,
    pub markov_covering: bool,
    pub partition_ok: bool,
    pub expansion_ok: bool,
    pub distortion_ok: bool,
    pub passed: bool,
}

/// Lazily revealed uniform seed for exact doubling-map orbits: bit i of
/// the seed is bit (63 − i mod 64) of word ⌊i/64⌋ of the keyed stream.
#[derive(Debug, Clone)]
struct BitTape {
    rng: CounterRng,
    index: u64,
    words: Vec<u64>,
    pos: usize,
}

impl BitTape {
    fn word(&mut self, w: usize) -> u64 {
        while self.words.len() <= w {
            let counter = self.words.len() as u64;
            self.words.push(self.rng.draw_at(self.index, counter));
        }
        self.words[w]
    }

    /// The current point's leading 53 bits as a double in [0,1).
    fn point_f64(&mut self) -> f64 {
        let w = self.pos / 64;
        let off = (self.pos % 64) as u32;
        let hi = self.word(w) << off;
        let m = if off == 0 {
            hi
        } else {
            hi | (self.word(w + 1) >> (64 - off))
        };
        (m >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    fn advance(&mut self) {
        self.pos += 1;
    }
}

#[derive(Debug, Clone)]
enum OrbitPoint {
    Plain(f64),
    Extended(Dd),
    Tape(BitTape),
}

/// Incremental Birkhoff-sum walker: each `step` evaluates the observable
/// at the current point and advances the orbit, returning S_{k+1}f.
pub struct OrbitAccumulator<'m> {
    map: &'m IntervalMap,
    obs: &'m Observable,
    point: OrbitPoint,
    sum: f64,
    steps: usize,
    dead: bool,
}

impl OrbitAccumulator<'_> {
    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn current_sum(&self) -> f64 {
        self.sum
    }

    /// One step: f at the current point, then advance. Returns S_{k+1}f.
    pub fn step(&mut self) -> Result<f64> {
        if self.dead {
            return Err(Error::OrbitTerminated {
                survived: self.steps,
                requested: self.steps + 1,
            });
        }
        let survived = self.steps;
        let die = || Error::OrbitTerminated {
            survived,
            requested: survived + 1,
        };
        let value = match &mut self.point {
            OrbitPoint::Plain(x) => {
                let xf = *x;
                let Some(branch) = self.map.branch_at(xf) else {
                    self.dead = true;
                    return Err(die());
                };
                let v = self.obs.eval_on_branch(&branch, xf);
                *x = branch.formula.eval(xf);
                v
            }
            OrbitPoint::Extended(x) => {
                let xf = x.to_f64();
                let Some(branch) = self.map.branch_at(xf) else {
                    self.dead = true;
                    return Err(die());
                };
                let v = self.obs.eval_on_branch(&branch, xf);
                let next = match branch.formula {
                    // Gauss branches: take the digit from the extended
                    // reciprocal; the f64 branch index can be off by one
                    // right at a digit boundary.
                    BranchFormula::Moebius { a: _, b, c, d }
                        if b == 1.0 && c == 1.0 && d == 0.0 =>
                    {
                        let r = x.recip();
                        let k = r.floor();
                        if k < 1.0 {
                            self.dead = true;
                            return Err(die());
                        }
                        r.sub_f64(k)
                    }
                    f => f.eval_dd(*x),
                };
                let nf = next.to_f64();
                if !(0.0 < nf && nf < 1.0) {
                    self.dead = true;
                    return Err(die());
                }
                *x = next;
                v
            }
            OrbitPoint::Tape(tape) => {
                let xf = tape.point_f64();
                let Some(branch) = self.map.branch_at(xf) else {
                    self.dead = true;
                    return Err(die());
                };
                let v = self.obs.eval_on_branch(&branch, xf);
                tape.advance();
                v
            }
        };
        self.sum += value;
        self.steps += 1;
        Ok(self.sum)
    }
}

/// A real observable on (0,1) together with its reference mean ∫f dν,
/// the centering constant used by the deviation statistics.
#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub mean: f64,
    kind: ObservableKind,
}

#[derive(Debug, Clone, Copy)]
enum ObservableKind {
    LogDerivative,
    CenteredBit,
    Zero,
    Constant(f64),
}

impl Observable {
    /// f = log|T′| with the supplied invariant-measure mean.
    pub fn log_derivative(mean: f64) -> Self {
        Observable {
            name: "log-deriv".into(),
            mean,
            kind: ObservableKind::LogDerivative,
        }
    }

    /// f = 1_{[0,1/2)} − 1/2; i.i.d. fair bits under the binary map.
    pub fn centered_bit() -> Self {
        Observable {
            name: "bit".into(),
            mean: 0.0,
            kind: ObservableKind::CenteredBit,
        }
    }

    pub fn zero() -> Self {
        Observable {
            name: "zero".into(),
            mean: 0.0,
            kind: ObservableKind::Zero,
        }
    }

    pub fn constant(c: f64) -> Self {
        Observable {
            name: format!("constant:{c}"),
            mean: c,
            kind: ObservableKind::Constant(c),
        }
    }

    pub fn eval(&self, map: &IntervalMap, x: f64) -> Result<f64> {
        match self.kind {
            ObservableKind::LogDerivative => map.log_derivative(x),
            ObservableKind::CenteredBit => Ok(if x < 0.5 { 0.5 } else { -0.5 }),
            ObservableKind::Zero => Ok(0.0),
            ObservableKind::Constant(c) => Ok(c),
        }
    }

    fn eval_on_branch(&self, branch: &Branch, x: f64) -> f64 {
        match self.kind {
            ObservableKind::LogDerivative => branch.formula.derivative(x).abs().ln(),
            ObservableKind::CenteredBit => {
                if x < 0.5 {
                    0.5
                } else {
                    -0.5
                }
            }
            ObservableKind::Zero => 0.0,
            ObservableKind::Constant(c) => c,
        }
    }

    /// A bound on sup|f − mean| when one is available in closed form.
    pub fn centered_sup_bound(&self) -> Option<f64> {
        match self.kind {
            ObservableKind::CenteredBit => Some(0.5),
            ObservableKind::Zero => Some(0.0),
            ObservableKind::Constant(_) => Some(0.0),
            ObservableKind::LogDerivative => None,
        }
    }
}

/// Registry lookup for the built-in maps.
pub fn map_by_id(id: &str) -> Result<IntervalMap> {
    match id {
        "gauss" => Ok(IntervalMap::gauss()),
        "binary" => Ok(IntervalMap::binary()),
        other => Err(Error::Config(format!(
            "unknown map id {other:?}; built-ins are \"gauss\" and \"binary\" \
             (finite maps are defined in the config file)"
        ))),
    }
}

/// Registry lookup for the built-in observables, given the host map.
pub fn observable_by_id(id: &str, map: &IntervalMap) -> Result<Observable> {
    match id {
        "log-deriv" => {
            let mean = match map.id.as_str() {
                "gauss" => crate::gauss_lyapunov(),
                "binary" => std::f64::consts::LN_2,
                _ => {
                    return Err(Error::Config(format!(
                        "no reference mean for log-deriv on map {:?}; set `mean` explicitly",
                        map.id
                    )))
                }
            };
            Ok(Observable::log_derivative(mean))
        }
        "bit" => Ok(Observable::centered_bit()),
        "zero" => Ok(Observable::zero()),
        other => match other.strip_prefix("constant:") {
            Some(v) => {
                let c: f64 = v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad constant observable {other:?}")))?;
                Ok(Observable::constant(c))
            }
            None => Err(Error::Config(format!("unknown observable id {other:?}"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> f64 {
        (5.0f64.sqrt() - 1.0) / 2.0
    }

    #[test]
    fn gauss_apply_anchors() {
        let g = IntervalMap::gauss();
        assert!((g.apply(0.4).unwrap() - 0.5).abs() < 1e-14);
        let x = golden();
        assert!((g.apply(x).unwrap() - x).abs() < 1e-14);
        // representable endpoints terminate
        assert!(g.apply(0.5).is_err());
        assert!(g.apply(0.25).is_err());
        assert!(g.apply(0.0).is_err());
        assert!(g.apply(1.0).is_err());
    }

    #[test]
    fn binary_apply_anchor() {
        let b = IntervalMap::binary();
        assert!((b.apply(0.3).unwrap() - 0.6).abs() < 1e-15);
        assert!((b.apply(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert!(b.is_doubling());
        assert!(!IntervalMap::gauss().is_doubling());
    }

    #[test]
    fn log_derivative_anchors() {
        let g = IntervalMap::gauss();
        // x in the interior of branch 2, |G'(x)| = 1/x².
        assert!((g.log_derivative(0.4).unwrap() + 2.0 * 0.4f64.ln()).abs() < 1e-13);
        let b = IntervalMap::binary();
        assert!((b.log_derivative(0.3).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        // From inside branch k the value tends to 2 log k.
        for k in [2u64, 5, 17] {
            let x = 1.0 / k as f64 - 1e-12;
            let expect = -2.0 * x.ln();
            assert!((g.log_derivative(x).unwrap() - expect).abs() < 1e-9);
            assert!((expect - 2.0 * (k as f64).ln()).abs() < 1e-8);
        }
    }

    #[test]
    fn birkhoff_sum_anchors() {
        let g = IntervalMap::gauss();
        assert_eq!(g.birkhoff_sum(&Observable::zero(), 0.37, 0).unwrap(), 0.0);
        let c = Observable::constant(1.75);
        assert!((g.birkhoff_sum(&c, 0.37, 13).unwrap() - 13.0 * 1.75).abs() < 1e-12);
        // Golden fixed point: Sₙ log|G'| = 2n log((√5+1)/2). The fixed
        // point is only 1-ulp exact, so keep n moderate.
        let obs = Observable::log_derivative(crate::gauss_lyapunov());
        let n = 12;
        let expect = 2.0 * n as f64 * ((5.0f64.sqrt() + 1.0) / 2.0).ln();
        assert!((g.birkhoff_sum(&obs, golden(), n).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn birkhoff_additivity() {
        // S_{n+m}f(x) = Sₙf(x) + S_mf(Tⁿx) on random triples.
        let g = IntervalMap::gauss();
        let obs = Observable::log_derivative(crate::gauss_lyapunov());
        let rng = crate::rng::CounterRng::new(7, 0);
        for trial in 0..1000u64 {
            let x = rng.uniform_open01(trial);
            let n = (rng.draw_at(trial, 1) % 20) as usize;
            let m = (rng.draw_at(trial, 2) % 20) as usize;
            let whole = g.birkhoff_sum(&obs, x, n + m).unwrap();
            let first = g.birkhoff_sum(&obs, x, n).unwrap();
            // advance to Tⁿx exactly as birkhoff_sum does
            let mut y = x;
            for _ in 0..n {
                y = g.apply(y).unwrap();
            }
            let second = g.birkhoff_sum(&obs, y, m).unwrap();
            assert!(
                (whole - (first + second)).abs() < 1e-9,
                "additivity violated at x={x}, n={n}, m={m}"
            );
        }
    }

    #[test]
    fn derivative_chain_consistency() {
        // log|(Gⁿ)'(x)| accumulated multiplicatively matches the Birkhoff
        // sum of log|G'|.
        let g = IntervalMap::gauss();
        let obs = Observable::log_derivative(crate::gauss_lyapunov());
        let rng = crate::rng::CounterRng::new(11, 0);
        for trial in 0..200u64 {
            let x = rng.uniform_open01(trial);
            let n = 1 + (rng.draw_at(trial, 1) % 30) as usize;
            let sum = g.birkhoff_sum(&obs, x, n).unwrap();
            let mut prod_log = 0.0;
            let mut y = x;
            for _ in 0..n {
                prod_log += g.log_derivative(y).unwrap();
                y = g.apply(y).unwrap();
            }
            assert!((sum - prod_log).abs() < 1e-9);
        }
    }

    #[test]
    fn dd_orbit_tracks_f64_before_divergence() {
        // Typical per-step amplification is e^{2γ} ≈ 10.7, so over 5 steps
        // a 1-ulp seed perturbation stays around 1e-10; occasional deep
        // branches inflate it, hence the slack.
        let g = IntervalMap::gauss();
        let obs = Observable::log_derivative(crate::gauss_lyapunov());
        let rng = crate::rng::CounterRng::new(3, 1);
        for trial in 0..100u64 {
            let x = rng.uniform_open01(trial);
            let mut a = g.orbit_accumulator(&obs, x, false);
            let mut b = g.orbit_accumulator(&obs, x, true);
            for _ in 0..5 {
                let sa = a.step().unwrap();
                let sb = b.step().unwrap();
                assert!((sa - sb).abs() < 1e-6, "x={x}: {sa} vs {sb}");
            }
        }
    }

    #[test]
    fn orbit_termination_reports_survived_length() {
        // Exact dyadic under the doubling map: 0.375 → 0.75 → 0.5 (endpoint).
        let b = IntervalMap::binary();
        let obs = Observable::zero();
        match b.birkhoff_sum(&obs, 0.375, 10) {
            Err(Error::OrbitTerminated {
                survived,
                requested,
            }) => {
                assert_eq!(requested, 10);
                assert_eq!(survived, 2);
            }
            other => panic!("expected termination, got {other:?}"),
        }
        // Immediate endpoint.
        match b.birkhoff_sum(&obs, 0.5, 3) {
            Err(Error::OrbitTerminated { survived, .. }) => assert_eq!(survived, 0),
            other => panic!("expected termination, got {other:?}"),
        }
    }

    #[test]
    fn bit_tape_orbit_is_exact_and_unbounded() {
        let b = IntervalMap::binary();
        let obs = Observable::centered_bit();
        let rng = crate::rng::CounterRng::new(5, 2);
        let mut acc = b.orbit_accumulator_bit_tape(&obs, rng, 17).unwrap();
        // Far beyond the 53-step float horizon.
        let mut last = 0.0;
        for _ in 0..1000 {
            last = acc.step().unwrap();
        }
        // Against direct bit counting from the same words.
        let mut ones = 0u32;
        for w in 0..16u64 {
            let word = rng.draw_at(17, w);
            let take: u32 = if w == 15 { 1000 - 15 * 64 } else { 64 };
            let kept = if take == 64 {
                word
            } else {
                word >> (64 - take)
            };
            ones += kept.count_ones();
        }
        let expect = 1000.0 * 0.5 - ones as f64;
        assert_eq!(last, expect);
        // Bit tapes are refused off the doubling map.
        assert!(IntervalMap::gauss()
            .orbit_accumulator_bit_tape(&obs, rng, 0)
            .is_err());
    }

    #[test]
    fn verify_conditions_gauss() {
        let g = IntervalMap::gauss();
        let report = g.verify_conditions(64).unwrap();
        assert!(report.passed, "{report:?}");
        // p = 2 works: |(G²)'| ≥ (k+1)² ≥ 4 on branch k.
        assert!(report.min_iterate_derivative >= 4.0);
        // Rényi ratio 2x stays below 2.
        assert!(report.max_distortion <= 2.0);
        // p = 1 genuinely fails: inf |G'| = 1 near x = 1.
        let mut weak = IntervalMap::gauss();
        weak.expansion_power = 1;
        weak.expansion_constant = 1.5;
        let report = weak.verify_conditions(512).unwrap();
        assert!(!report.expansion_ok);
    }

    #[test]
    fn verify_conditions_binary() {
        let report = IntervalMap::binary().verify_conditions(16).unwrap();
        assert!(report.passed);
        assert_eq!(report.min_iterate_derivative, 2.0);
        assert_eq!(report.max_distortion, 0.0);
    }

    #[test]
    fn branch_inverse_roundtrip() {
        let g = IntervalMap::gauss();
        for &x in &[0.09, 0.21, 0.37, 0.61, 0.93] {
            let b = g.branch_at(x).unwrap();
            let y = b.formula.eval(x);
            assert!((b.formula.inverse(y) - x).abs() < 1e-12);
        }
        let b = IntervalMap::binary();
        for &x in &[0.1, 0.45, 0.55, 0.99] {
            let br = b.branch_at(x).unwrap();
            assert!((br.formula.inverse(br.formula.eval(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn custom_finite_map_validation() {
        // A 3-branch affine full map.
        let mk = |lo: f64, hi: f64| Branch {
            lo,
            hi,
            closed_left: true,
            closed_right: false,
            formula: BranchFormula::Affine {
                slope: 1.0 / (hi - lo),
                intercept: -lo / (hi - lo),
            },
        };
        let m = IntervalMap::from_branches(
            "finite:test",
            vec![mk(0.0, 0.25), mk(0.25, 0.6), mk(0.6, 1.0)],
            1,
            2.5,
            0.0,
        )
        .unwrap();
        assert!(m.verify_conditions(32).unwrap().passed);
        assert!((m.apply(0.5).unwrap() - (0.5 - 0.25) / 0.35).abs() < 1e-12);

        // Gap in the partition is rejected.
        let bad = IntervalMap::from_branches(
            "finite:gap",
            vec![mk(0.0, 0.25), mk(0.3, 1.0)],
            1,
            2.0,
            0.0,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn registry_ids() {
        assert!(map_by_id("gauss").is_ok());
        assert!(map_by_id("binary").is_ok());
        assert!(map_by_id("lozi").is_err());
        let g = map_by_id("gauss").unwrap();
        let obs = observable_by_id("log-deriv", &g).unwrap();
        assert!((obs.mean - crate::gauss_lyapunov()).abs() < 1e-12);
        assert!(observable_by_id("constant:2.5", &g).is_ok());
        assert!(observable_by_id("wat", &g).is_err());
    }
}
