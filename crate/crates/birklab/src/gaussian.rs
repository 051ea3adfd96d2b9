//! Standard-normal analytics and summation machinery: Φ, Mills-ratio tail
//! bounds, first-order Euler–Maclaurin summation, and the Gaussian series
//! whose ρ²-scaled values pin down the deviation-series limits.
//!
//! All operations are pure; infinite sums are truncated only once a
//! Mills-bound integral comparison certifies the discarded remainder.

use crate::error::{Error, Result};

/// 1/√(2π).
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Relative tolerance at which certified series remainders are cut off.
const SERIES_REL_TOL: f64 = 1e-12;

/// Hard cap on summed terms, whatever the certificate says.
const SERIES_TERM_CAP: u64 = 1_000_000_000;

/// Absolute tolerance for the adaptive quadrature backing Euler–Maclaurin.
const QUAD_TOL: f64 = 1e-13;

/// Standard normal density φ(x) = e^{−x²/2}/√(2π).
pub fn phi_density(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

fn phi_unchecked(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal distribution function Φ(x), evaluated through the
/// complementary error function. Absolute error stays below 1e−14.
pub fn phi_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("phi_cdf requires finite x, got {x}")));
    }
    Ok(phi_unchecked(x))
}

/// Two-sided Mills-ratio bounds on the Gaussian tail:
/// x/(x²+1)·φ(x) ≤ Φ(−x) ≤ φ(x)/x for all x > 0.
pub fn mills_bounds(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!(
            "mills_bounds requires x > 0, got {x}"
        )));
    }
    let density = phi_density(x);
    Ok((x / (x * x + 1.0) * density, density / x))
}

/// Sawtooth kernel ψ(x) = x − ⌊x⌋ − 1/2 of the first-order summation formula.
pub fn sawtooth(x: f64) -> f64 {
    x - x.floor() - 0.5
}

/// Upper summation limit: a fixed integer or +∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperLimit {
    Finite(i64),
    Infinite,
}

/// Adaptive Simpson quadrature with a Richardson acceptance test.
/// Depth is capped; below ~2⁻⁵² interval width subdivision is pointless.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 52)
}

/// First-order Euler–Maclaurin summation:
///
/// Σ_{n=a}^{b} f(n) = ∫ f + ∫ f′ψ + (f(a)+f(b))/2,
///
/// with the boundary term f(a)/2 alone when b = ∞ (valid when both
/// improper integrals converge and f vanishes at infinity; a lightweight
/// decay probe guards that caller-asserted precondition).
///
/// Quadrature is subdivided per unit interval so the kink of ψ at the
/// integers never sits inside a panel.
pub fn euler_maclaurin_sum<F, G>(f: F, f_prime: G, a: i64, b: UpperLimit) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let integrate_unit = |k: i64| -> (f64, f64) {
        let lo = k as f64;
        let hi = (k + 1) as f64;
        if k == a {
            // Graded first panel: the substitution x = a + t² absorbs
            // integrable endpoint singularities of f′ (the Φ(−ρ√x) family
            // has an x^{−1/2} one at x = 0).
            let plain = adaptive_simpson(&|t| f(lo + t * t) * 2.0 * t, 0.0, 1.0, QUAD_TOL);
            let corr = adaptive_simpson(
                &|t| f_prime(lo + t * t) * (t * t - 0.5) * 2.0 * t,
                0.0,
                1.0,
                QUAD_TOL,
            );
            return (plain, corr);
        }
        let plain = adaptive_simpson(&|x| f(x), lo, hi, QUAD_TOL);
        // ψ(x) = x − k − 1/2 on [k, k+1); the right endpoint is measure-zero.
        let corr = adaptive_simpson(&|x| f_prime(x) * (x - lo - 0.5), lo, hi, QUAD_TOL);
        (plain, corr)
    };

    match b {
        UpperLimit::Finite(b) => {
            if b < a {
                return Err(Error::domain(format!("empty summation range [{a}, {b}]")));
            }
            if b == a {
                return Ok(f(a as f64));
            }
            let mut total = 0.0;
            for k in a..b {
                let (plain, corr) = integrate_unit(k);
                total += plain + corr;
            }
            Ok(total + 0.5 * (f(a as f64) + f(b as f64)))
        }
        UpperLimit::Infinite => {
            // Decay probe: |f| must come down along a geometric horizon.
            let probes = [16.0, 256.0, 4096.0, 65_536.0];
            let base = f(a as f64).abs().max(1e-300);
            let decaying = probes
                .iter()
                .any(|&dx| f(a as f64 + dx).abs() < base.clamp(1e-13, 1e-10));
            let tail_small = f(a as f64 + 65_536.0).abs() < 1e-10;
            if !decaying && !tail_small {
                return Err(Error::Precondition(
                    "no tail decay detected for infinite Euler-Maclaurin sum".into(),
                ));
            }

            const MAX_INTERVALS: i64 = 2_000_000;
            let mut total = 0.0;
            let mut quiet = 0u32;
            let mut k = a;
            loop {
                let (plain, corr) = integrate_unit(k);
                total += plain + corr;
                let contribution = plain.abs() + corr.abs();
                if contribution < 1e-14 * (1.0 + total.abs()) && f((k + 1) as f64).abs() < 1e-13 {
                    quiet += 1;
                    if quiet >= 3 {
                        break;
                    }
                } else {
                    quiet = 0;
                }
                k += 1;
                if k - a > MAX_INTERVALS {
                    return Err(Error::Precondition(
                        "infinite Euler-Maclaurin sum did not converge within the interval cap"
                            .into(),
                    ));
                }
            }
            Ok(total + 0.5 * f(a as f64))
        }
    }
}

/// Report for a ρ-indexed Gaussian series Σ Φ(−ρ√n).
#[derive(Debug, Clone, serde::Serialize)]
pub struct GaussianSumReport {
    pub rho: f64,
    /// The series value (truncated, remainder certified below `tail_bound`).
    pub value: f64,
    /// ρ² · value.
    pub scaled: f64,
    /// Index of the first omitted term.
    pub truncation_n: u64,
    /// Certified bound on the omitted remainder (unscaled).
    pub tail_bound: f64,
}

/// Certified bound on Σ_{n≥N} Φ(−ρ√n): one term plus the Mills-dominated
/// integral comparison, which telescopes to (1 + 2/ρ²)·Φ(−ρ√N).
fn heyde_tail_bound(rho: f64, n: u64) -> f64 {
    (1.0 + 2.0 / (rho * rho)) * phi_unchecked(-rho * (n as f64).sqrt())
}

/// Σ_{n≥0} Φ(−ρ√n) with certified truncation. The scaled value
/// ρ²·Σ always lies in [1/2, 1/2 + ρ²].
pub fn heyde_gaussian_sum(rho: f64) -> Result<GaussianSumReport> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!(
            "heyde_gaussian_sum requires rho > 0, got {rho}"
        )));
    }
    let mut value = 0.0f64;
    let mut n = 0u64;
    let tail_bound = loop {
        let t = heyde_tail_bound(rho, n);
        if t < SERIES_REL_TOL * value.max(1.0) {
            break t;
        }
        value += phi_unchecked(-rho * (n as f64).sqrt());
        n += 1;
        if n >= SERIES_TERM_CAP {
            break heyde_tail_bound(rho, n);
        }
    };
    Ok(GaussianSumReport {
        rho,
        value,
        scaled: rho * rho * value,
        truncation_n: n,
        tail_bound,
    })
}

/// ρ² · Σ_{n ≥ K/ρ²} Φ(−ρ√n), the scaled far tail of the Heyde series.
/// Decreasing in ρ at fixed K, with limit 2∫_{√K}^∞ tΦ(−t)dt — which is
/// what vanishes as K grows, killing the tail block of the scaled series.
pub fn tail_gaussian_sum(rho: f64, k: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!(
            "tail_gaussian_sum requires rho > 0, got {rho}"
        )));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::domain(format!(
            "tail_gaussian_sum requires K > 0, got {k}"
        )));
    }
    let rho2 = rho * rho;
    let start = (k / rho2).ceil();
    if start >= SERIES_TERM_CAP as f64 {
        // Beyond the truncation horizon the certified bound is already null.
        return Ok(rho2 * heyde_tail_bound(rho, SERIES_TERM_CAP));
    }
    let mut value = 0.0f64;
    let mut n = start as u64;
    loop {
        if rho2 * heyde_tail_bound(rho, n) < (SERIES_REL_TOL * rho2 * value).max(1e-15) {
            break;
        }
        value += phi_unchecked(-rho * (n as f64).sqrt());
        n += 1;
        if n >= SERIES_TERM_CAP {
            break;
        }
    }
    Ok(rho2 * value)
}

/// ∫_a^∞ Φ(−t)/t dt, with the integrand cut once it falls below 1e−18.
fn log_weight_tail_integral(a: f64) -> f64 {
    // Φ(−t)/t < φ(t)/t² < 1e−18 comfortably past t = 9.5.
    let hi = (a + 2.0).max(9.5);
    adaptive_simpson(&|t| phi_unchecked(-t) / t, a, hi, 1e-13)
}

/// IV(ε) = Σ_{n≥1} Φ(−ε√n/σ)/n, the log-weighted Gaussian series.
/// IV(ε)/(−log ε) → 1 as ε → 0. Direct summation hands over to an
/// integral-comparison tail once two million terms are in; the switch
/// error is certified below 1e−7 relative.
pub fn log_weighted_gaussian_sum(eps: f64, sigma: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) || !eps.is_finite() {
        return Err(Error::domain(format!(
            "log_weighted_gaussian_sum requires 0 < eps < 1 (so that -log eps > 0), got {eps}"
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!(
            "log_weighted_gaussian_sum requires sigma > 0, got {sigma}"
        )));
    }
    let rho = eps / sigma;
    const DIRECT_CAP: u64 = 2_000_000;
    let mut value = 0.0f64;
    let mut n = 1u64;
    loop {
        let x = n as f64;
        let a = rho * x.sqrt();
        // Remainder of Σ Φ(−ρ√n)/n from n on: term + ∫ comparison, with
        // ∫_n^∞ Φ(−ρ√x)/x dx = 2∫_a^∞ Φ(−t)/t dt ≤ 2Φ(−a)/a².
        let term_bound = phi_unchecked(-a) / x;
        let tail_cert = term_bound + 2.0 * phi_unchecked(-a) / (a * a);
        if tail_cert < SERIES_REL_TOL * value.max(1.0) {
            return Ok(value);
        }
        if n > DIRECT_CAP {
            // Midpoint integral comparison for the remaining tail; its error
            // is below half of one term, i.e. ≤ term_bound/2.
            let a_mid = rho * (x - 0.5).sqrt();
            return Ok(value + 2.0 * log_weight_tail_integral(a_mid));
        }
        value += phi_unchecked(-a) / x;
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn phi_cdf_symmetry_and_anchors() {
        assert_eq!(phi_cdf(0.0).unwrap(), 0.5);
        assert!(phi_cdf(-8.0).unwrap() < 1e-15);
        assert!(phi_cdf(f64::NAN).is_err());
        assert!(phi_cdf(f64::INFINITY).is_err());
        // Φ(−1), cross-checked against quadrature below.
        assert!((phi_cdf(-1.0).unwrap() - 0.15865525393145705).abs() < 1e-14);
    }

    #[test]
    fn phi_cdf_matches_density_quadrature() {
        // Independent route: Φ(−1) = 1/2 − ∫_{−1}^0 φ.
        let integral = adaptive_simpson(&phi_density, -1.0, 0.0, 1e-13);
        assert!((phi_cdf(-1.0).unwrap() - (0.5 - integral)).abs() < 1e-12);
        let integral3 = adaptive_simpson(&phi_density, -3.0, 0.0, 1e-13);
        assert!((phi_cdf(-3.0).unwrap() - (0.5 - integral3)).abs() < 1e-12);
    }

    #[test]
    fn mills_bounds_anchor_values() {
        let (lo, hi) = mills_bounds(1.0).unwrap();
        assert!((lo - 0.12098536225957168).abs() < 1e-15);
        assert!((hi - 0.24197072451914337).abs() < 1e-15);
        let p = phi_cdf(-1.0).unwrap();
        assert!(lo <= p && p <= hi);

        // At x = 10 the bracket has relative width (x²+1)/x² − 1 = 1%.
        let (lo, hi) = mills_bounds(10.0).unwrap();
        assert!(hi / lo - 1.0 <= 0.0101);
        let p = phi_cdf(-10.0).unwrap();
        assert!(lo <= p && p <= hi);

        assert!(mills_bounds(0.0).is_err());
        assert!(mills_bounds(-2.0).is_err());
    }

    proptest! {
        #[test]
        fn mills_brackets_phi(log_x in -3.0f64..1.4772) {
            // log-spaced x in [1e−3, 30]
            let x = 10f64.powf(log_x);
            let (lo, hi) = mills_bounds(x).unwrap();
            let p = phi_cdf(-x).unwrap();
            prop_assert!(lo < hi);
            prop_assert!(lo <= p && p <= hi);
        }

        #[test]
        fn phi_monotone_and_complementary(x in -37.0f64..37.0, y in -37.0f64..37.0) {
            let (a, b) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(phi_cdf(a).unwrap() <= phi_cdf(b).unwrap());
            prop_assert!((phi_cdf(x).unwrap() + phi_cdf(-x).unwrap() - 1.0).abs() < 1e-14);
        }

        #[test]
        fn euler_maclaurin_matches_direct_cubics(
            c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in -1.0f64..1.0, c3 in -0.05f64..0.05,
        ) {
            let f = move |x: f64| c0 + x * (c1 + x * (c2 + x * c3));
            let fp = move |x: f64| c1 + x * (2.0 * c2 + x * 3.0 * c3);
            let direct: f64 = (0..=100).map(|n| f(n as f64)).sum();
            let em = euler_maclaurin_sum(f, fp, 0, UpperLimit::Finite(100)).unwrap();
            prop_assert!((em - direct).abs() < 1e-9 * (1.0 + direct.abs()));
        }

        #[test]
        fn heyde_scaled_is_bracketed(log_rho in -2.0f64..-0.001) {
            let rho = 10f64.powf(log_rho);
            let scaled = heyde_gaussian_sum(rho).unwrap().scaled;
            prop_assert!(scaled >= 0.5);
            prop_assert!(scaled <= 0.5 + rho * rho);
        }
    }

    #[test]
    fn sawtooth_kernel_shape() {
        // ψ(x) = x − ⌊x⌋ − 1/2: bounded by 1/2, zero mean per unit cell.
        for &x in &[0.0, 0.25, 0.999, 3.5, -1.25, 17.0] {
            assert!(sawtooth(x).abs() <= 0.5);
        }
        assert_eq!(sawtooth(3.5), 0.0);
        assert_eq!(sawtooth(2.0), -0.5);
        let mean = adaptive_simpson(&sawtooth, 5.0, 6.0, 1e-14);
        assert!(mean.abs() < 1e-13);
    }

    #[test]
    fn euler_maclaurin_identity_anchors() {
        // f(x) = x on [0,10]: integral 50, zero-mean sawtooth correction,
        // boundary (0+10)/2.
        let em = euler_maclaurin_sum(|x| x, |_| 1.0, 0, UpperLimit::Finite(10)).unwrap();
        assert!((em - 55.0).abs() < 1e-12);
        // Constant function: f' = 0, sum of n+1 ones.
        let em = euler_maclaurin_sum(|_| 1.0, |_| 0.0, 0, UpperLimit::Finite(17)).unwrap();
        assert!((em - 18.0).abs() < 1e-12);
        // Degenerate range.
        let em = euler_maclaurin_sum(|x| x * x, |x| 2.0 * x, 4, UpperLimit::Finite(4)).unwrap();
        assert!((em - 16.0).abs() < 1e-13);
    }

    #[test]
    fn euler_maclaurin_infinite_heyde_series() {
        let rho = 0.5f64;
        let f = move |x: f64| phi_unchecked(-rho * x.sqrt());
        // d/dx Φ(−ρ√x) = −φ(ρ√x)·ρ/(2√x); integrable singularity at 0.
        let fp = move |x: f64| {
            if x == 0.0 {
                0.0
            } else {
                -phi_density(rho * x.sqrt()) * rho / (2.0 * x.sqrt())
            }
        };
        let em = euler_maclaurin_sum(f, fp, 0, UpperLimit::Infinite).unwrap();

        // Direct-summation oracle with its own Mills-bound cutoff.
        let mut direct = 0.0;
        let mut n = 0u64;
        loop {
            let t = (1.0 + 2.0 / (rho * rho)) * phi_unchecked(-rho * (n as f64).sqrt());
            if t < 1e-14 {
                break;
            }
            direct += phi_unchecked(-rho * (n as f64).sqrt());
            n += 1;
        }
        assert!(
            (em - direct).abs() < 1e-10,
            "Euler-Maclaurin {em} vs direct {direct}"
        );
    }

    #[test]
    fn euler_maclaurin_rejects_nondecaying_tail() {
        let err = euler_maclaurin_sum(|x| x, |_| 1.0, 0, UpperLimit::Infinite);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn heyde_sum_bracket_anchors() {
        let r = heyde_gaussian_sum(0.1).unwrap();
        assert!(r.scaled >= 0.5 && r.scaled <= 0.51, "scaled = {}", r.scaled);
        let r = heyde_gaussian_sum(0.05).unwrap();
        assert!(
            r.scaled >= 0.5 && r.scaled <= 0.5025,
            "scaled = {}",
            r.scaled
        );
        // Large ρ: the n = 0 term Φ(0) = 1/2 alone keeps value ≥ 1/2.
        let r = heyde_gaussian_sum(3.0).unwrap();
        assert!(r.value >= 0.5 && r.value.is_finite());
        assert!(r.scaled >= 0.5);
        assert!(heyde_gaussian_sum(0.0).is_err());
    }

    #[test]
    fn heyde_tail_bound_is_certified() {
        // The recorded bound really dominates the discarded remainder.
        let r = heyde_gaussian_sum(0.3).unwrap();
        let mut rest = 0.0;
        for n in r.truncation_n..(r.truncation_n + 200_000) {
            rest += phi_unchecked(-r.rho * (n as f64).sqrt());
        }
        assert!(rest <= r.tail_bound);
    }

    #[test]
    fn tail_sum_vanishes_with_rho() {
        let v02 = tail_gaussian_sum(0.2, 8.0).unwrap();
        let v01 = tail_gaussian_sum(0.1, 8.0).unwrap();
        let v005 = tail_gaussian_sum(0.05, 8.0).unwrap();
        assert!(v02 > v01 && v01 > v005, "{v02} {v01} {v005}");
        assert!(v005 > 0.0);
        // Strictly below the full scaled series at the same ρ.
        assert!(v01 < heyde_gaussian_sum(0.1).unwrap().scaled);
        // K beyond the truncation horizon: nothing left.
        assert!(tail_gaussian_sum(0.1, 1e18).unwrap() < 1e-12);
    }

    #[test]
    fn log_weighted_sum_tracks_neg_log_eps() {
        let iv3 = log_weighted_gaussian_sum(1e-3, 1.0).unwrap();
        let r3 = iv3 / (-(1e-3f64).ln());
        assert!((0.8..=1.2).contains(&r3), "ratio {r3}");
        let iv4 = log_weighted_gaussian_sum(1e-4, 1.0).unwrap();
        let r4 = iv4 / (-(1e-4f64).ln());
        assert!(
            (r4 - 1.0).abs() < (r3 - 1.0).abs(),
            "{r4} not closer than {r3}"
        );
        assert!(log_weighted_gaussian_sum(1.0, 1.0).is_err());
        assert!(log_weighted_gaussian_sum(0.5, 0.0).is_err());
    }

    #[test]
    fn log_weighted_sum_matches_direct_oracle() {
        // Direct truncated summation with a Mills tail certificate.
        let rho = 1e-2f64;
        let mut direct = 0.0f64;
        let mut n = 1u64;
        loop {
            let a = rho * (n as f64).sqrt();
            let cert = phi_unchecked(-a) / n as f64 + 2.0 * phi_unchecked(-a) / (a * a);
            if cert < 1e-13 * direct.max(1.0) {
                break;
            }
            direct += phi_unchecked(-a) / n as f64;
            n += 1;
        }
        let v = log_weighted_gaussian_sum(1e-2, 1.0).unwrap();
        assert!((v - direct).abs() < 1e-6 * direct, "{v} vs {direct}");
    }

    #[test]
    fn log_weighted_sum_scale_invariance() {
        // IV depends on ε/σ only; a power-of-two rescaling is bit-exact.
        let a = log_weighted_gaussian_sum(1e-3, 1.0).unwrap();
        let b = log_weighted_gaussian_sum(2e-3, 2.0).unwrap();
        assert_eq!(a, b);
        let c = log_weighted_gaussian_sum(3e-3, 3.0).unwrap();
        assert!((a - c).abs() < 1e-9 * a);
    }
}
