//! Numerical laboratory for deviation-series limit laws of Birkhoff sums.
//!
//! The crate is organized around five pillars:
//!
//! * [`gaussian`] — standard-normal analytics: Φ, Mills-ratio tail bounds,
//!   first-order Euler–Maclaurin summation, and the Gaussian series whose
//!   scaled limits anchor the deviation-series estimates.
//! * [`maps`] — expanding Markov interval maps (Gauss, binary, user-defined
//!   finite-branch maps), observables, orbits, and Birkhoff sums.
//! * [`cf`] — exact continued-fraction arithmetic: digits, big-integer
//!   convergents, the Diophantine inequality, and Lévy statistics.
//! * [`deviation`] — Monte Carlo and exact-oracle estimation of deviation
//!   measures Λₙ±(ε), their weighted series, variance estimation, and
//!   Kolmogorov–Smirnov diagnostics.
//! * [`pressure`] — transfer-operator thermodynamics for the Gauss map:
//!   pressure P(β), the Lyapunov spectrum b(α), and the large-deviation
//!   rate function I(ε).
//!
//! The `birklab` binary exposes all of it behind the `gaussian`, `cf`,
//! `iid-baseline`, `asymptotics`, and `pressure` subcommands.

// `!(x > 0.0)`-style guards throughout are deliberate: they reject NaN,
// which the algebraically flipped comparison would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod cf;
pub mod cli;
pub mod config;
pub mod dd;
pub mod deviation;
pub mod error;
pub mod gaussian;
pub mod maps;
pub mod pressure;
pub mod report;
pub mod rng;

pub use error::{Error, Result};

/// Lévy's constant γ = π²/(12 log 2) ≈ 1.18656911…, the almost-sure limit
/// of log qₙ/n for continued-fraction denominators.
pub fn levy_gamma() -> f64 {
    std::f64::consts::PI * std::f64::consts::PI / (12.0 * std::f64::consts::LN_2)
}

/// The generic Lyapunov exponent of the Gauss map, 2γ = π²/(6 log 2).
pub fn gauss_lyapunov() -> f64 {
    2.0 * levy_gamma()
}

/// Left endpoint of the Gauss-map Lyapunov spectrum, 2 log((√5+1)/2),
/// attained on the orbit of the golden section.
pub fn spectrum_left_endpoint() -> f64 {
    2.0 * ((5.0f64.sqrt() + 1.0) / 2.0).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levy_constant_value() {
        // π²/(12 log 2) = 1.18656911…
        assert!((levy_gamma() - 1.18656911).abs() < 1e-8);
        assert!((gauss_lyapunov() - 2.37313822).abs() < 1e-7);
    }

    #[test]
    fn spectrum_endpoint_below_mean() {
        assert!(spectrum_left_endpoint() < gauss_lyapunov());
        assert!((spectrum_left_endpoint() - 0.9624236501192069).abs() < 1e-12);
    }
}
