#ifndef BIRKLAB_H
#define BIRKLAB_H

/* Generated by cbindgen from birklab-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes for every fallible call.
typedef enum BlStatus {
  BL_STATUS_OK = 0,
  BL_STATUS_DOMAIN = 1,
  BL_STATUS_PRECONDITION = 2,
  BL_STATUS_ORBIT_TERMINATED = 3,
  BL_STATUS_PRECISION_EXHAUSTED = 4,
  BL_STATUS_INSUFFICIENT_DIGITS = 5,
  BL_STATUS_RANGE = 6,
  BL_STATUS_SOLVER = 7,
  BL_STATUS_CONSISTENCY = 8,
  BL_STATUS_TAIL_CERTIFICATION = 9,
  BL_STATUS_INTEGRITY = 10,
  BL_STATUS_CONFIG = 11,
  BL_STATUS_CACHE = 12,
  BL_STATUS_IO = 13,
  BL_STATUS_NULL_POINTER = 14,
  BL_STATUS_INVALID_UTF8 = 15,
  BL_STATUS_OVERFLOW = 16,
} BlStatus;

// Opaque interval-map handle.
typedef struct BlMap BlMap;

// Opaque pressure-solver handle.
typedef struct BlPressureSolver BlPressureSolver;

// Report of the Heyde series Σ Φ(−ρ√n).
typedef struct BlGaussianSumReport {
  double rho;
  double value;
  double scaled;
  uint64_t truncation_n;
  double tail_bound;
} BlGaussianSumReport;

// Sampled verification report of the map conditions.
typedef struct BlConditionReport {
  double min_iterate_derivative;
  double max_distortion;
  double uncovered_length;
  bool markov_covering;
  bool partition_ok;
  bool expansion_ok;
  bool distortion_ok;
  bool passed;
} BlConditionReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static name of a status code ("ok", "domain", …); never null.
const char *bl_status_name(enum BlStatus status);

// Library version as a static C string.
const char *bl_version(void);

// Lévy's constant γ = π²/(12 log 2).
double bl_levy_gamma(void);

// The Gauss map's generic Lyapunov exponent 2γ.
double bl_gauss_lyapunov(void);

// Standard normal distribution function Φ(x).
enum BlStatus bl_phi_cdf(double x, double *out);

// Mills-ratio bounds: lower ≤ Φ(−x) ≤ upper for x > 0.
enum BlStatus bl_mills_bounds(double x, double *lower, double *upper);

// Σ_{n≥0} Φ(−ρ√n) with a certified truncation; `scaled` = ρ²·value
// lies in [1/2, 1/2 + ρ²].
enum BlStatus bl_heyde_gaussian_sum(double rho, struct BlGaussianSumReport *out);

// ρ²·Σ_{n≥K/ρ²} Φ(−ρ√n), the scaled far tail.
enum BlStatus bl_tail_gaussian_sum(double rho, double k, double *out);

// IV(ε) = Σ Φ(−ε√n/σ)/n, the log-weighted Gaussian series.
enum BlStatus bl_log_weighted_gaussian_sum(double eps, double sigma, double *out);

// Create a map by registry id ("gauss" or "binary"); null on failure.
struct BlMap *bl_map_new(const char *id);

// Release a map handle (null is a no-op).
void bl_map_free(struct BlMap *map);

// T(x); branch endpoints report orbit termination.
enum BlStatus bl_map_apply(const struct BlMap *map, double x, double *out);

// log |T′(x)|.
enum BlStatus bl_map_log_derivative(const struct BlMap *map, double x, double *out);

// Sₙf(x) for a registry observable ("log-deriv", "bit", "zero",
// "constant:`<v>`").
enum BlStatus bl_map_birkhoff_sum(const struct BlMap *map,
                                  const char *observable,
                                  double x,
                                  size_t n,
                                  double *out);

// Probe the expansion/distortion/Markov/partition conditions.
enum BlStatus bl_map_verify_conditions(const struct BlMap *map,
                                       size_t probe_count,
                                       struct BlConditionReport *out);

// Monte Carlo (Λₙ⁺(ε), Λₙ⁻(ε)) with binomial standard errors, keyed by
// (seed, n, sample index).
enum BlStatus bl_map_estimate_lambda_n(const struct BlMap *map,
                                       const char *observable,
                                       size_t n,
                                       double eps,
                                       size_t samples,
                                       uint64_t seed,
                                       double *lambda_plus,
                                       double *lambda_minus,
                                       double *stderr_plus,
                                       double *stderr_minus);

// Continued-fraction digits of p/q ∈ (0,1) into a caller buffer.
// `written` receives the digit count; digits beyond u64 report overflow.
enum BlStatus bl_cf_digits_rational(uint64_t p,
                                    uint64_t q,
                                    uint64_t *digits,
                                    size_t capacity,
                                    size_t *written);

// log qₙ(x)/n for x = p/q (Lévy's constant γ is the a.e. limit).
enum BlStatus bl_levy_statistic_rational(uint64_t p, uint64_t q, size_t n, double *out);

// Create a Gauss-map pressure solver; zero arguments pick the defaults
// (degree 40, 4000 direct branches). Null on invalid parameters.
struct BlPressureSolver *bl_pressure_new(size_t degree, size_t branch_direct);

// Release a pressure solver (null is a no-op).
void bl_pressure_free(struct BlPressureSolver *solver);

// P(β) = log of the leading transfer-operator eigenvalue.
enum BlStatus bl_pressure_eval(const struct BlPressureSolver *solver, double beta, double *out);

// (P′(β), P″(β)) by Richardson central differences.
enum BlStatus bl_pressure_derivatives(const struct BlPressureSolver *solver,
                                      double beta,
                                      double *p1,
                                      double *p2);

// Lyapunov spectrum point: β(α) and b(α).
enum BlStatus bl_spectrum_b(const struct BlPressureSolver *solver,
                            double alpha,
                            double *beta_out,
                            double *b_out);

// Rate function I(ε) = (ε+2γ)(1 − b(ε+2γ)).
enum BlStatus bl_rate_function(const struct BlPressureSolver *solver, double eps, double *out);

// I″(0) via both routes (direct differencing and −2b″(2γ)γ).
enum BlStatus bl_rate_curvature(const struct BlPressureSolver *solver,
                                double *direct,
                                double *via_spectrum);

// Status helper kept callable from C for quick smoke checks.
int bl_status_is_ok(enum BlStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIRKLAB_H */
