#ifndef OCONNELL_H
#define OCONNELL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum OcStatus {
  OC_STATUS_OK = 0,
  OC_STATUS_DOMAIN = 1,
  OC_STATUS_CONVERGENCE = 2,
  OC_STATUS_CAPABILITY = 3,
  OC_STATUS_ESTIMATION = 4,
  OC_STATUS_INTEGRATION = 5,
  OC_STATUS_CONFIG = 6,
  OC_STATUS_NULL_POINTER = 7,
  OC_STATUS_BUFFER_TOO_SMALL = 8,
  OC_STATUS_PANIC = 9,
} OcStatus;

typedef enum OcScheme {
  OC_SCHEME_EULER = 0,
  OC_SCHEME_TAMED_EULER = 1,
  OC_SCHEME_ADAPTIVE = 2,
} OcScheme;

typedef enum OcKillMode {
  OC_KILL_MODE_WEIGHTED = 0,
  OC_KILL_MODE_BERNOULLI = 1,
} OcKillMode;

/**
 * Opaque ensemble of terminal configurations.
 */
typedef struct OcEnsemble OcEnsemble;

/**
 * Opaque simulation configuration.
 */
typedef struct OcSimConfig OcSimConfig;

/**
 * A value with an absolute error bound (or a standard error for Monte Carlo).
 */
typedef struct OcValue {
  double value;
  double error_bound;
} OcValue;

typedef struct OcComplex {
  double re;
  double im;
  double error_bound;
} OcComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Valid
 * until the next call on this thread.
 */
const char *oc_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *oc_version(void);

enum OcStatus oc_gamma(double x, struct OcValue *result);

enum OcStatus oc_bessel_j0(double x, struct OcValue *result);

enum OcStatus oc_bessel_i(double order, double x, struct OcValue *result);

/**
 * K_order(x), or K_{i order}(x) when `imaginary` is nonzero.
 */
enum OcStatus oc_bessel_k(double order, int32_t imaginary, double x, struct OcValue *result);

enum OcStatus oc_theta(double r, double t, struct OcValue *result);

/**
 * ψ_{iν}(x) for `n` particles.
 */
enum OcStatus oc_psi(const double *nu, const double *x, size_t n, struct OcComplex *result);

enum OcStatus oc_psi0(const double *x, size_t n, struct OcValue *result);

enum OcStatus oc_heat_kernel(double t, double y, double x, struct OcValue *result);

/**
 * Killed transition density Q_N(t, y|x) by spectral quadrature.
 */
enum OcStatus oc_q_spectral(double t,
                            const double *y,
                            const double *x,
                            size_t n,
                            struct OcValue *result);

/**
 * Q_2(t, y|x) in closed-form-factorized form; `y` and `x` hold 2 entries.
 */
enum OcStatus oc_q2_factorized(double t, const double *y, const double *x, struct OcValue *result);

/**
 * Monte Carlo estimate of Q_N; `error_bound` is the standard error.
 */
enum OcStatus oc_q_spectral_mc(double t,
                               const double *y,
                               const double *x,
                               size_t n,
                               size_t samples,
                               uint64_t seed,
                               struct OcValue *result);

/**
 * One-particle killed density with potential e^{-2x}/2 and drift mu.
 */
enum OcStatus oc_my_q(double t, double y, double x, double mu, struct OcValue *result);

/**
 * Survival probability up to time t from x with drift mu, N ≤ 2.
 */
enum OcStatus oc_survival(double t,
                          const double *x,
                          const double *mu,
                          size_t n,
                          struct OcValue *result);

/**
 * Transition density of the conditioned process, N ≤ 2.
 */
enum OcStatus oc_oconnell_density(double t,
                                  const double *y,
                                  const double *x,
                                  size_t n,
                                  struct OcValue *result);

/**
 * Creates a configuration (Euler scheme, weighted killing).
 */
enum OcStatus oc_sim_config_new(size_t n_particles,
                                double t_final,
                                double dt,
                                size_t paths,
                                uint64_t seed,
                                struct OcSimConfig **config);

enum OcStatus oc_sim_config_set_scheme(struct OcSimConfig *config, enum OcScheme scheme);

enum OcStatus oc_sim_config_set_kill_mode(struct OcSimConfig *config, enum OcKillMode mode);

/**
 * Releases a configuration; null is ignored.
 */
void oc_sim_config_free(struct OcSimConfig *config);

/**
 * Brownian motions from `x0` with velocity `drift`, killed at rate
 * Σ exp(-(x_{j+1} - x_j)/eps).
 */
enum OcStatus oc_simulate_fk(const struct OcSimConfig *config,
                             const double *x0,
                             const double *drift,
                             double eps,
                             struct OcEnsemble **ensemble);

/**
 * The conditioned process (N ≤ 4) from `x0`.
 */
enum OcStatus oc_sde_oconnell(const struct OcSimConfig *config,
                              const double *x0,
                              struct OcEnsemble **ensemble);

/**
 * Dyson Brownian motion (β = 2) from `x0`.
 */
enum OcStatus oc_sde_dyson(const struct OcSimConfig *config,
                           const double *x0,
                           struct OcEnsemble **ensemble);

/**
 * One-particle conditioned process with drift mu, started at x0.
 */
enum OcStatus oc_sde_my(const struct OcSimConfig *config,
                        double x0,
                        double mu,
                        struct OcEnsemble **ensemble);

/**
 * The same process started from -infinity, built from exponential functionals.
 */
enum OcStatus oc_my_explicit(const struct OcSimConfig *config,
                             double mu,
                             struct OcEnsemble **ensemble);

/**
 * Kernel estimate of Q_N(t, y|x) from killed paths (t from the config).
 */
enum OcStatus oc_fk_density(const struct OcSimConfig *config,
                            const double *x,
                            const double *y,
                            struct OcValue *result);

enum OcStatus oc_ensemble_len(const struct OcEnsemble *ensemble, size_t *len);

enum OcStatus oc_ensemble_particles(const struct OcEnsemble *ensemble, size_t *n);

/**
 * Copies positions, row-major (len × particles), into `buf`.
 */
enum OcStatus oc_ensemble_positions(const struct OcEnsemble *ensemble, double *buf, size_t cap);

/**
 * Copies survival weights (len entries) into `buf`.
 */
enum OcStatus oc_ensemble_weights(const struct OcEnsemble *ensemble, double *buf, size_t cap);

/**
 * Releases an ensemble; null is ignored.
 */
void oc_ensemble_free(struct OcEnsemble *ensemble);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCONNELL_H */
