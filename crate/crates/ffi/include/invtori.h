#ifndef INVTORI_H
#define INVTORI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum InvtoriStatus {
  INVTORI_STATUS_OK = 0,
  INVTORI_STATUS_NULL_POINTER = 1,
  INVTORI_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A string argument is not valid UTF-8.
   */
  INVTORI_STATUS_INVALID_UTF8 = 3,
  INVTORI_STATUS_UNKNOWN_NAME = 4,
  INVTORI_STATUS_CONFIG = 5,
  /**
   * A numerical routine failed to converge or lost accuracy.
   */
  INVTORI_STATUS_NUMERICAL = 6,
  INVTORI_STATUS_OVERFLOW = 7,
  INVTORI_STATUS_NOT_UNIMODULAR = 8,
  INVTORI_STATUS_IO = 9,
  /**
   * The library panicked; the message holds the payload.
   */
  INVTORI_STATUS_PANIC = 10,
} InvtoriStatus;

typedef enum InvtoriOrbitClass {
  INVTORI_ORBIT_CLASS_FINITE_ORBIT = 0,
  INVTORI_ORBIT_CLASS_PARABOLIC_GROWTH = 1,
  INVTORI_ORBIT_CLASS_HYPERBOLIC_GROWTH = 2,
} InvtoriOrbitClass;

/**
 * The symplectic extension of a base map.
 */
typedef struct InvtoriExtension InvtoriExtension;

/**
 * A named example system: a Hamiltonian and a parametrized submanifold.
 */
typedef struct InvtoriFixture InvtoriFixture;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a
 * success. Valid until the next call into the library on this thread.
 */
const char *invtori_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *invtori_version(void);

/**
 * Creates the fixture called `name`.
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` a valid pointer.
 */
enum InvtoriStatus invtori_fixture_new(const char *name, struct InvtoriFixture **out);

/**
 * Releases a fixture. Null is ignored.
 *
 * # Safety
 * `fx` must come from [`invtori_fixture_new`] and not be used afterwards.
 */
void invtori_fixture_free(struct InvtoriFixture *fx);

/**
 * Configuration-space dimension `d` (phase points have `2d` entries), or
 * 0 for a null handle.
 *
 * # Safety
 * `fx` must be null or a live fixture handle.
 */
size_t invtori_fixture_dim(const struct InvtoriFixture *fx);

/**
 * Parameter dimension of the fixture's submanifold, or 0 for null.
 *
 * # Safety
 * `fx` must be null or a live fixture handle.
 */
size_t invtori_fixture_param_dim(const struct InvtoriFixture *fx);

/**
 * Writes the point `j(θ)` of the submanifold into `out` (`2d` values).
 *
 * # Safety
 * `theta` must hold `theta_len` doubles and `out` `out_len` doubles.
 */
enum InvtoriStatus invtori_fixture_embed(const struct InvtoriFixture *fx,
                                         const double *theta,
                                         size_t theta_len,
                                         double *out,
                                         size_t out_len);

/**
 * Writes `X_H(x)` into `out`.
 *
 * # Safety
 * `x` must hold `x_len` doubles and `out` `out_len` doubles.
 */
enum InvtoriStatus invtori_fixture_vector_field(const struct InvtoriFixture *fx,
                                                const double *x,
                                                size_t x_len,
                                                double *out,
                                                size_t out_len);

/**
 * Flows `x` for time `t` and writes `φ_t(x)` into `out`. A positive
 * `step` overrides the fixture's integration step; closed-form flows are
 * used when available.
 *
 * # Safety
 * `x` must hold `x_len` doubles and `out` `out_len` doubles.
 */
enum InvtoriStatus invtori_fixture_flow(const struct InvtoriFixture *fx,
                                        const double *x,
                                        size_t x_len,
                                        double t,
                                        double step,
                                        double *out,
                                        size_t out_len);

/**
 * Builds the extension of a named base map (`identity`, `sine-0.05`,
 * `translation(0.1,0.2)`, ...) on `T^dim`, with the default quadrature and
 * solver settings.
 *
 * # Safety
 * `basemap` must be a nul-terminated string and `out` a valid pointer.
 */
enum InvtoriStatus invtori_extension_new(const char *basemap,
                                         size_t dim,
                                         struct InvtoriExtension **out);

/**
 * Releases an extension. Null is ignored.
 *
 * # Safety
 * `ext` must come from [`invtori_extension_new`] and not be used
 * afterwards.
 */
void invtori_extension_free(struct InvtoriExtension *ext);

/**
 * Dimension `d` of the base torus, or 0 for null.
 *
 * # Safety
 * `ext` must be null or a live extension handle.
 */
size_t invtori_extension_dim(const struct InvtoriExtension *ext);

/**
 * Writes `F(q, p)` into `out` as `Q1..Qd, P1..Pd`.
 *
 * # Safety
 * `x` must hold `x_len` doubles and `out` `out_len` doubles.
 */
enum InvtoriStatus invtori_extension_apply(const struct InvtoriExtension *ext,
                                           const double *x,
                                           size_t x_len,
                                           double *out,
                                           size_t out_len);

/**
 * Classifies the orbit of `v0` under the row-major matrix `a` over `n`
 * steps. `growth` receives `|Aⁿ v0| / |Aⁿ⁻¹ v0|` and `angle` the limit
 * direction in `[0, ½)`, both NaN for bounded orbits; either may be null.
 *
 * # Safety
 * `a` must point to 4 and `v0` to 2 integers; `class` must be valid.
 */
enum InvtoriStatus invtori_homology_classify(const int64_t *a,
                                             const int64_t *v0,
                                             size_t n,
                                             enum InvtoriOrbitClass *class_,
                                             double *growth,
                                             double *angle);

/**
 * Runs a TOML configuration, writing its report files. `passed` receives
 * whether every check passed; a failed check is not an error.
 *
 * # Safety
 * `config` must be a nul-terminated string and `passed` a valid pointer.
 */
enum InvtoriStatus invtori_run_config(const char *config, bool *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INVTORI_H */
