#ifndef QML_H
#define QML_H

#include <stddef.h>
#include <stdint.h>

typedef enum QmlStatus {
  QML_OK = 0,
  QML_NULL_POINTER = 1,
  QML_INVALID_UTF8 = 2,
  QML_SYNTAX = 3,
  QML_DIMENSION = 4,
  QML_DOMAIN = 5,
  QML_ORDER = 6,
  QML_CONVERGENCE = 7,
  QML_STEP_UNDERFLOW = 8,
  QML_INVALID_DEFINING_FUNCTION = 9,
  QML_NORMALIZATION = 10,
  QML_NYQUIST = 11,
  QML_RESOLUTION = 12,
  QML_INSUFFICIENT_SAMPLES = 13,
  QML_NON_POSITIVE_SAMPLE = 14,
  QML_MEMORY_BUDGET = 15,
  QML_UNKNOWN_BUILTIN = 16,
  QML_INVALID_ARGUMENT = 17,
  QML_CONFIG = 18,
  QML_IO = 19,
  QML_BUFFER_TOO_SMALL = 20,
  QML_PANIC = 21,
} QmlStatus;

/**
 * A parsed symbol or defining function.
 */
typedef struct QmlSymbol QmlSymbol;

/**
 * A sampled bicharacteristic.
 */
typedef struct QmlTrajectory QmlTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or null.
 */
const char *qml_last_error(void);

/**
 * Parse `text` as a symbol on `T*R^n`.
 *
 * # Safety
 * `text` must be a nul-terminated string and `out` a valid pointer.
 */
enum QmlStatus qml_symbol_parse(const char *text, size_t n, struct QmlSymbol **out);

/**
 * Look up a builtin symbol by name (`model-fold`, `flat-elliptic`).
 *
 * # Safety
 * `name` must be a nul-terminated string and `out` a valid pointer.
 */
enum QmlStatus qml_symbol_builtin(const char *name, size_t n, struct QmlSymbol **out);

/**
 * # Safety
 * `sym` must come from this library and not be used afterwards.
 */
void qml_symbol_free(struct QmlSymbol *sym);

/**
 * Dimension `n` of the base space, 0 for a null handle.
 *
 * # Safety
 * `sym` must be null or a live handle.
 */
size_t qml_symbol_dim(const struct QmlSymbol *sym);

/**
 * Number of doubles written by `qml_symbol_jet`: `1 + d + d^2 (+ d^3)`
 * with `d = 2n`, up to the given order.
 */
size_t qml_jet_len(size_t n, int order);

/**
 * Derivatives of `sym` at `(x, xi)` up to `order ≤ 3` over the variables
 * `(x1..xn, xi1..xin)`: value, gradient, then full Hessian and third
 * derivative arrays in row-major order.
 *
 * # Safety
 * `x` and `xi` must hold `n` doubles; `out` must hold `out_len` doubles.
 */
enum QmlStatus qml_symbol_jet(const struct QmlSymbol *sym,
                              const double *x,
                              const double *xi,
                              size_t n,
                              int order,
                              double *out,
                              size_t out_len);

/**
 * `ṙ` and `r̈` along the flow of `p` through `(x, xi)`.
 *
 * # Safety
 * `x` and `xi` must hold `n` doubles; out pointers must be valid.
 */
enum QmlStatus qml_rddot(const struct QmlSymbol *p,
                         const struct QmlSymbol *r,
                         const double *x,
                         const double *xi,
                         size_t n,
                         double *out_rdot,
                         double *out_rddot);

/**
 * `δ(n, p)` and `δ̃(n, p)`; pass `p = INFINITY` for `p = ∞`.
 * `*has_delta_tilde` is 0 where `δ̃` is not defined.
 *
 * # Safety
 * Out pointers must be valid.
 */
enum QmlStatus qml_exponents(size_t n,
                             double p,
                             double *out_delta,
                             double *out_delta_tilde,
                             int *has_delta_tilde);

/**
 * Integrate the Hamiltonian flow of `p` from `(x, xi)` at `s = s0` to
 * `s1`, sampled at `samples` equally spaced parameters.
 *
 * # Safety
 * `x` and `xi` must hold `n` doubles and `out` must be valid.
 */
enum QmlStatus qml_flow(const struct QmlSymbol *p,
                        const double *x,
                        const double *xi,
                        size_t n,
                        double s0,
                        double s1,
                        size_t samples,
                        double tol,
                        struct QmlTrajectory **out);

/**
 * # Safety
 * `t` must be null or a live handle.
 */
size_t qml_trajectory_len(const struct QmlTrajectory *t);

/**
 * # Safety
 * `t` must be null or a live handle.
 */
double qml_trajectory_max_drift(const struct QmlTrajectory *t);

/**
 * Sample `k`: flow parameter, point (`n` doubles each for `x` and `xi`)
 * and drift of `p` from its initial value.
 *
 * # Safety
 * `x` and `xi` must have room for `n` doubles; other out pointers valid.
 */
enum QmlStatus qml_trajectory_sample(const struct QmlTrajectory *t,
                                     size_t k,
                                     double *out_s,
                                     double *out_x,
                                     double *out_xi,
                                     double *out_drift);

/**
 * # Safety
 * `t` must come from this library and not be used afterwards.
 */
void qml_trajectory_free(struct QmlTrajectory *t);

/**
 * Geometry report (JSON) for `p` and hypersurface `r` over the box
 * `[-x_half, x_half]^n × [-xi_half, xi_half]^n` with `samples` points
 * per axis.
 *
 * # Safety
 * Handles must be live; `out` must be valid. Free the result with
 * `qml_string_free`.
 */
enum QmlStatus qml_geometry_report_json(const struct QmlSymbol *p,
                                        const struct QmlSymbol *r,
                                        double x_half,
                                        double xi_half,
                                        size_t samples,
                                        uint64_t seed,
                                        char **out);

/**
 * Fold report (JSON) at `(x, xi)` for the reduced symbol solved from
 * `p = 0`; `r` may be null.
 *
 * # Safety
 * `x` and `xi` must hold `n` doubles; `out` must be valid. Free the result
 * with `qml_string_free`.
 */
enum QmlStatus qml_fold_report_json(const struct QmlSymbol *p,
                                    const struct QmlSymbol *r,
                                    const double *x,
                                    const double *xi,
                                    size_t n,
                                    char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void qml_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QML_H */
