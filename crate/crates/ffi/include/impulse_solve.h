#ifndef IMPULSE_SOLVE_H
#define IMPULSE_SOLVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum {
  IsOk = 0,
  IsNullPointer = 1,
  IsInvalidArgument = 2,
  IsParseError = 3,
  IsSolverError = 4,
  IsNoBracket = 5,
  IsPanic = 6,
} IsStatus;

/**
 * Opaque stationary density field.
 */
typedef struct IsDensityField IsDensityField;

/**
 * Opaque closed-form 1-D solution handle.
 */
typedef struct IsExact1dSolution IsExact1dSolution;

/**
 * Opaque model-parameter handle.
 */
typedef struct IsParams IsParams;

/**
 * Opaque converged value field.
 */
typedef struct IsValueField IsValueField;

/**
 * Flat summary of the closed-form solution.
 */
typedef struct {
  double x_bar;
  double phi0;
  double phi_plus0;
  double phi1;
  double q;
  double r;
} IsExact1dSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`); returns the full message length.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null.
 */
size_t is_last_error_message(char *buf, size_t len);

/**
 * Static version string of the library.
 */
const char *is_version(void);

/**
 * Parses model parameters from a JSON document (the same schema the CLI
 * consumes under the `model` key).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
IsStatus is_params_from_json(const char *json, IsParams **out);

/**
 * # Safety
 * `params` must come from [`is_params_from_json`] and not be freed twice.
 */
void is_params_free(IsParams *params);

/**
 * # Safety
 * `params` must be a live handle; `out` must be writable.
 */
IsStatus is_exact1d_solve(const IsParams *params, IsExact1dSolution **out);

/**
 * # Safety
 * `sol` must be a live handle; `out` must be writable.
 */
IsStatus is_exact1d_summary(const IsExact1dSolution *sol, IsExact1dSummary *out);

/**
 * Closed-form value function at `x`; NaN on a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
double is_exact1d_value(const IsExact1dSolution *sol, double x);

/**
 * Closed-form interior density at `x`; NaN on a null handle.
 *
 * # Safety
 * `sol` must be a live handle or null.
 */
double is_exact1d_density(const IsExact1dSolution *sol, double x);

/**
 * # Safety
 * `sol` must come from [`is_exact1d_solve`] and not be freed twice.
 */
void is_exact1d_solution_free(IsExact1dSolution *sol);

/**
 * Solves the optimality equation by value iteration.
 *
 * `two_d` selects the full grid (nonzero) or the 1-D reduction; `rho` <= 0
 * picks the default pseudo-time rule for the mode.
 *
 * # Safety
 * `params` must be a live handle; `out` must be writable.
 */
IsStatus is_hjb_solve(const IsParams *params,
                      size_t n,
                      size_t l_bins,
                      double rho,
                      double tol,
                      size_t max_iter,
                      int two_d,
                      IsValueField **out);

/**
 * # Safety
 * `field` must be a live handle or null.
 */
size_t is_value_field_n(const IsValueField *field);

/**
 * Number of y rows: 1 for the 1-D reduction, n + 1 otherwise.
 *
 * # Safety
 * `field` must be a live handle or null.
 */
size_t is_value_field_rows(const IsValueField *field);

/**
 * # Safety
 * `field` must be a live handle or null.
 */
size_t is_value_field_iterations(const IsValueField *field);

/**
 * Value at vertex (i, j); NaN outside the grid.
 *
 * # Safety
 * `field` must be a live handle or null.
 */
double is_value_field_phi(const IsValueField *field, size_t i, size_t j);

/**
 * Replenishment amount at vertex (i, j); NaN outside the grid.
 *
 * # Safety
 * `field` must be a live handle or null.
 */
double is_value_field_eta(const IsValueField *field, size_t i, size_t j);

/**
 * Detected threshold of row j (-1 means the row never replenishes); NaN
 * outside the grid.
 *
 * # Safety
 * `field` must be a live handle or null.
 */
double is_value_field_threshold(const IsValueField *field, size_t j);

/**
 * # Safety
 * `field` must come from [`is_hjb_solve`] and not be freed twice.
 */
void is_value_field_free(IsValueField *field);

/**
 * Integrates the density to its stationary state under per-row threshold
 * levels (`thresholds_len` of 1 broadcasts a single level to every row;
 * otherwise it must equal the number of cell rows). `dt` <= 0 picks the
 * default increment for the mode.
 *
 * # Safety
 * `params` must be a live handle; `thresholds` must point to
 * `thresholds_len` doubles; `out` must be writable.
 */
IsStatus is_fp_solve(const IsParams *params,
                     size_t n,
                     size_t l_bins,
                     double dt,
                     double tol,
                     size_t max_steps,
                     int two_d,
                     const double *thresholds,
                     size_t thresholds_len,
                     IsDensityField **out);

/**
 * # Safety
 * `field` must be a live handle or null.
 */
size_t is_density_field_n(const IsDensityField *field);

/**
 * Number of cell rows: 1 for the 1-D reduction, n otherwise.
 *
 * # Safety
 * `field` must be a live handle or null.
 */
size_t is_density_field_rows(const IsDensityField *field);

/**
 * Cell-average density of cell (i, j), zero-based; NaN outside the grid.
 *
 * # Safety
 * `field` must be a live handle or null.
 */
double is_density_field_p(const IsDensityField *field, size_t i, size_t j);

/**
 * Depleted-edge weight density of row j (zero-based); NaN outside.
 *
 * # Safety
 * `field` must be a live handle or null.
 */
double is_density_field_q(const IsDensityField *field, size_t j);

/**
 * Full-edge weight density of row j (zero-based); NaN outside.
 *
 * # Safety
 * `field` must be a live handle or null.
 */
double is_density_field_r(const IsDensityField *field, size_t j);

/**
 * # Safety
 * `field` must be a live handle or null.
 */
double is_density_field_mass(const IsDensityField *field);

/**
 * # Safety
 * `field` must be a live handle or null.
 */
size_t is_density_field_steps(const IsDensityField *field);

/**
 * # Safety
 * `field` must come from [`is_fp_solve`] and not be freed twice.
 */
void is_density_field_free(IsDensityField *field);

/**
 * Monte-Carlo estimate of the discounted objective from `(x0, y0)` under
 * a flat threshold policy; writes the sample mean and its standard error.
 *
 * # Safety
 * `params` must be a live handle; both out-pointers must be writable.
 */
IsStatus is_mc_objective(const IsParams *params,
                         double x_bar,
                         double x0,
                         double y0,
                         size_t paths,
                         double dt,
                         double horizon,
                         uint64_t seed,
                         double *out_mean,
                         double *out_std_err);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* IMPULSE_SOLVE_H */
