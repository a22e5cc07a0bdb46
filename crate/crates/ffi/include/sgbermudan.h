#ifndef SGBERMUDAN_H
#define SGBERMUDAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SgbPayoff {
  SGB_PAYOFF_ARITHMETIC_PUT = 0,
  SGB_PAYOFF_GEOMETRIC_PUT = 1,
} SgbPayoff;

typedef enum SgbQuadrature {
  SGB_QUADRATURE_MC = 0,
  SGB_QUADRATURE_RQMC_SOBOL = 1,
  SGB_QUADRATURE_GH_TENSOR = 2,
  SGB_QUADRATURE_GH_SPARSE = 3,
  SGB_QUADRATURE_GK_SPARSE = 4,
} SgbQuadrature;

/**
 * Status codes; the nonzero values mirror the CLI exit codes.
 */
typedef enum SgbStatus {
  SGB_STATUS_OK = 0,
  SGB_STATUS_IO = 1,
  SGB_STATUS_CONFIG = 2,
  SGB_STATUS_FEASIBILITY = 3,
  SGB_STATUS_RESOURCE = 4,
  SGB_STATUS_NUMERICAL = 5,
  SGB_STATUS_NULL_POINTER = 6,
  SGB_STATUS_PANIC = 7,
} SgbStatus;

typedef struct SgbMarket SgbMarket;

typedef struct SgbOption SgbOption;

typedef struct SgbPricer SgbPricer;

/**
 * Method parameters; start from [`sgb_pricing_options_default`].
 */
typedef struct SgbPricingOptions {
  size_t level;
  double scale;
  double bubble_exponent;
  enum SgbQuadrature quadrature;
  size_t size;
  uint64_t seed;
  /**
   * 0 uses the global thread pool.
   */
  size_t threads;
} SgbPricingOptions;

typedef struct SgbPriceResult {
  double price;
  double continuation_at_origin;
  double payoff_at_spot;
  uint64_t n_inner;
  uint64_t n_cgl;
  uint64_t quadrature_points;
  double feasibility_margin;
  double min_bubble;
} SgbPriceResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sgb_version(void);

/**
 * Copies this thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`) and returns the full length
 * including the terminator. Pass `buf = NULL` to query the size.
 *
 * # Safety
 * `buf` must be NULL or valid for `len` bytes.
 */
size_t sgb_last_error_message(char *buf, size_t len);

/**
 * Market with per-asset arrays of length `d` and a row-major `d x d`
 * correlation matrix.
 *
 * # Safety
 * Array pointers must be valid for the stated lengths; `out` must be valid.
 */
enum SgbStatus sgb_market_new(size_t d,
                              const double *spot,
                              double rate,
                              const double *dividends,
                              const double *vols,
                              const double *correlation,
                              struct SgbMarket **out);

/**
 * Identical assets with constant pairwise correlation.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SgbStatus sgb_market_equicorrelated(size_t d,
                                         double spot,
                                         double rate,
                                         double dividend,
                                         double vol,
                                         double rho,
                                         struct SgbMarket **out);

/**
 * # Safety
 * `market` must be NULL or a handle from `sgb_market_*` not yet freed.
 */
void sgb_market_free(struct SgbMarket *market);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum SgbStatus sgb_option_new(double strike,
                              double maturity,
                              enum SgbPayoff payoff,
                              size_t exercise_count,
                              struct SgbOption **out);

/**
 * # Safety
 * `option` must be NULL or a handle from `sgb_option_new` not yet freed.
 */
void sgb_option_free(struct SgbOption *option);

/**
 * Level 5, `L = 2`, `beta = 1`, Genz-Keister sparse level 5.
 */
struct SgbPricingOptions sgb_pricing_options_default(void);

/**
 * Builds grid and rule and checks feasibility; no pricing yet.
 *
 * # Safety
 * Handles must be live; `options` and `out` must be valid pointers.
 */
enum SgbStatus sgb_pricer_new(const struct SgbMarket *market,
                              const struct SgbOption *option,
                              const struct SgbPricingOptions *options,
                              struct SgbPricer **out);

/**
 * Runs the backward induction.
 *
 * # Safety
 * `pricer` must be a live handle and `out` valid for writes.
 */
enum SgbStatus sgb_pricer_run(struct SgbPricer *pricer, struct SgbPriceResult *out);

/**
 * # Safety
 * `pricer` must be NULL or a handle from `sgb_pricer_new` not yet freed.
 */
void sgb_pricer_free(struct SgbPricer *pricer);

/**
 * Sparse grid sizes: all points and inner points. Fails with
 * `Resource` when a count does not fit in 64 bits.
 *
 * # Safety
 * Output pointers must be valid for writes.
 */
enum SgbStatus sgb_grid_counts(size_t d, size_t level, uint64_t *n_cgl, uint64_t *n_inner);

/**
 * Self-converged 1-d Bermudan price of the geometric basket's reduction.
 *
 * # Safety
 * Handles must be live and `price` valid for writes.
 */
enum SgbStatus sgb_geometric_reference(const struct SgbMarket *market,
                                       const struct SgbOption *option,
                                       double *price);

/**
 * Black-Scholes put with continuous dividend yield.
 */
double sgb_european_put(double spot,
                        double strike,
                        double rate,
                        double dividend,
                        double vol,
                        double maturity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGBERMUDAN_H */
