#ifndef RELSCORE_H
#define RELSCORE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RsStatus {
  RS_STATUS_OK = 0,
  RS_STATUS_NULL_POINTER = 1,
  RS_STATUS_EMPTY_SAMPLE = 2,
  RS_STATUS_NON_FINITE_INPUT = 3,
  RS_STATUS_SAMPLE_TOO_SMALL = 4,
  RS_STATUS_ZERO_VARIANCE = 5,
  RS_STATUS_INVALID_ALPHA = 6,
  RS_STATUS_INVALID_PARAMETER = 7,
  RS_STATUS_PANIC = 255,
} RsStatus;

typedef enum RsVerdict {
  RS_VERDICT_MODEL1_BETTER = 0,
  RS_VERDICT_MODEL2_BETTER = 1,
  RS_VERDICT_INCONCLUSIVE = 2,
} RsVerdict;

typedef enum RsQuantileMethod {
  /**
   * Not an Edgeworth interval.
   */
  RS_QUANTILE_METHOD_NONE = 0,
  RS_QUANTILE_METHOD_SHORTEST_INTERVAL = 1,
  RS_QUANTILE_METHOD_EQUAL_TAILED = 2,
  RS_QUANTILE_METHOD_NORMAL_FALLBACK = 3,
} RsQuantileMethod;

typedef enum RsKind {
  RS_KIND_Z = 0,
  RS_KIND_T = 1,
} RsKind;

/**
 * Opaque paired sample of log-densities.
 */
typedef struct RsScoreSample RsScoreSample;

typedef struct RsMomentSummary {
  size_t n;
  double mean;
  /**
   * Denominator `n - 1`.
   */
  double variance;
  double skewness;
  double kurtosis_excess;
  /**
   * All differences equal; the higher moments are reported as 0.
   */
  bool degenerate;
} RsMomentSummary;

typedef struct RsInterval {
  double lower;
  double upper;
  double point;
  double std_error;
  enum RsVerdict verdict;
  enum RsQuantileMethod quantile_method;
} RsInterval;

typedef struct RsQuantilePair {
  double lo;
  double hi;
  double mass;
  enum RsQuantileMethod method;
} RsQuantilePair;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies `n` paired log-densities into a new sample.
 *
 * # Safety
 * `ell1` and `ell2` must be valid for `n` reads and `out` for one write.
 * Free the result with [`rs_score_sample_free`].
 */
enum RsStatus rs_score_sample_new(const double *ell1,
                                  const double *ell2,
                                  size_t n,
                                  struct RsScoreSample **out);

/**
 * # Safety
 * `sample` must be null or come from [`rs_score_sample_new`] and not have
 * been freed.
 */
void rs_score_sample_free(struct RsScoreSample *sample);

/**
 * Number of pairs, or 0 for a null handle.
 *
 * # Safety
 * `sample` must be null or a live handle.
 */
size_t rs_score_sample_len(const struct RsScoreSample *sample);

/**
 * # Safety
 * `sample` must be a live handle and `out` valid for one write.
 */
enum RsStatus rs_relative_score(const struct RsScoreSample *sample, double *out);

/**
 * # Safety
 * `sample` must be a live handle and `out` valid for one write.
 */
enum RsStatus rs_moment_summary(const struct RsScoreSample *sample, struct RsMomentSummary *out);

/**
 * CLT interval at level `1 - alpha`.
 *
 * # Safety
 * `sample` must be a live handle and `out` valid for one write.
 */
enum RsStatus rs_ci_clt(const struct RsScoreSample *sample, double alpha, struct RsInterval *out);

/**
 * Edgeworth interval. Pass NaN as `known_variance` to use the sample
 * variance; it is only used by kind Z.
 *
 * # Safety
 * `sample` must be a live handle and `out` valid for one write.
 */
enum RsStatus rs_ci_edgeworth(const struct RsScoreSample *sample,
                              double alpha,
                              enum RsKind kind,
                              double known_variance,
                              struct RsInterval *out);

/**
 * Expansion CDF clamped to [0, 1].
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum RsStatus rs_ee_cdf(double x,
                        size_t n,
                        double kappa3,
                        double kappa4,
                        enum RsKind kind,
                        double *out);

/**
 * Expansion density (may be negative).
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum RsStatus rs_ee_pdf(double x,
                        size_t n,
                        double kappa3,
                        double kappa4,
                        enum RsKind kind,
                        double *out);

/**
 * Shortest `1 - alpha` interval of the expansion.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum RsStatus rs_shortest_interval(size_t n,
                                   double kappa3,
                                   double kappa4,
                                   enum RsKind kind,
                                   double alpha,
                                   struct RsQuantilePair *out);

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 * message length in bytes excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t rs_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELSCORE_H */
