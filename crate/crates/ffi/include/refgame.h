#ifndef REFGAME_H
#define REFGAME_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  RG_STATUS_INVALID_UTF8 = 2,
  RG_STATUS_INVALID_ARGUMENT = 3,
  // The statistic cannot be computed on this input.
  RG_STATUS_NOT_COMPUTABLE = 4,
  RG_STATUS_OUT_OF_RANGE = 5,
  RG_STATUS_INTERNAL = 6,
} RgStatus;

// A list of (meaning, label) pairs.
typedef struct RgCorpus RgCorpus;

// A fitted random-intercept model.
typedef struct RgLmmFit RgLmmFit;

// A metric value. `has_value` is false when the metric yields nothing;
// `defined` is false for conventional values on degenerate input.
typedef struct RgMetric {
  double value;
  bool has_value;
  bool defined;
} RgMetric;

// Test output; `effect_size` is NaN when the test has none.
typedef struct RgTestResult {
  double statistic;
  double df;
  double p_value;
  double effect_size;
} RgTestResult;

// Variance components and Nakagawa R-squared values.
typedef struct RgLmmSummary {
  size_t n_coef;
  double sigma_b2;
  double sigma_e2;
  double r2_marginal;
  double r2_conditional;
  double log_restricted_lik;
  bool converged;
} RgLmmSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t rg_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *rg_version(void);

// Character-level Levenshtein distance.
//
// # Safety
// `a` and `b` must be NUL-terminated strings; `out` must be writable.
enum RgStatus rg_levenshtein(const char *a, const char *b, size_t *out);

// Levenshtein distance divided by the longer length; 0 for two empty strings.
//
// # Safety
// As for [`rg_levenshtein`].
enum RgStatus rg_normalized_edit_distance(const char *a, const char *b, double *out);

// Creates an empty corpus.
struct RgCorpus *rg_corpus_new(void);

// Releases a corpus. Null is ignored.
//
// # Safety
// `corpus` must come from [`rg_corpus_new`] and not be used afterwards.
void rg_corpus_free(struct RgCorpus *corpus);

// Appends a production. `shape` and `amount` are 1..=3; `colour` is
// 0 orange, 1 blue, 2 green; `label` must be lowercase alphanumeric.
//
// # Safety
// `corpus` must be a live handle and `label` a NUL-terminated string.
enum RgStatus rg_corpus_push(struct RgCorpus *corpus,
                             uint8_t shape,
                             uint8_t colour,
                             uint8_t amount,
                             const char *label);

// Number of pairs in the corpus; 0 for null.
//
// # Safety
// `corpus` must be null or a live handle.
size_t rg_corpus_len(const struct RgCorpus *corpus);

// Computes one metric by name: topsim, synonymy, homonymy, freedom,
// ngramDiversity, ratioUniLabels, meanWordLength, or genScore (which needs
// `novel`, a corpus over meanings absent from `corpus`; otherwise it may
// be null).
//
// # Safety
// `corpus` must be a live handle, `novel` null or a live handle, `name` a
// NUL-terminated string and `out` writable.
enum RgStatus rg_corpus_metric(const struct RgCorpus *corpus,
                               const struct RgCorpus *novel,
                               const char *name,
                               struct RgMetric *out);

// Paired t-test of `a` against `b` (equal lengths).
//
// # Safety
// `a`/`b` must point to `na`/`nb` doubles and `out` be writable.
enum RgStatus rg_paired_ttest(const double *a,
                              size_t na,
                              const double *b,
                              size_t nb,
                              struct RgTestResult *out);

// Welch two-sample t-test.
//
// # Safety
// As for [`rg_paired_ttest`].
enum RgStatus rg_welch_ttest(const double *a,
                             size_t na,
                             const double *b,
                             size_t nb,
                             struct RgTestResult *out);

// Pearson correlation test; `statistic` is r.
//
// # Safety
// As for [`rg_paired_ttest`].
enum RgStatus rg_pearson_test(const double *x,
                              size_t nx,
                              const double *y,
                              size_t ny,
                              struct RgTestResult *out);

// Fits `y = X b + u[group] + e` by REML. `x` is row-major `n` x `p` and
// should include an intercept column; `groups` holds one id per row.
//
// # Safety
// `y` must hold `n` doubles, `x` `n * p` doubles, `groups` `n` values and
// `out` must be writable. On success `*out` owns a handle.
enum RgStatus rg_lmm_fit(const double *y,
                         const double *x,
                         size_t n,
                         size_t p,
                         const uint32_t *groups,
                         struct RgLmmFit **out);

// Releases a fit. Null is ignored.
//
// # Safety
// `fit` must come from [`rg_lmm_fit`] and not be used afterwards.
void rg_lmm_free(struct RgLmmFit *fit);

// Fixed effect `i`: estimate, standard error and Wald p-value. Null
// output pointers are skipped.
//
// # Safety
// `fit` must be a live handle; non-null outputs must be writable.
enum RgStatus rg_lmm_coef(const struct RgLmmFit *fit,
                          size_t i,
                          double *beta,
                          double *se,
                          double *p_value);

// # Safety
// `fit` must be a live handle and `out` writable.
enum RgStatus rg_lmm_summary(const struct RgLmmFit *fit, struct RgLmmSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFGAME_H */
