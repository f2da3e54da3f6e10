/* C interface to the forecast-aggregation library.
 *
 * Every function returns a status code; results leave through out
 * parameters. On failure cdfagg_last_error() describes the problem for
 * the calling thread. Handles are opaque; each *_free matches exactly
 * the constructors documented to hand over ownership.
 */
#ifndef CDFAGG_CDFAGG_H
#define CDFAGG_CDFAGG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cdfagg_status {
    CDFAGG_OK = 0,
    CDFAGG_INVALID_ARGUMENT = 1,
    CDFAGG_PARSE = 2,
    CDFAGG_IO = 3,
    CDFAGG_ALIGNMENT = 4,
    CDFAGG_NO_CONVERGENCE = 5,
    CDFAGG_INTERNAL = 6
} cdfagg_status;

/* Library version, "major.minor.patch". */
const char* cdfagg_version(void);

/* Message of the last failure on the calling thread; empty after a
 * success. The pointer stays valid until the next call on the thread. */
const char* cdfagg_last_error(void);

typedef struct cdfagg_cdf cdfagg_cdf;
typedef struct cdfagg_panel cdfagg_panel;
typedef struct cdfagg_panel_set cdfagg_panel_set;
typedef struct cdfagg_run cdfagg_run;

/* --- step CDFs --------------------------------------------------------- */

/* Empirical CDF of n sample values; caller owns *out. */
cdfagg_status cdfagg_cdf_from_sample(const double* values, size_t n, cdfagg_cdf** out);

/* CDF through n quantile values at strictly increasing orders in [0, 1];
 * caller owns *out. */
cdfagg_status cdfagg_cdf_from_quantiles(const double* values, const double* orders, size_t n,
                                        cdfagg_cdf** out);

/* Mixture of n CDFs with convex weights; caller owns *out. */
cdfagg_status cdfagg_cdf_combine(const cdfagg_cdf* const* cdfs, const double* weights, size_t n,
                                 cdfagg_cdf** out);

/* Step locations and jump weights; the pointers borrow from the handle
 * and stay valid until it is freed. */
cdfagg_status cdfagg_cdf_data(const cdfagg_cdf* cdf, const double** locations,
                              const double** weights, size_t* n);

/* P(X <= x). */
cdfagg_status cdfagg_cdf_evaluate(const cdfagg_cdf* cdf, double x, double* out);

/* Smallest location with cumulative weight >= tau, tau in (0, 1]. */
cdfagg_status cdfagg_cdf_quantile(const cdfagg_cdf* cdf, double tau, double* out);

void cdfagg_cdf_free(cdfagg_cdf* cdf);

/* --- scoring ----------------------------------------------------------- */

/* Exact CRPS of the step CDF against y (sample provenance only). */
cdfagg_status cdfagg_crps_int(const cdfagg_cdf* cdf, double y, double* out);

/* Fair quantile-forecast CRPS estimator (quantile provenance only). */
cdfagg_status cdfagg_crps_pwm(const cdfagg_cdf* cdf, double y, double* out);

/* CRPS of the weighted mixture of n CDFs without materializing it. */
cdfagg_status cdfagg_crps_exact(const cdfagg_cdf* const* cdfs, const double* weights, size_t n,
                                double y, double* out);

/* Gradient of the mixture CRPS in the weights; grad must hold n values. */
cdfagg_status cdfagg_crps_gradient(const cdfagg_cdf* const* cdfs, const double* weights,
                                   size_t n, double y, double* grad);

/* Regret bound ln(n)/eta + eta*horizon*loss_bound^2/8 of exponential
 * weighting over n experts with per-day losses in [0, loss_bound]. */
cdfagg_status cdfagg_ewa_bound(size_t n_experts, int horizon, double eta, double loss_bound,
                               double* out);

/* --- rank histograms and flatness tests -------------------------------- */

/* Omnibus chi-square flatness test of a k-bin rank histogram. */
cdfagg_status cdfagg_chi2_test(const uint64_t* counts, size_t k, double* stat, double* pvalue);

/* Chi-square plus the three directional tests (slope, convexity, wave).
 * stats and pvalues receive 4 values in that order; k >= 4. */
cdfagg_status cdfagg_jp_test(const uint64_t* counts, size_t k, double* stats, double* pvalues);

/* Benjamini-Hochberg step-up rule at level alpha; rejected receives a
 * 0/1 flag per hypothesis. */
cdfagg_status cdfagg_benjamini_hochberg(const double* pvalues, size_t n, double alpha,
                                        int* rejected);

/* --- truncated normal --------------------------------------------------- */

/* CDF at x of a normal(mu, sigma) truncated below at zero. */
cdfagg_status cdfagg_truncnorm_cdf(double x, double mu, double sigma, double* out);

/* Quantile at tau in (0, 1) of the truncated normal. */
cdfagg_status cdfagg_truncnorm_quantile(double tau, double mu, double sigma, double* out);

/* --- panels ------------------------------------------------------------- */

/* Loads aligned forecast/observation CSV files into one panel per
 * (location, lead time); caller owns *out. */
cdfagg_status cdfagg_panel_set_load(const char* forecasts_csv, const char* observations_csv,
                                    cdfagg_panel_set** out);

/* Generates panels from a scenario specification given as JSON text;
 * caller owns *out. */
cdfagg_status cdfagg_panel_set_from_scenario(const char* scenario_json, uint64_t seed,
                                             cdfagg_panel_set** out);

cdfagg_status cdfagg_panel_set_size(const cdfagg_panel_set* set, size_t* out);

/* Borrowed panel handle, valid until the set is freed. */
cdfagg_status cdfagg_panel_set_get(const cdfagg_panel_set* set, size_t index,
                                   const cdfagg_panel** out);

cdfagg_status cdfagg_panel_days(const cdfagg_panel* panel, int* out);
cdfagg_status cdfagg_panel_expert_count(const cdfagg_panel* panel, size_t* out);

/* Borrowed strings, valid until the owning set is freed. */
cdfagg_status cdfagg_panel_location(const cdfagg_panel* panel, const char** out);
cdfagg_status cdfagg_panel_lead_time(const cdfagg_panel* panel, int* out);
cdfagg_status cdfagg_panel_expert_name(const cdfagg_panel* panel, size_t e, const char** out);

/* Observation of day t (1-based). */
cdfagg_status cdfagg_panel_observation(const cdfagg_panel* panel, int t, double* out);

void cdfagg_panel_set_free(cdfagg_panel_set* set);

/* --- aggregation runs ---------------------------------------------------- */

/* Causal strategy run over one panel with both oracles attached. kind is
 * one of INV, SHARP, MIN, EWA, GRAD; window_days <= 0 selects the
 * all-past window; eta applies to EWA and GRAD; reli_threshold to SHARP.
 * Caller owns *out. */
cdfagg_status cdfagg_run_strategy(const cdfagg_panel* panel, const char* kind, int window_days,
                                  double eta, double reli_threshold, cdfagg_run** out);

cdfagg_status cdfagg_run_days(const cdfagg_run* run, int* out);

/* Weights used on day t (1-based); the pointer borrows from the run. */
cdfagg_status cdfagg_run_weights(const cdfagg_run* run, int t, const double** weights,
                                 size_t* n);

/* Mixture CRPS of day t, and the totals. */
cdfagg_status cdfagg_run_loss(const cdfagg_run* run, int t, double* out);
cdfagg_status cdfagg_run_total_loss(const cdfagg_run* run, double* out);

/* Cumulative regret through day t against each oracle. */
cdfagg_status cdfagg_run_regret_best_expert(const cdfagg_run* run, int t, double* out);
cdfagg_status cdfagg_run_regret_best_constant(const cdfagg_run* run, int t, double* out);

cdfagg_status cdfagg_run_best_expert(const cdfagg_run* run, size_t* index, double* total_loss);

/* converged reports whether the simplex search met its tolerance. */
cdfagg_status cdfagg_run_best_constant(const cdfagg_run* run, const double** weights, size_t* n,
                                       double* total_loss, int* converged);

/* Combined forecast CDF of day t as a fresh handle; caller owns *out. */
cdfagg_status cdfagg_run_combined(const cdfagg_run* run, int t, cdfagg_cdf** out);

void cdfagg_run_free(cdfagg_run* run);

/* --- pipeline ------------------------------------------------------------ */

/* Runs one pipeline subcommand (simulate, aggregate, verify, report)
 * against a JSON config file; overrides_json may carry seed, out and
 * jobs keys (NULL or "" for none). */
cdfagg_status cdfagg_pipeline(const char* subcommand, const char* config_path,
                              const char* overrides_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CDFAGG_CDFAGG_H */
