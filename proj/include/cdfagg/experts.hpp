#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cdfagg/panel.hpp"
#include "cdfagg/rng.hpp"

namespace cdfagg {

// CDF of a normal distribution truncated below at zero.
double truncnorm_cdf(double x, double mu, double sigma);

// Quantile of the truncated normal, tau in (0, 1):
//   mu + sigma * Phi^{-1}( Phi(-mu/sigma) + tau * (1 - Phi(-mu/sigma)) ).
double truncnorm_quantile(double tau, double mu, double sigma);

// Square-root-space ensemble statistics for one training or forecast
// day: mean and population standard deviation of sqrt(member values).
struct SqrtStats {
    double mean = 0.0;
    double sd = 0.0;
};

SqrtStats sqrt_stats(const std::vector<double>& members);

struct NrTrainingDay {
    double mean_sqrt = 0.0; // ensemble mean in square-root space
    double sd_sqrt = 0.0;   // ensemble sd in square-root space
    double y = 0.0;         // observed value (not square-rooted)
};

// Truncated-normal regression: sqrt(y) ~ N0(a + b * mean_sqrt,
// c^2 + d^2 * sd_sqrt), fitted by maximum likelihood.
struct NrParams {
    double a = 0.0;
    double b = 1.0;
    double c = 1.0;
    double d = 0.1;
};

struct NrFitResult {
    NrParams params;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Derivative-free simplex search on the likelihood, at most 2000
// iterations, relative function tolerance 1e-10, started from
// (0, 1, sd of square-root-space residuals, 0.1). Requires at least
// eight training days. Degenerate variances are clamped at 1e-8 inside
// the objective.
NrFitResult nr_fit(const std::vector<NrTrainingDay>& training);

// Forecast CDF for one day: squared quantiles of the fitted truncated
// normal at orders {0, 0.01, ..., 0.99, 0.999} (the order-0 quantile is
// the truncation point 0), assembled with from_quantiles.
StepwiseCdf nr_forecast(const NrParams& params, double mean_sqrt, double sd_sqrt);

// The quantile orders used by nr_forecast.
const std::vector<double>& nr_orders();

// --- synthetic scenarios -------------------------------------------------

// Observation processes. GaussianInfo: a daily latent signal with
// additive noise; each expert sees the signal through its own noisy
// channel and issues the exact conditional distribution of the
// observation given that channel, so undistorted experts are reliable by
// construction while sigma_info grades their sharpness.
// TruncNormalSquare: the observation is the square of a truncated
// normal around the latent signal (wind-like, keeps the truncated-normal
// regression well-specified); experts know the signal exactly.
enum class ObsFamily { GaussianInfo, TruncNormalSquare };

struct ExpertSpec {
    std::string name;
    ForecastKind kind = ForecastKind::Sample;
    int members = 20;            // sample forecasts
    std::vector<double> orders;  // quantile forecasts; empty = deciles
    double bias = 0.0;
    double dispersion = 1.0;
    double sigma_info = 0.0;     // GaussianInfo only
    // Values after the scenario switch day, when present.
    std::optional<double> bias_after;
    std::optional<double> dispersion_after;
};

struct ScenarioSpec {
    int days = 365;
    ObsFamily family = ObsFamily::TruncNormalSquare;
    double mu = 3.0;           // latent signal mean
    double sigma_signal = 1.0; // latent signal sd
    double sigma_noise = 1.0;  // observation noise sd
    int locations = 1;
    std::vector<int> lead_times = {24};
    std::optional<int> switch_day; // first day the *_after distortions apply
    std::vector<ExpertSpec> experts;
    std::string start_date = "2021-01-01";

    void validate() const;
};

// One panel per (location, lead time), bit-reproducible for a given
// (spec, seed) pair; each panel consumes an independent random stream.
std::vector<ExpertPanel> generate_scenario(const ScenarioSpec& spec, std::uint64_t seed);

// JSON codec for scenario specifications (the CLI config embeds one).
ScenarioSpec parse_scenario_json(const std::string& json_text);

} // namespace cdfagg
