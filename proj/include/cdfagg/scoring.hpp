#pragma once

#include <optional>
#include <vector>

#include "cdfagg/stepwise_cdf.hpp"

namespace cdfagg {

// Trailing window of past days. At day t a window of length W covers days
// max(1, t-W) .. t-1; the all-past window covers 1 .. t-1.
class Window {
public:
    static Window all_past() { return Window(kAllPast); }
    static Window days(int w);

    bool is_all_past() const { return days_ == kAllPast; }
    // Number of days covered at day t (t >= 1).
    int span_at(int t) const;
    // First covered day at day t; the window is [first_at(t), t-1].
    int first_at(int t) const;
    int raw_days() const { return days_; }

    bool operator==(const Window&) const = default;

private:
    static constexpr int kAllPast = -1;
    explicit Window(int days) : days_(days) {}
    int days_;
};

// Per-day losses with prefix sums for O(1) window statistics.
class ScoreSeries {
public:
    ScoreSeries() = default;
    explicit ScoreSeries(std::vector<double> losses);

    void push_back(double loss);

    std::size_t size() const { return losses_.size(); }
    const std::vector<double>& losses() const { return losses_; }
    double loss_at(int t) const { return losses_.at(static_cast<std::size_t>(t - 1)); }
    // Running total through day t.
    double cumulative_at(int t) const { return prefix_.at(static_cast<std::size_t>(t)); }
    double total() const { return prefix_.back(); }

    // Sum over the window preceding day t (empty window sums to 0).
    double window_sum(int t, Window window) const;
    // Mean over the window preceding day t; empty for t = 1.
    std::optional<double> window_mean(int t, Window window) const;

private:
    std::vector<double> losses_;
    std::vector<double> prefix_{0.0}; // prefix_[i] = sum of first i losses
};

// Mean over the W days before day t of a generic per-day series
// (1-based t). Empty window yields nullopt, the uniform-weights sentinel.
std::optional<double> windowed_mean(const std::vector<double>& series, int t, Window window);

// Exact CRPS of a step CDF against observation y: the integral of
// (F - H_y)^2, evaluated through the kernel identity
//   sum_m p_m |x_m - y| - 1/2 sum_{m,m'} p_m p_m' |x_m - x_m'|.
// Restricted to sample-provenance CDFs, where it coincides with the
// ensemble estimator (1/M) sum |x_i - y| - 1/(2 M^2) sum |x_i - x_j|.
double crps_int(const StepwiseCdf& forecast, double y);

// Fair (probability-weighted-moment) estimator for quantile forecasts:
//   (1/M) sum |x_i - y| - 1/(2 M (M-1)) sum_{i,j} |x_i - x_j|
// over the step locations. May be negative; returned as computed.
double crps_pwm(const StepwiseCdf& forecast, double y);

// Closed-form CRPS of the convex combination sum_e w_e F_e without
// materializing the mixture:
//   sum_e w_e sum_m p_em (x_em + |x_em - y|)
//   - 1/2 sum_{e,e'} w_e w_e' sum_{m,m'} p p' (x + x' + |x - x'|).
double crps_exact(const std::vector<const StepwiseCdf*>& experts,
                  const std::vector<double>& weights, double y);
double crps_exact(const std::vector<StepwiseCdf>& experts,
                  const std::vector<double>& weights, double y);

// Partial derivatives of the mixture CRPS with respect to the weights,
// valid on the simplex:
//   d CRPS / d w_e = sum_m p_em |x_em - y|
//                    - sum_e' w_e' sum_m' p' x'
//                    - sum_e' w_e' sum_{m,m'} p p' |x_em - x_e'm'|.
std::vector<double> crps_gradient(const std::vector<const StepwiseCdf*>& experts,
                                  const std::vector<double>& weights, double y);
std::vector<double> crps_gradient(const std::vector<StepwiseCdf>& experts,
                                  const std::vector<double>& weights, double y);

// Reliability / resolution / uncertainty split of a mean CRPS.
// mean_crps = reli - res + unc holds within 1e-10 by construction.
struct CrpsDecomposition {
    double mean_crps = 0.0;
    double reli = 0.0;
    double res = 0.0;
    double unc = 0.0;
};

// Alpha/beta interval accumulation over a forecast/observation series.
// Every forecast must have the same number of step locations M; the
// locations act as the ordered member set. For each of the M+1 intervals
// the mean widths g_i and frequencies o_i give
//   reli = sum g_i (o_i - i/M)^2,   potential = sum g_i o_i (1 - o_i),
// unc is the CRPS of the observation ECDF, and res = unc - potential.
CrpsDecomposition hersbach_decompose(const std::vector<StepwiseCdf>& forecasts,
                                     const std::vector<double>& observations);

} // namespace cdfagg
