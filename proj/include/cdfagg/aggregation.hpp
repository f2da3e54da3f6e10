#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdfagg/panel.hpp"
#include "cdfagg/scoring.hpp"

namespace cdfagg {

enum class StrategyKind { Inv, Sharp, Min, Ewa, Grad };

std::string strategy_kind_name(StrategyKind kind);
StrategyKind parse_strategy_kind(const std::string& name);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::Ewa;
    Window window = Window::all_past();
    double eta = 1.0;            // Ewa and Grad
    double reli_threshold = 0.1; // Sharp
    void validate() const;
    std::string label() const; // filesystem-safe, deterministic
};

// Per-panel score caches shared by every strategy run on that panel:
// estimator losses (crps_int for sample experts, crps_pwm for quantile
// experts), 5%-95% quantile ranges, interval alpha/beta prefix sums for
// windowed reliability, and the per-day mixture terms
//   A[t][e]    = sum_m p |x - y_t|
//   X[t][e]    = sum_m p x
//   D[t][e,e'] = sum_{m,m'} p p' |x - x'|
// from which the mixture CRPS is w.A - w'Dw/2 and its gradient
// A_e - sum w X - sum w D_e, both O(E^2) per day.
class PanelScoring {
public:
    explicit PanelScoring(const ExpertPanel& panel);

    const ExpertPanel& panel() const { return *panel_; }
    int days() const { return days_; }
    std::size_t expert_count() const { return experts_; }

    double loss(int t, std::size_t e) const { return loss_[idx(t, e)]; }
    const ScoreSeries& expert_losses(std::size_t e) const { return loss_series_[e]; }

    // Mean estimator loss over the window before day t.
    std::optional<double> windowed_loss(int t, std::size_t e, Window window) const;
    // Sum of estimator losses over the window before day t.
    double windowed_loss_sum(int t, std::size_t e, Window window) const;
    // Mean 5%-95% quantile range over the window before day t.
    std::optional<double> windowed_iq90(int t, std::size_t e, Window window) const;
    // Reliability term of the alpha/beta decomposition over the window.
    std::optional<double> windowed_reli(int t, std::size_t e, Window window) const;

    // Mixture CRPS of weights w at day t.
    double mixture_loss(int t, const std::vector<double>& w) const;
    // Mixture CRPS gradient at day t, valid on the simplex.
    std::vector<double> mixture_gradient(int t, const std::vector<double>& w) const;

    // Per-day mixture terms A, X, D (see above), 1-based t.
    double a_term(int t, std::size_t e) const { return a_[idx(t, e)]; }
    double x_term(int t, std::size_t e) const { return x_[idx(t, e)]; }
    double d_term(int t, std::size_t e, std::size_t e2) const {
        return d_[(static_cast<std::size_t>(t - 1) * experts_ + e) * experts_ + e2];
    }

    // Largest observation or forecast location over the period.
    double value_bound() const { return value_bound_; }

private:
    std::size_t idx(int t, std::size_t e) const {
        return static_cast<std::size_t>(t - 1) * experts_ + e;
    }

    const ExpertPanel* panel_;
    int days_ = 0;
    std::size_t experts_ = 0;
    std::vector<double> loss_; // T x E
    std::vector<ScoreSeries> loss_series_;
    std::vector<double> iq90_prefix_;  // (T+1) x E
    std::vector<double> a_;            // T x E
    std::vector<double> x_;            // T x E
    std::vector<double> d_;            // T x E x E
    // Alpha/beta prefix sums per expert: (T+1) x (M_e + 1) each.
    std::vector<std::vector<double>> alpha_prefix_;
    std::vector<std::vector<double>> beta_prefix_;
    double value_bound_ = 0.0;
};

// --- strategy weight rules ------------------------------------------------

// Weights proportional to inverse mean CRPS; experts with zero mean CRPS
// split the full weight equally among themselves.
std::vector<double> inv_weights(const std::vector<double>& mean_losses);

// Index of the lowest mean CRPS, ties to the lowest index.
std::size_t min_select(const std::vector<double>& mean_losses);

// Among experts whose reliability term is below the threshold, the one
// with the smallest mean quantile range; when none qualifies, the lowest
// mean CRPS.
std::size_t sharp_select(const std::vector<double>& reli,
                         const std::vector<double>& mean_iq90,
                         const std::vector<double>& mean_losses, double reli_threshold);

// Softmax of -eta * cumulative loss, computed with a max shift.
std::vector<double> ewa_weights(const std::vector<double>& cumulative_losses, double eta);

// Softmax of -eta * cumulative gradient (the gradient-descent flavor of
// exponential weighting).
std::vector<double> grad_weights(const std::vector<double>& cumulative_gradients, double eta);

// --- aggregation runs -----------------------------------------------------

struct OracleBestExpert {
    std::size_t index = 0;
    double total_loss = 0.0;
};

struct OracleBestConstant {
    std::vector<double> weights;
    double total_loss = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct AggregationRun {
    StrategyConfig config;
    std::vector<std::vector<double>> weights; // per day, before observing it
    std::vector<StepwiseCdf> combined;        // per day, when requested
    ScoreSeries losses;                       // mixture CRPS per day
    // Filled by attach_oracles.
    std::optional<OracleBestExpert> best_expert;
    std::optional<OracleBestConstant> best_constant;
    std::vector<double> regret_best_expert;   // cumulative
    std::vector<double> regret_best_constant; // cumulative
};

// Causal strategy run over the panel: the weights for day t are computed
// from days before t only (uniform on day one), then scored against y_t.
AggregationRun run_aggregation(const PanelScoring& scoring, const StrategyConfig& config,
                               bool store_cdfs = true);
AggregationRun run_aggregation(const ExpertPanel& panel, const StrategyConfig& config);

struct BestConstantOptions {
    int max_iterations = 200000;
    double tolerance = 1e-8; // projected-gradient norm per day
};

// Expert with the lowest cumulative estimator loss, ties to the lowest
// index.
OracleBestExpert oracle_best_expert(const PanelScoring& scoring);

// Convex weights minimizing the cumulative mixture CRPS, found by
// accelerated projected gradient descent on the simplex. A result that
// exhausts max_iterations carries converged = false with the best
// iterate.
OracleBestConstant oracle_best_constant(const PanelScoring& scoring,
                                        const BestConstantOptions& options = {});

// Per-day losses of one fixed expert / fixed weight vector.
std::vector<double> expert_loss_series(const PanelScoring& scoring, std::size_t e);
std::vector<double> constant_weight_loss_series(const PanelScoring& scoring,
                                                const std::vector<double>& w);

// Cumulative regret of the run against an oracle's per-day losses.
std::vector<double> regret(const ScoreSeries& run_losses,
                           const std::vector<double>& oracle_losses);

// Computes both oracles and the regret series on the run.
void attach_oracles(AggregationRun& run, const PanelScoring& scoring,
                    const BestConstantOptions& options = {});

// Exponential-weighting regret bound ln(E)/eta + eta T B^2 / 8 for losses
// in [0, B]; with the all-past window the cumulative regret against the
// best expert stays below it for any data sequence.
double ewa_bound(std::size_t n_experts, int horizon, double eta, double loss_bound);

} // namespace cdfagg
