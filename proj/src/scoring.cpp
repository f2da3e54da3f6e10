#include "cdfagg/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdfagg {

Window Window::days(int w) {
    if (w < 1) {
        throw std::invalid_argument("window length must be >= 1");
    }
    return Window(w);
}

int Window::first_at(int t) const {
    if (is_all_past()) return 1;
    return std::max(1, t - days_);
}

int Window::span_at(int t) const {
    return std::max(0, t - first_at(t));
}

ScoreSeries::ScoreSeries(std::vector<double> losses) {
    for (double loss : losses) push_back(loss);
}

void ScoreSeries::push_back(double loss) {
    losses_.push_back(loss);
    prefix_.push_back(prefix_.back() + loss);
}

double ScoreSeries::window_sum(int t, Window window) const {
    if (t < 1 || static_cast<std::size_t>(t) > losses_.size() + 1) {
        throw std::invalid_argument("day index outside the series");
    }
    const int first = window.first_at(t);
    return prefix_[static_cast<std::size_t>(t - 1)] - prefix_[static_cast<std::size_t>(first - 1)];
}

std::optional<double> ScoreSeries::window_mean(int t, Window window) const {
    const int span = window.span_at(t);
    if (span == 0) return std::nullopt;
    return window_sum(t, window) / span;
}

std::optional<double> windowed_mean(const std::vector<double>& series, int t, Window window) {
    if (t < 1 || static_cast<std::size_t>(t) > series.size() + 1) {
        throw std::invalid_argument("day index outside the series");
    }
    const int first = window.first_at(t);
    if (first >= t) return std::nullopt;
    double sum = 0.0;
    for (int s = first; s < t; ++s) sum += series[static_cast<std::size_t>(s - 1)];
    return sum / (t - first);
}

namespace {

void require_finite_obs(double y) {
    if (!std::isfinite(y)) {
        throw std::invalid_argument("observation must be finite");
    }
}

// sum_i w_i |x_i - y| over sorted locations.
double weighted_abs_dev(const std::vector<double>& x, const std::vector<double>& w, double y) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += w[i] * std::abs(x[i] - y);
    return sum;
}

// sum_{i,j} w_i w_j |x_i - x_j| over sorted locations, in linear time via
// prefix sums: each ordered pair (j < i) contributes twice.
double weighted_pair_dist(const std::vector<double>& x, const std::vector<double>& w) {
    double sum = 0.0;
    double wsum = 0.0;  // total weight below i
    double wxsum = 0.0; // weighted location sum below i
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += 2.0 * w[i] * (x[i] * wsum - wxsum);
        wsum += w[i];
        wxsum += w[i] * x[i];
    }
    return sum;
}

} // namespace

double crps_int(const StepwiseCdf& forecast, double y) {
    require_finite_obs(y);
    if (forecast.provenance() != Provenance::RandomSample) {
        throw std::invalid_argument("crps_int requires a sample-built forecast");
    }
    return weighted_abs_dev(forecast.locations(), forecast.weights(), y) -
           0.5 * weighted_pair_dist(forecast.locations(), forecast.weights());
}

double crps_pwm(const StepwiseCdf& forecast, double y) {
    require_finite_obs(y);
    if (forecast.provenance() != Provenance::QuantileSet) {
        throw std::invalid_argument("crps_pwm requires a quantile-built forecast");
    }
    const std::vector<double>& x = forecast.locations();
    const std::size_t m = x.size();
    if (m < 2) {
        throw std::invalid_argument("crps_pwm requires at least two quantiles");
    }
    double abs_dev = 0.0;
    for (double xi : x) abs_dev += std::abs(xi - y);
    double pair_dist = 0.0; // sum over ordered pairs, doubled
    double xsum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        pair_dist += 2.0 * (x[i] * static_cast<double>(i) - xsum);
        xsum += x[i];
    }
    const double dm = static_cast<double>(m);
    return abs_dev / dm - pair_dist / (2.0 * dm * (dm - 1.0));
}

double crps_exact(const std::vector<const StepwiseCdf*>& experts,
                  const std::vector<double>& weights, double y) {
    require_finite_obs(y);
    if (experts.empty() || experts.size() != weights.size()) {
        throw std::invalid_argument("experts and weights differ in length");
    }
    const std::vector<double> w = normalize_simplex(weights);

    double first = 0.0;
    for (std::size_t e = 0; e < experts.size(); ++e) {
        const StepwiseCdf& f = *experts[e];
        double inner = 0.0;
        for (std::size_t m = 0; m < f.size(); ++m) {
            inner += f.weights()[m] * (f.locations()[m] + std::abs(f.locations()[m] - y));
        }
        first += w[e] * inner;
    }

    double second = 0.0;
    for (std::size_t e = 0; e < experts.size(); ++e) {
        const StepwiseCdf& fe = *experts[e];
        for (std::size_t e2 = 0; e2 < experts.size(); ++e2) {
            const StepwiseCdf& f2 = *experts[e2];
            double inner = 0.0;
            for (std::size_t m = 0; m < fe.size(); ++m) {
                const double xm = fe.locations()[m];
                const double pm = fe.weights()[m];
                for (std::size_t m2 = 0; m2 < f2.size(); ++m2) {
                    inner += pm * f2.weights()[m2] *
                             (xm + f2.locations()[m2] + std::abs(xm - f2.locations()[m2]));
                }
            }
            second += w[e] * w[e2] * inner;
        }
    }
    return first - 0.5 * second;
}

double crps_exact(const std::vector<StepwiseCdf>& experts,
                  const std::vector<double>& weights, double y) {
    std::vector<const StepwiseCdf*> ptrs;
    ptrs.reserve(experts.size());
    for (const StepwiseCdf& e : experts) ptrs.push_back(&e);
    return crps_exact(ptrs, weights, y);
}

std::vector<double> crps_gradient(const std::vector<const StepwiseCdf*>& experts,
                                  const std::vector<double>& weights, double y) {
    require_finite_obs(y);
    if (experts.empty() || experts.size() != weights.size()) {
        throw std::invalid_argument("experts and weights differ in length");
    }
    const std::vector<double> w = normalize_simplex(weights);
    const std::size_t n = experts.size();

    // sum_e' w_e' sum_m' p' x', shared across components.
    double mean_loc = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
        const StepwiseCdf& f = *experts[e];
        double inner = 0.0;
        for (std::size_t m = 0; m < f.size(); ++m) {
            inner += f.weights()[m] * f.locations()[m];
        }
        mean_loc += w[e] * inner;
    }

    std::vector<double> grad(n);
    for (std::size_t e = 0; e < n; ++e) {
        const StepwiseCdf& fe = *experts[e];
        double abs_dev = 0.0;
        for (std::size_t m = 0; m < fe.size(); ++m) {
            abs_dev += fe.weights()[m] * std::abs(fe.locations()[m] - y);
        }
        double cross = 0.0;
        for (std::size_t e2 = 0; e2 < n; ++e2) {
            const StepwiseCdf& f2 = *experts[e2];
            double inner = 0.0;
            for (std::size_t m = 0; m < fe.size(); ++m) {
                const double xm = fe.locations()[m];
                const double pm = fe.weights()[m];
                for (std::size_t m2 = 0; m2 < f2.size(); ++m2) {
                    inner += pm * f2.weights()[m2] * std::abs(xm - f2.locations()[m2]);
                }
            }
            cross += w[e2] * inner;
        }
        grad[e] = abs_dev - mean_loc - cross;
    }
    return grad;
}

std::vector<double> crps_gradient(const std::vector<StepwiseCdf>& experts,
                                  const std::vector<double>& weights, double y) {
    std::vector<const StepwiseCdf*> ptrs;
    ptrs.reserve(experts.size());
    for (const StepwiseCdf& e : experts) ptrs.push_back(&e);
    return crps_gradient(ptrs, weights, y);
}

CrpsDecomposition hersbach_decompose(const std::vector<StepwiseCdf>& forecasts,
                                     const std::vector<double>& observations) {
    if (forecasts.empty()) {
        throw std::invalid_argument("decomposition needs a non-empty series");
    }
    if (forecasts.size() != observations.size()) {
        throw std::invalid_argument("forecasts and observations differ in length");
    }
    const std::size_t m = forecasts.front().size();
    for (const StepwiseCdf& f : forecasts) {
        if (f.size() != m) {
            throw std::invalid_argument("decomposition needs a constant member count");
        }
    }

    // Mean alpha/beta per interval i = 0..M: alpha covers the part of the
    // interval below the observation, beta the part above.
    const std::size_t bins = m + 1;
    std::vector<double> alpha(bins, 0.0), beta(bins, 0.0);
    const double inv_t = 1.0 / static_cast<double>(forecasts.size());
    for (std::size_t t = 0; t < forecasts.size(); ++t) {
        const std::vector<double>& x = forecasts[t].locations();
        const double y = observations[t];
        require_finite_obs(y);
        if (y < x.front()) beta[0] += (x.front() - y) * inv_t;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double lo = x[i], hi = x[i + 1];
            if (y <= lo) {
                beta[i + 1] += (hi - lo) * inv_t;
            } else if (y >= hi) {
                alpha[i + 1] += (hi - lo) * inv_t;
            } else {
                alpha[i + 1] += (y - lo) * inv_t;
                beta[i + 1] += (hi - y) * inv_t;
            }
        }
        if (y > x.back()) alpha[m] += (y - x.back()) * inv_t;
    }

    CrpsDecomposition out;
    double potential = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        const double g = alpha[i] + beta[i];
        const double p = static_cast<double>(i) / static_cast<double>(m);
        out.mean_crps += alpha[i] * p * p + beta[i] * (1.0 - p) * (1.0 - p);
        if (g > 0.0) {
            const double o = beta[i] / g;
            out.reli += g * (o - p) * (o - p);
            potential += g * o * (1.0 - o);
        }
    }

    // Uncertainty: CRPS of the observation ECDF against its own sample,
    // which reduces to half the mean absolute pairwise difference.
    std::vector<double> sorted_obs = observations;
    std::sort(sorted_obs.begin(), sorted_obs.end());
    double pair_sum = 0.0;
    double prefix = 0.0;
    for (std::size_t i = 0; i < sorted_obs.size(); ++i) {
        pair_sum += sorted_obs[i] * static_cast<double>(i) - prefix;
        prefix += sorted_obs[i];
    }
    const double n = static_cast<double>(sorted_obs.size());
    out.unc = pair_sum / (n * n);

    out.res = out.unc - potential;
    return out;
}

} // namespace cdfagg
