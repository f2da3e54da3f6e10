#include "cdfagg/stepwise_cdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cdfagg {

namespace {

void require_finite(const std::vector<double>& values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(what) + " must be finite");
        }
    }
}

} // namespace

std::vector<double> normalize_simplex(const std::vector<double>& weights) {
    if (weights.empty()) {
        throw std::invalid_argument("weight vector is empty");
    }
    double sum = 0.0;
    std::vector<double> out(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double w = weights[i];
        if (!std::isfinite(w) || w < -kSimplexDrift) {
            throw std::invalid_argument("weights must be non-negative");
        }
        out[i] = w < 0.0 ? 0.0 : w;
        sum += out[i];
    }
    if (std::abs(sum - 1.0) > kSimplexDrift) {
        throw std::invalid_argument("weights must sum to 1");
    }
    for (double& w : out) w /= sum;
    return out;
}

std::vector<double> dedup_interpolate(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n == 0) return {};
    require_finite(values, "values");
    for (std::size_t i = 1; i < n; ++i) {
        if (values[i] < values[i - 1]) {
            throw std::invalid_argument("values must be non-decreasing");
        }
    }
    if (values.front() == values.back()) {
        // All equal: spread symmetrically, preserving the mean.
        std::vector<double> out(n);
        const double center = values.front();
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = center + (static_cast<double>(i) - (n - 1) / 2.0) * 1e-9;
        }
        return out;
    }

    // Anchor the first occurrence of each distinct value, interpolate the
    // positions between consecutive anchors.
    std::vector<std::size_t> anchors;
    anchors.push_back(0);
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < n; ++i) {
        if (values[i] != values[i - 1]) {
            min_gap = std::min(min_gap, values[i] - values[anchors.back()]);
            anchors.push_back(i);
        }
    }
    std::vector<double> out(n);
    for (std::size_t a = 0; a + 1 < anchors.size(); ++a) {
        const std::size_t i0 = anchors[a], i1 = anchors[a + 1];
        const double v0 = values[i0], v1 = values[i1];
        for (std::size_t i = i0; i < i1; ++i) {
            const double frac = static_cast<double>(i - i0) / static_cast<double>(i1 - i0);
            out[i] = v0 + frac * (v1 - v0);
        }
    }
    // Trailing run extends upward by the smallest interior spacing.
    const std::size_t last = anchors.back();
    out[last] = values[last];
    for (std::size_t i = last + 1; i < n; ++i) {
        out[i] = values[last] + static_cast<double>(i - last) * min_gap;
    }
    return out;
}

StepwiseCdf::StepwiseCdf(std::vector<double> locations, std::vector<double> weights,
                         Provenance provenance)
    : locations_(std::move(locations)),
      weights_(std::move(weights)),
      provenance_(provenance) {
    cumulative_.resize(weights_.size());
    std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

StepwiseCdf StepwiseCdf::from_sample(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("sample is empty");
    }
    require_finite(values, "sample values");
    std::sort(values.begin(), values.end());
    const double unit = 1.0 / static_cast<double>(values.size());
    std::vector<double> locations;
    std::vector<double> weights;
    locations.reserve(values.size());
    weights.reserve(values.size());
    for (std::size_t i = 0; i < values.size();) {
        std::size_t j = i;
        while (j < values.size() && values[j] == values[i]) ++j;
        locations.push_back(values[i]);
        weights.push_back(static_cast<double>(j - i) * unit);
        i = j;
    }
    return StepwiseCdf(std::move(locations), std::move(weights), Provenance::RandomSample);
}

StepwiseCdf StepwiseCdf::from_quantiles(std::vector<double> values,
                                        const std::vector<double>& orders) {
    if (values.empty()) {
        throw std::invalid_argument("quantile set is empty");
    }
    if (values.size() != orders.size()) {
        throw std::invalid_argument("values and orders differ in length");
    }
    require_finite(values, "quantile values");
    for (std::size_t i = 0; i < orders.size(); ++i) {
        if (!std::isfinite(orders[i]) || orders[i] < 0.0 || orders[i] > 1.0) {
            throw std::invalid_argument("orders must lie in [0, 1]");
        }
        if (i > 0 && orders[i] <= orders[i - 1]) {
            throw std::invalid_argument("orders must be strictly increasing");
        }
    }
    values = dedup_interpolate(values);

    // Weight of the m-th quantile is the order gap it closes; the total
    // (the last order) renormalizes to 1. A first order of exactly zero
    // contributes no mass, so that step is dropped.
    std::vector<double> locations;
    std::vector<double> weights;
    locations.reserve(values.size());
    weights.reserve(values.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = orders[i] - prev;
        prev = orders[i];
        if (w > 0.0) {
            locations.push_back(values[i]);
            weights.push_back(w);
        }
    }
    const double total = orders.back();
    for (double& w : weights) w /= total;
    return StepwiseCdf(std::move(locations), std::move(weights), Provenance::QuantileSet);
}

double StepwiseCdf::evaluate(double x) const {
    if (std::isnan(x)) {
        throw std::invalid_argument("evaluation point is NaN");
    }
    const auto it = std::upper_bound(locations_.begin(), locations_.end(), x);
    if (it == locations_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(it - locations_.begin()) - 1];
}

double StepwiseCdf::quantile(double tau) const {
    if (!(tau > 0.0) || tau > 1.0) {
        throw std::invalid_argument("quantile order must lie in (0, 1]");
    }
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), tau);
    if (it == cumulative_.end()) return locations_.back();
    return locations_[static_cast<std::size_t>(it - cumulative_.begin())];
}

StepwiseCdf convex_combine(const std::vector<const StepwiseCdf*>& cdfs,
                           const std::vector<double>& weights) {
    if (cdfs.empty() || cdfs.size() != weights.size()) {
        throw std::invalid_argument("experts and weights differ in length");
    }
    const std::vector<double> w = normalize_simplex(weights);

    std::size_t total = 0;
    for (const StepwiseCdf* cdf : cdfs) total += cdf->size();
    std::vector<std::pair<double, double>> jumps;
    jumps.reserve(total);
    for (std::size_t e = 0; e < cdfs.size(); ++e) {
        const StepwiseCdf& cdf = *cdfs[e];
        for (std::size_t m = 0; m < cdf.size(); ++m) {
            jumps.emplace_back(cdf.locations()[m], w[e] * cdf.weights()[m]);
        }
    }
    std::sort(jumps.begin(), jumps.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> locations;
    std::vector<double> mass;
    locations.reserve(jumps.size());
    mass.reserve(jumps.size());
    for (std::size_t i = 0; i < jumps.size();) {
        std::size_t j = i;
        double m = 0.0;
        while (j < jumps.size() && jumps[j].first == jumps[i].first) {
            m += jumps[j].second;
            ++j;
        }
        if (m > 0.0) {
            locations.push_back(jumps[i].first);
            mass.push_back(m);
        }
        i = j;
    }
    if (locations.empty()) {
        throw std::invalid_argument("combined CDF has no mass");
    }
    return StepwiseCdf(std::move(locations), std::move(mass), Provenance::RandomSample);
}

StepwiseCdf convex_combine(const std::vector<StepwiseCdf>& cdfs,
                           const std::vector<double>& weights) {
    std::vector<const StepwiseCdf*> ptrs;
    ptrs.reserve(cdfs.size());
    for (const StepwiseCdf& cdf : cdfs) ptrs.push_back(&cdf);
    return convex_combine(ptrs, weights);
}

} // namespace cdfagg
