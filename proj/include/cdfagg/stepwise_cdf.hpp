#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cdfagg {

// How a forecast distribution was produced. Sample CDFs carry equal mass
// per member (merged on ties); quantile CDFs carry mass equal to the gaps
// between the quantile orders. CRPS estimator choice keys off this.
enum class Provenance { RandomSample, QuantileSet };

// Tolerance on simplex weight vectors: drift up to kSimplexDrift is
// renormalized away on entry, anything worse is rejected.
inline constexpr double kSimplexDrift = 1e-9;
inline constexpr double kWeightSumTol = 1e-12;

// Validates a convex weight vector and returns the renormalized copy.
// Entries must be >= -kSimplexDrift and the sum within kSimplexDrift of 1.
std::vector<double> normalize_simplex(const std::vector<double>& weights);

// Replaces runs of equal values in a non-decreasing list with strictly
// increasing ones. Interior and leading runs are linearly interpolated
// toward the next distinct value; a trailing run extends upward by the
// smallest spacing between distinct input values; an all-equal input is
// spread symmetrically around its value with 1e-9 spacing.
std::vector<double> dedup_interpolate(const std::vector<double>& values);

// Right-continuous step CDF: jump of weight_[m] at location_[m].
// Invariants: locations strictly increasing, weights positive and summing
// to 1 within kWeightSumTol after construction.
class StepwiseCdf {
public:
    // Empirical CDF of a finite sample; ties merge into one step whose
    // weight is the tied count over the sample size.
    static StepwiseCdf from_sample(std::vector<double> values);

    // CDF through quantile values at strictly increasing orders in [0, 1].
    // Values must be non-decreasing; ties are resolved by
    // dedup_interpolate. Step weights are the successive order
    // differences (from zero), renormalized to sum to 1; a leading order
    // of exactly zero carries no mass and that step is dropped.
    static StepwiseCdf from_quantiles(std::vector<double> values,
                                      const std::vector<double>& orders);

    // P(X <= x).
    double evaluate(double x) const;

    // Smallest location whose cumulative weight reaches tau, tau in (0, 1].
    double quantile(double tau) const;

    std::size_t size() const { return locations_.size(); }
    const std::vector<double>& locations() const { return locations_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& cumulative() const { return cumulative_; }
    Provenance provenance() const { return provenance_; }

private:
    StepwiseCdf(std::vector<double> locations, std::vector<double> weights,
                Provenance provenance);

    friend StepwiseCdf convex_combine(const std::vector<const StepwiseCdf*>&,
                                      const std::vector<double>&);

    std::vector<double> locations_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    Provenance provenance_;
};

// Mixture sum_e weights[e] * cdfs[e] as a step CDF on the pooled
// locations; coincident locations merge by jump summation. The result is
// tagged RandomSample (mixtures are treated as sample-style CDFs).
StepwiseCdf convex_combine(const std::vector<const StepwiseCdf*>& cdfs,
                           const std::vector<double>& weights);

StepwiseCdf convex_combine(const std::vector<StepwiseCdf>& cdfs,
                           const std::vector<double>& weights);

// One verifying observation.
struct Observation {
    double value = 0.0;
    int t = 0;                 // 1-based day index within a panel
    std::string location_id;
    int lead_time_h = 0;
};

} // namespace cdfagg
