#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cdfagg/rng.hpp"
#include "cdfagg/stepwise_cdf.hpp"

namespace cdfagg {

// Rank of y among a set of forecast values: 1 + the number of values
// strictly below y, plus a uniform draw over the ranks made admissible by
// values exactly equal to y. Ranks run 1 .. values.size() + 1.
int rank_among(const std::vector<double>& values, double y, Rng& rng);

// Rank of the observation among the forecast's step locations
// (k = size + 1 bins).
int rank_of_observation(const StepwiseCdf& forecast, double y, Rng& rng);

// The nine deciles of a forecast CDF (orders 0.1 .. 0.9), the value set
// used to rank observations against post-processed or aggregated
// forecasts (k = 10 bins).
std::vector<double> decile_values(const StepwiseCdf& forecast);

struct RankHistogram {
    std::vector<std::uint64_t> counts;

    std::size_t k() const { return counts.size(); }
    std::uint64_t n() const;
};

RankHistogram build_histogram(const std::vector<int>& ranks, std::size_t k);

// Standardized departures (n_i - n/k) / sqrt(n/k).
std::vector<double> delta_vector(const RankHistogram& hist);

struct TestResult {
    double stat = 0.0;
    double pvalue = 1.0;
};

struct Chi2Result : TestResult {
    bool small_counts = false; // expected count per bin below 5
};

// Omnibus flatness test: |delta|^2 against chi-square with k-1 degrees of
// freedom. The statistic is invariant under permutations of the counts.
Chi2Result chi2_test(const RankHistogram& hist);

// Orthonormal contrasts, each orthogonal to the constant direction and to
// one another: a centered linear ramp (slope), centered squares
// (convexity), and one sine period vanishing at both ends, orthogonalized
// against the slope (wave). Require k >= 4.
struct JpBasis {
    std::vector<double> slope;
    std::vector<double> convexity;
    std::vector<double> wave;
};

JpBasis jp_basis(std::size_t k);

// Directional flatness tests: each statistic is the squared projection of
// the delta vector on a contrast, against chi-square with 1 degree of
// freedom, plus the omnibus chi-square test.
struct FlatnessReport {
    Chi2Result chi2;
    TestResult slope;
    TestResult convexity;
    TestResult wave;
    bool small_counts = false;
    // Set by batch procedures once the FDR correction has run: true when
    // no shape test on this histogram was rejected.
    std::optional<bool> flat;
};

FlatnessReport jp_test(const RankHistogram& hist);

// Benjamini-Hochberg step-up rule at level alpha. Returns the indices of
// rejected hypotheses, ascending.
std::vector<std::size_t> benjamini_hochberg(const std::vector<double>& pvalues, double alpha);

struct FlatProportionResult {
    double proportion = 0.0;
    std::vector<FlatnessReport> reports;  // one per histogram, flat filled
};

// Shape tests (slope, convexity, wave) for each histogram, with all
// 3 * histograms.size() p-values pooled into one Benjamini-Hochberg
// family at level alpha. A histogram is flat when none of its three
// tests is rejected; the proportion of flat histograms is returned.
FlatProportionResult flat_proportion(const std::vector<RankHistogram>& histograms, double alpha);

} // namespace cdfagg
