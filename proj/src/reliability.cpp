#include "cdfagg/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace cdfagg {

int rank_among(const std::vector<double>& values, double y, Rng& rng) {
    if (values.empty()) {
        throw std::invalid_argument("rank needs a non-empty value set");
    }
    if (!std::isfinite(y)) {
        throw std::invalid_argument("observation must be finite");
    }
    std::size_t below = 0, equal = 0;
    for (double v : values) {
        if (v < y) ++below;
        else if (v == y) ++equal;
    }
    const auto base = static_cast<int>(below) + 1;
    if (equal == 0) return base;
    return base + static_cast<int>(rng.uniform_int(0, equal));
}

int rank_of_observation(const StepwiseCdf& forecast, double y, Rng& rng) {
    return rank_among(forecast.locations(), y, rng);
}

std::vector<double> decile_values(const StepwiseCdf& forecast) {
    std::vector<double> out;
    out.reserve(9);
    for (int i = 1; i <= 9; ++i) {
        out.push_back(forecast.quantile(static_cast<double>(i) / 10.0));
    }
    return out;
}

std::uint64_t RankHistogram::n() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

RankHistogram build_histogram(const std::vector<int>& ranks, std::size_t k) {
    if (ranks.empty()) {
        throw std::invalid_argument("histogram needs at least one rank");
    }
    if (k < 1) {
        throw std::invalid_argument("histogram needs at least one bin");
    }
    RankHistogram hist;
    hist.counts.assign(k, 0);
    for (int r : ranks) {
        if (r < 1 || static_cast<std::size_t>(r) > k) {
            throw std::invalid_argument("rank outside 1..k");
        }
        ++hist.counts[static_cast<std::size_t>(r - 1)];
    }
    return hist;
}

std::vector<double> delta_vector(const RankHistogram& hist) {
    if (hist.k() == 0 || hist.n() == 0) {
        throw std::invalid_argument("histogram is empty");
    }
    const double n0 = static_cast<double>(hist.n()) / static_cast<double>(hist.k());
    const double root = std::sqrt(n0);
    std::vector<double> delta(hist.k());
    for (std::size_t i = 0; i < hist.k(); ++i) {
        delta[i] = (static_cast<double>(hist.counts[i]) - n0) / root;
    }
    return delta;
}

namespace {

double chi2_sf(double stat, double dof) {
    const boost::math::chi_squared_distribution<double> dist(dof);
    return boost::math::cdf(boost::math::complement(dist, stat));
}

bool has_small_counts(const RankHistogram& hist) {
    return static_cast<double>(hist.n()) / static_cast<double>(hist.k()) < 5.0;
}

void normalize(std::vector<double>& v) {
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (double& x : v) x /= norm;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

TestResult contrast_test(const std::vector<double>& contrast, const std::vector<double>& delta) {
    const double proj = dot(contrast, delta);
    TestResult out;
    out.stat = proj * proj;
    out.pvalue = chi2_sf(out.stat, 1.0);
    return out;
}

} // namespace

Chi2Result chi2_test(const RankHistogram& hist) {
    const std::vector<double> delta = delta_vector(hist);
    if (hist.k() < 2) {
        throw std::invalid_argument("chi-square test needs at least two bins");
    }
    // Squared components are summed in sorted order so the statistic is
    // bitwise invariant under permutations of the counts.
    std::vector<double> squares(delta.size());
    for (std::size_t i = 0; i < delta.size(); ++i) squares[i] = delta[i] * delta[i];
    std::sort(squares.begin(), squares.end());
    Chi2Result out;
    out.stat = std::accumulate(squares.begin(), squares.end(), 0.0);
    out.pvalue = chi2_sf(out.stat, static_cast<double>(hist.k() - 1));
    out.small_counts = has_small_counts(hist);
    return out;
}

JpBasis jp_basis(std::size_t k) {
    if (k < 4) {
        throw std::invalid_argument("contrast basis needs at least four bins");
    }
    const double dk = static_cast<double>(k);
    JpBasis basis;

    // Centered ramp: i - (k+1)/2 for i = 1..k.
    basis.slope.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        basis.slope[i] = static_cast<double>(i + 1) - (dk + 1.0) / 2.0;
    }
    normalize(basis.slope);

    // Centered squares of the ramp; orthogonal to the slope by symmetry,
    // projected out anyway to absorb rounding.
    basis.convexity.resize(k);
    double mean_sq = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double c = static_cast<double>(i + 1) - (dk + 1.0) / 2.0;
        basis.convexity[i] = c * c;
        mean_sq += c * c / dk;
    }
    for (double& v : basis.convexity) v -= mean_sq;
    const double conv_on_slope = dot(basis.convexity, basis.slope);
    for (std::size_t i = 0; i < k; ++i) basis.convexity[i] -= conv_on_slope * basis.slope[i];
    normalize(basis.convexity);

    // One sine period vanishing at both ends, orthogonalized against the
    // constant direction and the slope.
    basis.wave.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        basis.wave[i] = std::sin(2.0 * M_PI * static_cast<double>(i) / (dk - 1.0));
    }
    basis.wave[k - 1] = 0.0;
    double mean_wave = std::accumulate(basis.wave.begin(), basis.wave.end(), 0.0) / dk;
    for (double& v : basis.wave) v -= mean_wave;
    const double wave_on_slope = dot(basis.wave, basis.slope);
    for (std::size_t i = 0; i < k; ++i) basis.wave[i] -= wave_on_slope * basis.slope[i];
    const double wave_on_conv = dot(basis.wave, basis.convexity);
    for (std::size_t i = 0; i < k; ++i) basis.wave[i] -= wave_on_conv * basis.convexity[i];
    normalize(basis.wave);

    return basis;
}

FlatnessReport jp_test(const RankHistogram& hist) {
    const JpBasis basis = jp_basis(hist.k());
    const std::vector<double> delta = delta_vector(hist);
    FlatnessReport report;
    report.chi2 = chi2_test(hist);
    report.slope = contrast_test(basis.slope, delta);
    report.convexity = contrast_test(basis.convexity, delta);
    report.wave = contrast_test(basis.wave, delta);
    report.small_counts = report.chi2.small_counts;
    return report;
}

std::vector<std::size_t> benjamini_hochberg(const std::vector<double>& pvalues, double alpha) {
    if (!(alpha > 0.0) || alpha >= 1.0) {
        throw std::invalid_argument("alpha must lie in (0, 1)");
    }
    const std::size_t m = pvalues.size();
    if (m == 0) return {};
    for (double p : pvalues) {
        if (!(p >= 0.0) || p > 1.0) {
            throw std::invalid_argument("p-values must lie in [0, 1]");
        }
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });
    std::size_t cutoff = 0; // number of rejected ranks
    for (std::size_t i = m; i >= 1; --i) {
        if (pvalues[order[i - 1]] <= alpha * static_cast<double>(i) / static_cast<double>(m)) {
            cutoff = i;
            break;
        }
    }
    std::vector<std::size_t> rejected(order.begin(), order.begin() + static_cast<long>(cutoff));
    std::sort(rejected.begin(), rejected.end());
    return rejected;
}

FlatProportionResult flat_proportion(const std::vector<RankHistogram>& histograms, double alpha) {
    if (histograms.empty()) {
        throw std::invalid_argument("flat proportion needs at least one histogram");
    }
    FlatProportionResult out;
    out.reports.reserve(histograms.size());
    std::vector<double> pooled;
    pooled.reserve(3 * histograms.size());
    for (const RankHistogram& hist : histograms) {
        FlatnessReport report = jp_test(hist);
        pooled.push_back(report.slope.pvalue);
        pooled.push_back(report.convexity.pvalue);
        pooled.push_back(report.wave.pvalue);
        out.reports.push_back(std::move(report));
    }
    const std::vector<std::size_t> rejected = benjamini_hochberg(pooled, alpha);
    std::vector<bool> any_rejected(histograms.size(), false);
    for (std::size_t idx : rejected) any_rejected[idx / 3] = true;
    std::size_t flat = 0;
    for (std::size_t i = 0; i < histograms.size(); ++i) {
        out.reports[i].flat = !any_rejected[i];
        if (!any_rejected[i]) ++flat;
    }
    out.proportion = static_cast<double>(flat) / static_cast<double>(histograms.size());
    return out;
}

} // namespace cdfagg
