#include "cdfagg/experts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace cdfagg {

namespace {

const boost::math::normal_distribution<double> kUnitNormal{};

double phi_cdf(double z) { return boost::math::cdf(kUnitNormal, z); }
double phi_quantile(double p) { return boost::math::quantile(kUnitNormal, p); }

void require_truncnorm_args(double mu, double sigma) {
    if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma <= 0.0) {
        throw std::invalid_argument("truncated normal needs finite mu and sigma > 0");
    }
}

} // namespace

double truncnorm_cdf(double x, double mu, double sigma) {
    require_truncnorm_args(mu, sigma);
    if (x < 0.0) return 0.0;
    const double base = phi_cdf(-mu / sigma);
    return (phi_cdf((x - mu) / sigma) - base) / (1.0 - base);
}

double truncnorm_quantile(double tau, double mu, double sigma) {
    require_truncnorm_args(mu, sigma);
    if (!(tau > 0.0) || !(tau < 1.0)) {
        throw std::invalid_argument("quantile order must lie in (0, 1)");
    }
    const double base = phi_cdf(-mu / sigma);
    return mu + sigma * phi_quantile(base + tau * (1.0 - base));
}

SqrtStats sqrt_stats(const std::vector<double>& members) {
    if (members.empty()) {
        throw std::invalid_argument("ensemble is empty");
    }
    SqrtStats out;
    for (double v : members) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument("members must be finite and non-negative");
        }
        out.mean += std::sqrt(v);
    }
    out.mean /= static_cast<double>(members.size());
    double var = 0.0;
    for (double v : members) {
        const double d = std::sqrt(v) - out.mean;
        var += d * d;
    }
    out.sd = std::sqrt(var / static_cast<double>(members.size()));
    return out;
}

namespace {

constexpr double kMinVariance = 1e-8;
constexpr int kMaxIterations = 2000;
constexpr double kRelFTol = 1e-10;
constexpr std::size_t kMinTrainingDays = 8;

double nr_negloglik(const NrParams& p, const std::vector<NrTrainingDay>& training) {
    double nll = 0.0;
    for (const NrTrainingDay& day : training) {
        const double z = std::sqrt(day.y);
        const double mu = p.a + p.b * day.mean_sqrt;
        const double var = std::max(p.c * p.c + p.d * p.d * day.sd_sqrt, kMinVariance);
        const double s = std::sqrt(var);
        const double mass = 1.0 - phi_cdf(-mu / s); // P(Z >= 0) before truncation
        if (!(mass > 0.0)) return 1e100;
        const double resid = (z - mu) / s;
        nll += 0.5 * resid * resid + std::log(s) + 0.5 * std::log(2.0 * M_PI) + std::log(mass);
    }
    return std::isfinite(nll) ? nll : 1e100;
}

// Nelder-Mead on four parameters; keeps the incumbent best, so the
// reported objective never worsens across iterations.
struct SimplexResult {
    std::array<double, 4> x;
    double f = 0.0;
    bool converged = false;
    int iterations = 0;
};

template <typename F>
SimplexResult nelder_mead(F&& objective, std::array<double, 4> start) {
    constexpr std::size_t dim = 4;
    std::array<std::array<double, 4>, dim + 1> pts;
    std::array<double, dim + 1> fv;
    pts[0] = start;
    for (std::size_t i = 0; i < dim; ++i) {
        pts[i + 1] = start;
        const double step = 0.1 * std::abs(start[i]) + 0.05;
        pts[i + 1][i] += step;
    }
    for (std::size_t i = 0; i <= dim; ++i) fv[i] = objective(pts[i]);

    SimplexResult out;
    auto order = [&] {
        std::array<std::size_t, dim + 1> idx{};
        for (std::size_t i = 0; i <= dim; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::array<std::array<double, 4>, dim + 1> p2;
        std::array<double, dim + 1> f2;
        for (std::size_t i = 0; i <= dim; ++i) {
            p2[i] = pts[idx[i]];
            f2[i] = fv[idx[i]];
        }
        pts = p2;
        fv = f2;
    };

    int iter = 0;
    for (; iter < kMaxIterations; ++iter) {
        order();
        if (fv[dim] - fv[0] <= kRelFTol * (std::abs(fv[0]) + kRelFTol)) {
            out.converged = true;
            break;
        }
        std::array<double, 4> centroid{};
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = 0; j < dim; ++j) centroid[j] += pts[i][j] / dim;
        }
        auto blend = [&](double coeff) {
            std::array<double, 4> p;
            for (std::size_t j = 0; j < dim; ++j) {
                p[j] = centroid[j] + coeff * (pts[dim][j] - centroid[j]);
            }
            return p;
        };
        const std::array<double, 4> reflected = blend(-1.0);
        const double fr = objective(reflected);
        if (fr < fv[0]) {
            const std::array<double, 4> expanded = blend(-2.0);
            const double fe = objective(expanded);
            if (fe < fr) {
                pts[dim] = expanded;
                fv[dim] = fe;
            } else {
                pts[dim] = reflected;
                fv[dim] = fr;
            }
        } else if (fr < fv[dim - 1]) {
            pts[dim] = reflected;
            fv[dim] = fr;
        } else {
            const std::array<double, 4> contracted = blend(fr < fv[dim] ? -0.5 : 0.5);
            const double fc = objective(contracted);
            if (fc < std::min(fr, fv[dim])) {
                pts[dim] = contracted;
                fv[dim] = fc;
            } else {
                // Shrink toward the best vertex.
                for (std::size_t i = 1; i <= dim; ++i) {
                    for (std::size_t j = 0; j < dim; ++j) {
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    }
                    fv[i] = objective(pts[i]);
                }
            }
        }
    }
    order();
    out.x = pts[0];
    out.f = fv[0];
    out.iterations = iter;
    return out;
}

} // namespace

NrFitResult nr_fit(const std::vector<NrTrainingDay>& training) {
    if (training.size() < kMinTrainingDays) {
        throw std::invalid_argument("regression needs at least eight training days");
    }
    for (const NrTrainingDay& day : training) {
        if (!std::isfinite(day.y) || day.y < 0.0 || !std::isfinite(day.mean_sqrt) ||
            !std::isfinite(day.sd_sqrt) || day.sd_sqrt < 0.0) {
            throw std::invalid_argument("training days must be finite with y >= 0 and sd >= 0");
        }
    }

    double resid_mean = 0.0;
    for (const NrTrainingDay& day : training) {
        resid_mean += std::sqrt(day.y) - day.mean_sqrt;
    }
    resid_mean /= static_cast<double>(training.size());
    double resid_var = 0.0;
    for (const NrTrainingDay& day : training) {
        const double d = std::sqrt(day.y) - day.mean_sqrt - resid_mean;
        resid_var += d * d;
    }
    resid_var /= static_cast<double>(training.size());
    const double start_c = std::max(std::sqrt(resid_var), 1e-3);

    auto objective = [&](const std::array<double, 4>& x) {
        return nr_negloglik(NrParams{x[0], x[1], x[2], x[3]}, training);
    };
    const SimplexResult best = nelder_mead(objective, {0.0, 1.0, start_c, 0.1});

    NrFitResult out;
    out.params = NrParams{best.x[0], best.x[1], best.x[2], best.x[3]};
    out.loglik = -best.f;
    out.converged = best.converged;
    out.iterations = best.iterations;
    return out;
}

const std::vector<double>& nr_orders() {
    static const std::vector<double> orders = [] {
        std::vector<double> o;
        o.push_back(0.0);
        for (int i = 1; i <= 99; ++i) o.push_back(static_cast<double>(i) / 100.0);
        o.push_back(0.999);
        return o;
    }();
    return orders;
}

StepwiseCdf nr_forecast(const NrParams& params, double mean_sqrt, double sd_sqrt) {
    if (!std::isfinite(mean_sqrt) || !std::isfinite(sd_sqrt) || sd_sqrt < 0.0) {
        throw std::invalid_argument("forecast stats must be finite with sd >= 0");
    }
    const double mu = params.a + params.b * mean_sqrt;
    const double var = std::max(params.c * params.c + params.d * params.d * sd_sqrt, kMinVariance);
    const double s = std::sqrt(var);
    const std::vector<double>& orders = nr_orders();
    std::vector<double> values;
    values.reserve(orders.size());
    for (double tau : orders) {
        if (tau == 0.0) {
            values.push_back(0.0); // truncation point
        } else {
            const double q = truncnorm_quantile(tau, mu, s);
            values.push_back(q * q);
        }
    }
    return StepwiseCdf::from_quantiles(std::move(values), orders);
}

} // namespace cdfagg
