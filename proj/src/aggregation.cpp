#include "cdfagg/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>

namespace cdfagg {

std::string strategy_kind_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Inv: return "INV";
        case StrategyKind::Sharp: return "SHARP";
        case StrategyKind::Min: return "MIN";
        case StrategyKind::Ewa: return "EWA";
        case StrategyKind::Grad: return "GRAD";
    }
    throw std::invalid_argument("unknown strategy kind");
}

StrategyKind parse_strategy_kind(const std::string& name) {
    if (name == "INV") return StrategyKind::Inv;
    if (name == "SHARP") return StrategyKind::Sharp;
    if (name == "MIN") return StrategyKind::Min;
    if (name == "EWA") return StrategyKind::Ewa;
    if (name == "GRAD") return StrategyKind::Grad;
    throw std::invalid_argument("unknown strategy kind: " + name);
}

void StrategyConfig::validate() const {
    if ((kind == StrategyKind::Ewa || kind == StrategyKind::Grad) &&
        (!std::isfinite(eta) || eta <= 0.0)) {
        throw std::invalid_argument("learning rate must be positive");
    }
    if (kind == StrategyKind::Sharp && !(reli_threshold > 0.0)) {
        throw std::invalid_argument("reliability threshold must be positive");
    }
}

std::string StrategyConfig::label() const {
    std::string out = strategy_kind_name(kind);
    out += window.is_all_past() ? "_wall" : "_w" + std::to_string(window.raw_days());
    if (kind == StrategyKind::Ewa || kind == StrategyKind::Grad) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", eta);
        out += std::string("_eta") + buf;
    }
    return out;
}

PanelScoring::PanelScoring(const ExpertPanel& panel) : panel_(&panel) {
    panel.validate();
    days_ = panel.days();
    experts_ = panel.expert_count();
    const std::size_t t_count = static_cast<std::size_t>(days_);

    loss_.resize(t_count * experts_);
    a_.resize(t_count * experts_);
    x_.resize(t_count * experts_);
    d_.resize(t_count * experts_ * experts_);
    iq90_prefix_.assign((t_count + 1) * experts_, 0.0);
    loss_series_.resize(experts_);
    alpha_prefix_.resize(experts_);
    beta_prefix_.resize(experts_);
    // Reliability needs a constant step count per expert; experts whose
    // count varies keep empty prefixes and fail only on windowed_reli.
    for (std::size_t e = 0; e < experts_; ++e) {
        const std::size_t steps = panel.experts[e].days.front().cdf.size();
        bool constant = true;
        for (const Forecast& fc : panel.experts[e].days) {
            if (fc.cdf.size() != steps) {
                constant = false;
                break;
            }
        }
        if (constant) {
            alpha_prefix_[e].assign((t_count + 1) * (steps + 1), 0.0);
            beta_prefix_[e].assign((t_count + 1) * (steps + 1), 0.0);
        }
    }

    value_bound_ = -std::numeric_limits<double>::infinity();
    for (int t = 1; t <= days_; ++t) {
        const double y = panel.observations[static_cast<std::size_t>(t - 1)];
        value_bound_ = std::max(value_bound_, y);
        for (std::size_t e = 0; e < experts_; ++e) {
            const Forecast& fc = panel.experts[e].days[static_cast<std::size_t>(t - 1)];
            const StepwiseCdf& cdf = fc.cdf;
            value_bound_ = std::max(value_bound_, cdf.locations().back());

            const double loss = fc.kind == ForecastKind::Sample ? crps_int(cdf, y)
                                                                : crps_pwm(cdf, y);
            loss_[idx(t, e)] = loss;
            loss_series_[e].push_back(loss);

            double abs_dev = 0.0, mean_loc = 0.0;
            for (std::size_t m = 0; m < cdf.size(); ++m) {
                abs_dev += cdf.weights()[m] * std::abs(cdf.locations()[m] - y);
                mean_loc += cdf.weights()[m] * cdf.locations()[m];
            }
            a_[idx(t, e)] = abs_dev;
            x_[idx(t, e)] = mean_loc;

            iq90_prefix_[static_cast<std::size_t>(t) * experts_ + e] =
                iq90_prefix_[static_cast<std::size_t>(t - 1) * experts_ + e] +
                (cdf.quantile(0.95) - cdf.quantile(0.05));

            // Interval widths below/above the observation, accumulated
            // for windowed reliability terms.
            if (!alpha_prefix_[e].empty()) {
                const std::vector<double>& loc = cdf.locations();
                const std::size_t bins = loc.size() + 1;
                double* ap = alpha_prefix_[e].data() + static_cast<std::size_t>(t) * bins;
                double* bp = beta_prefix_[e].data() + static_cast<std::size_t>(t) * bins;
                const double* ap_prev =
                    alpha_prefix_[e].data() + static_cast<std::size_t>(t - 1) * bins;
                const double* bp_prev =
                    beta_prefix_[e].data() + static_cast<std::size_t>(t - 1) * bins;
                for (std::size_t i = 0; i < bins; ++i) {
                    ap[i] = ap_prev[i];
                    bp[i] = bp_prev[i];
                }
                if (y < loc.front()) bp[0] += loc.front() - y;
                for (std::size_t i = 0; i + 1 < loc.size(); ++i) {
                    const double lo = loc[i], hi = loc[i + 1];
                    if (y <= lo) {
                        bp[i + 1] += hi - lo;
                    } else if (y >= hi) {
                        ap[i + 1] += hi - lo;
                    } else {
                        ap[i + 1] += y - lo;
                        bp[i + 1] += hi - y;
                    }
                }
                if (y > loc.back()) ap[bins - 1] += y - loc.back();
            }
        }

        // Pairwise expected distances between expert CDFs.
        double* dt = d_.data() + static_cast<std::size_t>(t - 1) * experts_ * experts_;
        for (std::size_t e = 0; e < experts_; ++e) {
            const StepwiseCdf& fe = panel.experts[e].days[static_cast<std::size_t>(t - 1)].cdf;
            for (std::size_t e2 = e; e2 < experts_; ++e2) {
                const StepwiseCdf& f2 =
                    panel.experts[e2].days[static_cast<std::size_t>(t - 1)].cdf;
                double sum = 0.0;
                for (std::size_t m = 0; m < fe.size(); ++m) {
                    const double xm = fe.locations()[m];
                    const double pm = fe.weights()[m];
                    double inner = 0.0;
                    for (std::size_t m2 = 0; m2 < f2.size(); ++m2) {
                        inner += f2.weights()[m2] * std::abs(xm - f2.locations()[m2]);
                    }
                    sum += pm * inner;
                }
                dt[e * experts_ + e2] = sum;
                dt[e2 * experts_ + e] = sum;
            }
        }
    }
}

std::optional<double> PanelScoring::windowed_loss(int t, std::size_t e, Window window) const {
    return loss_series_[e].window_mean(t, window);
}

double PanelScoring::windowed_loss_sum(int t, std::size_t e, Window window) const {
    return loss_series_[e].window_sum(t, window);
}

std::optional<double> PanelScoring::windowed_iq90(int t, std::size_t e, Window window) const {
    const int first = window.first_at(t);
    if (first >= t) return std::nullopt;
    const double hi = iq90_prefix_[static_cast<std::size_t>(t - 1) * experts_ + e];
    const double lo = iq90_prefix_[static_cast<std::size_t>(first - 1) * experts_ + e];
    return (hi - lo) / (t - first);
}

std::optional<double> PanelScoring::windowed_reli(int t, std::size_t e, Window window) const {
    if (alpha_prefix_[e].empty()) {
        throw std::invalid_argument("expert " + panel_->experts[e].name +
                                    " changes step count over time");
    }
    const int first = window.first_at(t);
    if (first >= t) return std::nullopt;
    const double span = t - first;
    const std::size_t bins = panel_->experts[e].days.front().cdf.size() + 1;
    const double* ap = alpha_prefix_[e].data() + static_cast<std::size_t>(t - 1) * bins;
    const double* bp = beta_prefix_[e].data() + static_cast<std::size_t>(t - 1) * bins;
    const double* ap0 = alpha_prefix_[e].data() + static_cast<std::size_t>(first - 1) * bins;
    const double* bp0 = beta_prefix_[e].data() + static_cast<std::size_t>(first - 1) * bins;
    const double m = static_cast<double>(bins - 1);
    double reli = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        const double alpha = (ap[i] - ap0[i]) / span;
        const double beta = (bp[i] - bp0[i]) / span;
        const double g = alpha + beta;
        if (g > 0.0) {
            const double o = beta / g;
            const double p = static_cast<double>(i) / m;
            reli += g * (o - p) * (o - p);
        }
    }
    return reli;
}

double PanelScoring::mixture_loss(int t, const std::vector<double>& w) const {
    const double* at = a_.data() + static_cast<std::size_t>(t - 1) * experts_;
    const double* dt = d_.data() + static_cast<std::size_t>(t - 1) * experts_ * experts_;
    double linear = 0.0, quad = 0.0;
    for (std::size_t e = 0; e < experts_; ++e) {
        linear += w[e] * at[e];
        double row = 0.0;
        for (std::size_t e2 = 0; e2 < experts_; ++e2) {
            row += w[e2] * dt[e * experts_ + e2];
        }
        quad += w[e] * row;
    }
    return linear - 0.5 * quad;
}

std::vector<double> PanelScoring::mixture_gradient(int t, const std::vector<double>& w) const {
    const double* at = a_.data() + static_cast<std::size_t>(t - 1) * experts_;
    const double* xt = x_.data() + static_cast<std::size_t>(t - 1) * experts_;
    const double* dt = d_.data() + static_cast<std::size_t>(t - 1) * experts_ * experts_;
    double mean_loc = 0.0;
    for (std::size_t e = 0; e < experts_; ++e) mean_loc += w[e] * xt[e];
    std::vector<double> grad(experts_);
    for (std::size_t e = 0; e < experts_; ++e) {
        double cross = 0.0;
        for (std::size_t e2 = 0; e2 < experts_; ++e2) {
            cross += w[e2] * dt[e * experts_ + e2];
        }
        grad[e] = at[e] - mean_loc - cross;
    }
    return grad;
}

std::vector<double> inv_weights(const std::vector<double>& mean_losses) {
    if (mean_losses.empty()) {
        throw std::invalid_argument("mean losses are empty");
    }
    std::vector<double> w(mean_losses.size(), 0.0);
    std::size_t zeros = 0;
    for (double m : mean_losses) {
        if (!std::isfinite(m) || m < 0.0) {
            throw std::invalid_argument("mean losses must be finite and non-negative");
        }
        if (m == 0.0) ++zeros;
    }
    if (zeros > 0) {
        for (std::size_t e = 0; e < w.size(); ++e) {
            if (mean_losses[e] == 0.0) w[e] = 1.0 / static_cast<double>(zeros);
        }
        return w;
    }
    double sum = 0.0;
    for (std::size_t e = 0; e < w.size(); ++e) {
        w[e] = 1.0 / mean_losses[e];
        sum += w[e];
    }
    for (double& v : w) v /= sum;
    return w;
}

std::size_t min_select(const std::vector<double>& mean_losses) {
    if (mean_losses.empty()) {
        throw std::invalid_argument("mean losses are empty");
    }
    std::size_t best = 0;
    for (std::size_t e = 1; e < mean_losses.size(); ++e) {
        if (mean_losses[e] < mean_losses[best]) best = e;
    }
    return best;
}

std::size_t sharp_select(const std::vector<double>& reli,
                         const std::vector<double>& mean_iq90,
                         const std::vector<double>& mean_losses, double reli_threshold) {
    if (reli.size() != mean_iq90.size() || reli.size() != mean_losses.size() || reli.empty()) {
        throw std::invalid_argument("statistic vectors differ in length");
    }
    std::size_t best = reli.size();
    for (std::size_t e = 0; e < reli.size(); ++e) {
        if (reli[e] < reli_threshold &&
            (best == reli.size() || mean_iq90[e] < mean_iq90[best])) {
            best = e;
        }
    }
    if (best < reli.size()) return best;
    return min_select(mean_losses);
}

namespace {

std::vector<double> softmax_shifted(const std::vector<double>& scores, double eta) {
    if (scores.empty()) {
        throw std::invalid_argument("score vector is empty");
    }
    if (!std::isfinite(eta) || eta <= 0.0) {
        throw std::invalid_argument("learning rate must be positive");
    }
    const double lowest = *std::min_element(scores.begin(), scores.end());
    std::vector<double> w(scores.size());
    double sum = 0.0;
    for (std::size_t e = 0; e < scores.size(); ++e) {
        w[e] = std::exp(-eta * (scores[e] - lowest));
        sum += w[e];
    }
    for (double& v : w) v /= sum;
    return w;
}

} // namespace

std::vector<double> ewa_weights(const std::vector<double>& cumulative_losses, double eta) {
    return softmax_shifted(cumulative_losses, eta);
}

std::vector<double> grad_weights(const std::vector<double>& cumulative_gradients, double eta) {
    return softmax_shifted(cumulative_gradients, eta);
}

AggregationRun run_aggregation(const PanelScoring& scoring, const StrategyConfig& config,
                               bool store_cdfs) {
    config.validate();
    const int days = scoring.days();
    const std::size_t experts = scoring.expert_count();
    AggregationRun run;
    run.config = config;
    run.weights.reserve(static_cast<std::size_t>(days));
    if (store_cdfs) run.combined.reserve(static_cast<std::size_t>(days));

    // Cumulative mixture gradients recorded with the weights in use at
    // each past day; only the Grad strategy pays for them.
    std::vector<double> grad_prefix;
    if (config.kind == StrategyKind::Grad) {
        grad_prefix.assign(static_cast<std::size_t>(days + 1) * experts, 0.0);
    }
    const std::vector<double> uniform(experts, 1.0 / static_cast<double>(experts));

    for (int t = 1; t <= days; ++t) {
        std::vector<double> w;
        if (t == 1) {
            w = uniform;
        } else {
            switch (config.kind) {
                case StrategyKind::Inv: {
                    std::vector<double> means(experts);
                    for (std::size_t e = 0; e < experts; ++e) {
                        means[e] = *scoring.windowed_loss(t, e, config.window);
                    }
                    w = inv_weights(means);
                    break;
                }
                case StrategyKind::Min: {
                    std::vector<double> means(experts);
                    for (std::size_t e = 0; e < experts; ++e) {
                        means[e] = *scoring.windowed_loss(t, e, config.window);
                    }
                    w.assign(experts, 0.0);
                    w[min_select(means)] = 1.0;
                    break;
                }
                case StrategyKind::Sharp: {
                    std::vector<double> reli(experts), iq(experts), means(experts);
                    for (std::size_t e = 0; e < experts; ++e) {
                        reli[e] = *scoring.windowed_reli(t, e, config.window);
                        iq[e] = *scoring.windowed_iq90(t, e, config.window);
                        means[e] = *scoring.windowed_loss(t, e, config.window);
                    }
                    w.assign(experts, 0.0);
                    w[sharp_select(reli, iq, means, config.reli_threshold)] = 1.0;
                    break;
                }
                case StrategyKind::Ewa: {
                    std::vector<double> cum(experts);
                    for (std::size_t e = 0; e < experts; ++e) {
                        cum[e] = scoring.windowed_loss_sum(t, e, config.window);
                    }
                    w = ewa_weights(cum, config.eta);
                    break;
                }
                case StrategyKind::Grad: {
                    const int first = config.window.first_at(t);
                    std::vector<double> cum(experts);
                    const double* hi =
                        grad_prefix.data() + static_cast<std::size_t>(t - 1) * experts;
                    const double* lo =
                        grad_prefix.data() + static_cast<std::size_t>(first - 1) * experts;
                    for (std::size_t e = 0; e < experts; ++e) cum[e] = hi[e] - lo[e];
                    w = grad_weights(cum, config.eta);
                    break;
                }
            }
        }

        if (config.kind == StrategyKind::Grad) {
            const std::vector<double> grad = scoring.mixture_gradient(t, w);
            double* row = grad_prefix.data() + static_cast<std::size_t>(t) * experts;
            const double* prev = grad_prefix.data() + static_cast<std::size_t>(t - 1) * experts;
            for (std::size_t e = 0; e < experts; ++e) row[e] = prev[e] + grad[e];
        }

        run.losses.push_back(scoring.mixture_loss(t, w));
        if (store_cdfs) {
            run.combined.push_back(convex_combine(scoring.panel().cdfs_at(t), w));
        }
        run.weights.push_back(std::move(w));
    }
    return run;
}

AggregationRun run_aggregation(const ExpertPanel& panel, const StrategyConfig& config) {
    const PanelScoring scoring(panel);
    return run_aggregation(scoring, config);
}

OracleBestExpert oracle_best_expert(const PanelScoring& scoring) {
    OracleBestExpert out;
    out.total_loss = scoring.expert_losses(0).total();
    for (std::size_t e = 1; e < scoring.expert_count(); ++e) {
        const double total = scoring.expert_losses(e).total();
        if (total < out.total_loss) {
            out.total_loss = total;
            out.index = e;
        }
    }
    return out;
}

namespace {

// Euclidean projection onto the probability simplex.
std::vector<double> project_simplex(std::vector<double> v) {
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        cumsum += sorted[i];
        const double candidate = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (sorted[i] - candidate > 0.0) theta = candidate;
    }
    for (double& x : v) x = std::max(0.0, x - theta);
    return v;
}

} // namespace

OracleBestConstant oracle_best_constant(const PanelScoring& scoring,
                                        const BestConstantOptions& options) {
    const std::size_t n = scoring.expert_count();
    const int days = scoring.days();
    const double inv_days = 1.0 / static_cast<double>(days);

    // Mean-per-day objective F(w) = w.a - w'Qw/2, convex along simplex
    // directions, so the gradient-mapping tolerance is scale-free in the
    // day count.
    std::vector<double> a(n, 0.0);
    std::vector<double> q(n * n, 0.0);
    for (int t = 1; t <= days; ++t) {
        for (std::size_t e = 0; e < n; ++e) {
            a[e] += scoring.a_term(t, e);
            for (std::size_t e2 = 0; e2 < n; ++e2) {
                q[e * n + e2] += scoring.d_term(t, e, e2);
            }
        }
    }
    for (double& v : a) v *= inv_days;
    for (double& v : q) v *= inv_days;

    const auto objective = [&](const std::vector<double>& w) {
        double linear = 0.0, quad = 0.0;
        for (std::size_t e = 0; e < n; ++e) {
            linear += w[e] * a[e];
            double row = 0.0;
            for (std::size_t e2 = 0; e2 < n; ++e2) row += q[e * n + e2] * w[e2];
            quad += w[e] * row;
        }
        return linear - 0.5 * quad;
    };
    const auto gradient = [&](const std::vector<double>& w, std::vector<double>& g) {
        for (std::size_t e = 0; e < n; ++e) {
            double row = 0.0;
            for (std::size_t e2 = 0; e2 < n; ++e2) row += q[e * n + e2] * w[e2];
            g[e] = a[e] - row;
        }
    };

    // The Frobenius norm of Q bounds the curvature along the simplex.
    double lipschitz = 0.0;
    for (double v : q) lipschitz += v * v;
    lipschitz = std::sqrt(lipschitz);
    if (!(lipschitz > 0.0)) lipschitz = 1.0;
    const double step = 1.0 / lipschitz;

    OracleBestConstant out;
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> z = w, w_prev = w, g(n), trial(n);
    double theta = 1.0;
    double best_value = objective(w);
    out.weights = w;

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        gradient(w, g);
        for (std::size_t e = 0; e < n; ++e) trial[e] = w[e] - step * g[e];
        trial = project_simplex(std::move(trial));
        double mapping_sq = 0.0;
        for (std::size_t e = 0; e < n; ++e) {
            const double d = (w[e] - trial[e]) / step;
            mapping_sq += d * d;
        }
        if (std::sqrt(mapping_sq) <= options.tolerance) {
            out.converged = true;
            out.weights = w;
            break;
        }

        gradient(z, g);
        w_prev = w;
        for (std::size_t e = 0; e < n; ++e) trial[e] = z[e] - step * g[e];
        w = project_simplex(trial);

        const double value = objective(w);
        if (value < best_value) {
            best_value = value;
            out.weights = w;
        }
        if (value > objective(w_prev)) {
            // Restart the momentum when the objective backslides.
            theta = 1.0;
            z = w;
        } else {
            const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
            const double mix = (theta - 1.0) / theta_next;
            for (std::size_t e = 0; e < n; ++e) z[e] = w[e] + mix * (w[e] - w_prev[e]);
            theta = theta_next;
        }
        out.iterations = iter + 1;
    }

    out.weights = normalize_simplex(out.weights);
    double total = 0.0;
    for (int t = 1; t <= days; ++t) total += scoring.mixture_loss(t, out.weights);

    // Vertices are feasible candidates; keeping the best of them ensures
    // the constant oracle never loses to a single expert.
    for (std::size_t e = 0; e < n; ++e) {
        std::vector<double> vertex(n, 0.0);
        vertex[e] = 1.0;
        double vertex_total = 0.0;
        for (int t = 1; t <= days; ++t) vertex_total += scoring.mixture_loss(t, vertex);
        if (vertex_total < total) {
            total = vertex_total;
            out.weights = std::move(vertex);
        }
    }
    out.total_loss = total;
    return out;
}

std::vector<double> expert_loss_series(const PanelScoring& scoring, std::size_t e) {
    return scoring.expert_losses(e).losses();
}

std::vector<double> constant_weight_loss_series(const PanelScoring& scoring,
                                                const std::vector<double>& w) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(scoring.days()));
    const std::vector<double> norm = normalize_simplex(w);
    for (int t = 1; t <= scoring.days(); ++t) {
        out.push_back(scoring.mixture_loss(t, norm));
    }
    return out;
}

std::vector<double> regret(const ScoreSeries& run_losses,
                           const std::vector<double>& oracle_losses) {
    if (run_losses.size() != oracle_losses.size()) {
        throw std::invalid_argument("loss series differ in length");
    }
    std::vector<double> out(oracle_losses.size());
    double cum = 0.0;
    for (std::size_t i = 0; i < oracle_losses.size(); ++i) {
        cum += run_losses.losses()[i] - oracle_losses[i];
        out[i] = cum;
    }
    return out;
}

void attach_oracles(AggregationRun& run, const PanelScoring& scoring,
                    const BestConstantOptions& options) {
    run.best_expert = oracle_best_expert(scoring);
    run.best_constant = oracle_best_constant(scoring, options);
    run.regret_best_expert =
        regret(run.losses, expert_loss_series(scoring, run.best_expert->index));
    run.regret_best_constant =
        regret(run.losses, constant_weight_loss_series(scoring, run.best_constant->weights));
}

double ewa_bound(std::size_t n_experts, int horizon, double eta, double loss_bound) {
    if (n_experts < 1 || horizon < 1) {
        throw std::invalid_argument("bound needs at least one expert and one day");
    }
    if (!(eta > 0.0) || !(loss_bound >= 0.0)) {
        throw std::invalid_argument("bound needs eta > 0 and a non-negative loss bound");
    }
    return std::log(static_cast<double>(n_experts)) / eta +
           eta * static_cast<double>(horizon) * loss_bound * loss_bound / 8.0;
}

} // namespace cdfagg
