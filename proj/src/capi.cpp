#include "cdfagg/cdfagg.h"

#include <exception>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdfagg/aggregation.hpp"
#include "cdfagg/errors.hpp"
#include "cdfagg/experts.hpp"
#include "cdfagg/panel.hpp"
#include "cdfagg/pipeline.hpp"
#include "cdfagg/reliability.hpp"
#include "cdfagg/scoring.hpp"
#include "cdfagg/stepwise_cdf.hpp"

struct cdfagg_cdf {
    cdfagg::StepwiseCdf impl;
};

struct cdfagg_panel {
    const cdfagg::ExpertPanel* impl;
};

struct cdfagg_panel_set {
    std::vector<cdfagg::ExpertPanel> panels;
    std::vector<cdfagg_panel> views;
};

struct cdfagg_run {
    cdfagg::AggregationRun impl;
};

namespace {

thread_local std::string g_last_error;

void set_error(const char* message) { g_last_error = message; }

// Maps the library's exception taxonomy onto status codes; never lets an
// exception escape into C callers.
template <typename Fn>
cdfagg_status wrap(Fn&& fn) noexcept {
    try {
        fn();
        g_last_error.clear();
        return CDFAGG_OK;
    } catch (const cdfagg::parse_error& e) {
        set_error(e.what());
        return CDFAGG_PARSE;
    } catch (const cdfagg::io_error& e) {
        set_error(e.what());
        return CDFAGG_IO;
    } catch (const cdfagg::alignment_error& e) {
        set_error(e.what());
        return CDFAGG_ALIGNMENT;
    } catch (const cdfagg::convergence_error& e) {
        set_error(e.what());
        return CDFAGG_NO_CONVERGENCE;
    } catch (const std::invalid_argument& e) {
        set_error(e.what());
        return CDFAGG_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        set_error(e.what());
        return CDFAGG_INTERNAL;
    } catch (...) {
        set_error("unknown error");
        return CDFAGG_INTERNAL;
    }
}

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

std::vector<const cdfagg::StepwiseCdf*> unwrap_cdfs(const cdfagg_cdf* const* cdfs, size_t n) {
    require(cdfs != nullptr, "cdfs is null");
    std::vector<const cdfagg::StepwiseCdf*> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        require(cdfs[i] != nullptr, "cdfs contains a null handle");
        out.push_back(&cdfs[i]->impl);
    }
    return out;
}

std::vector<double> copy_doubles(const double* values, size_t n, const char* what) {
    require(values != nullptr || n == 0, what);
    return std::vector<double>(values, values + n);
}

cdfagg::RankHistogram unwrap_histogram(const uint64_t* counts, size_t k) {
    require(counts != nullptr, "counts is null");
    cdfagg::RankHistogram hist;
    hist.counts.assign(counts, counts + k);
    return hist;
}

const cdfagg::AggregationRun& unwrap_run(const cdfagg_run* run) {
    require(run != nullptr, "run is null");
    return run->impl;
}

int checked_day(int t, int days) {
    require(t >= 1 && t <= days, "day index out of range");
    return t;
}

} // namespace

extern "C" {

const char* cdfagg_version(void) { return "1.0.0"; }

const char* cdfagg_last_error(void) { return g_last_error.c_str(); }

cdfagg_status cdfagg_cdf_from_sample(const double* values, size_t n, cdfagg_cdf** out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = new cdfagg_cdf{
            cdfagg::StepwiseCdf::from_sample(copy_doubles(values, n, "values is null"))};
    });
}

cdfagg_status cdfagg_cdf_from_quantiles(const double* values, const double* orders, size_t n,
                                        cdfagg_cdf** out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = new cdfagg_cdf{
            cdfagg::StepwiseCdf::from_quantiles(copy_doubles(values, n, "values is null"),
                                                copy_doubles(orders, n, "orders is null"))};
    });
}

cdfagg_status cdfagg_cdf_combine(const cdfagg_cdf* const* cdfs, const double* weights, size_t n,
                                 cdfagg_cdf** out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = new cdfagg_cdf{cdfagg::convex_combine(
            unwrap_cdfs(cdfs, n), copy_doubles(weights, n, "weights is null"))};
    });
}

cdfagg_status cdfagg_cdf_data(const cdfagg_cdf* cdf, const double** locations,
                              const double** weights, size_t* n) {
    return wrap([&] {
        require(cdf != nullptr, "cdf is null");
        require(locations != nullptr && weights != nullptr && n != nullptr, "out is null");
        *locations = cdf->impl.locations().data();
        *weights = cdf->impl.weights().data();
        *n = cdf->impl.size();
    });
}

cdfagg_status cdfagg_cdf_evaluate(const cdfagg_cdf* cdf, double x, double* out) {
    return wrap([&] {
        require(cdf != nullptr && out != nullptr, "cdf or out is null");
        *out = cdf->impl.evaluate(x);
    });
}

cdfagg_status cdfagg_cdf_quantile(const cdfagg_cdf* cdf, double tau, double* out) {
    return wrap([&] {
        require(cdf != nullptr && out != nullptr, "cdf or out is null");
        *out = cdf->impl.quantile(tau);
    });
}

void cdfagg_cdf_free(cdfagg_cdf* cdf) { delete cdf; }

cdfagg_status cdfagg_crps_int(const cdfagg_cdf* cdf, double y, double* out) {
    return wrap([&] {
        require(cdf != nullptr && out != nullptr, "cdf or out is null");
        *out = cdfagg::crps_int(cdf->impl, y);
    });
}

cdfagg_status cdfagg_crps_pwm(const cdfagg_cdf* cdf, double y, double* out) {
    return wrap([&] {
        require(cdf != nullptr && out != nullptr, "cdf or out is null");
        *out = cdfagg::crps_pwm(cdf->impl, y);
    });
}

cdfagg_status cdfagg_crps_exact(const cdfagg_cdf* const* cdfs, const double* weights, size_t n,
                                double y, double* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = cdfagg::crps_exact(unwrap_cdfs(cdfs, n),
                                  copy_doubles(weights, n, "weights is null"), y);
    });
}

cdfagg_status cdfagg_crps_gradient(const cdfagg_cdf* const* cdfs, const double* weights,
                                   size_t n, double y, double* grad) {
    return wrap([&] {
        require(grad != nullptr, "grad is null");
        const std::vector<double> result = cdfagg::crps_gradient(
            unwrap_cdfs(cdfs, n), copy_doubles(weights, n, "weights is null"), y);
        for (size_t i = 0; i < result.size(); ++i) grad[i] = result[i];
    });
}

cdfagg_status cdfagg_ewa_bound(size_t n_experts, int horizon, double eta, double loss_bound,
                               double* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = cdfagg::ewa_bound(n_experts, horizon, eta, loss_bound);
    });
}

cdfagg_status cdfagg_chi2_test(const uint64_t* counts, size_t k, double* stat, double* pvalue) {
    return wrap([&] {
        require(stat != nullptr && pvalue != nullptr, "out is null");
        const cdfagg::Chi2Result result = cdfagg::chi2_test(unwrap_histogram(counts, k));
        *stat = result.stat;
        *pvalue = result.pvalue;
    });
}

cdfagg_status cdfagg_jp_test(const uint64_t* counts, size_t k, double* stats, double* pvalues) {
    return wrap([&] {
        require(stats != nullptr && pvalues != nullptr, "out is null");
        const cdfagg::FlatnessReport report = cdfagg::jp_test(unwrap_histogram(counts, k));
        stats[0] = report.chi2.stat;
        stats[1] = report.slope.stat;
        stats[2] = report.convexity.stat;
        stats[3] = report.wave.stat;
        pvalues[0] = report.chi2.pvalue;
        pvalues[1] = report.slope.pvalue;
        pvalues[2] = report.convexity.pvalue;
        pvalues[3] = report.wave.pvalue;
    });
}

cdfagg_status cdfagg_benjamini_hochberg(const double* pvalues, size_t n, double alpha,
                                        int* rejected) {
    return wrap([&] {
        require(rejected != nullptr, "rejected is null");
        const std::vector<std::size_t> hits = cdfagg::benjamini_hochberg(
            copy_doubles(pvalues, n, "pvalues is null"), alpha);
        for (size_t i = 0; i < n; ++i) rejected[i] = 0;
        for (std::size_t index : hits) rejected[index] = 1;
    });
}

cdfagg_status cdfagg_truncnorm_cdf(double x, double mu, double sigma, double* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = cdfagg::truncnorm_cdf(x, mu, sigma);
    });
}

cdfagg_status cdfagg_truncnorm_quantile(double tau, double mu, double sigma, double* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = cdfagg::truncnorm_quantile(tau, mu, sigma);
    });
}

namespace {

cdfagg_panel_set* make_panel_set(std::vector<cdfagg::ExpertPanel> panels) {
    auto* set = new cdfagg_panel_set{std::move(panels), {}};
    set->views.reserve(set->panels.size());
    for (const cdfagg::ExpertPanel& panel : set->panels) {
        set->views.push_back(cdfagg_panel{&panel});
    }
    return set;
}

} // namespace

cdfagg_status cdfagg_panel_set_load(const char* forecasts_csv, const char* observations_csv,
                                    cdfagg_panel_set** out) {
    return wrap([&] {
        require(forecasts_csv != nullptr && observations_csv != nullptr, "path is null");
        require(out != nullptr, "out is null");
        *out = make_panel_set(cdfagg::load_panels_csv(forecasts_csv, observations_csv));
    });
}

cdfagg_status cdfagg_panel_set_from_scenario(const char* scenario_json, uint64_t seed,
                                             cdfagg_panel_set** out) {
    return wrap([&] {
        require(scenario_json != nullptr, "scenario_json is null");
        require(out != nullptr, "out is null");
        const cdfagg::ScenarioSpec spec = cdfagg::parse_scenario_json(scenario_json);
        *out = make_panel_set(cdfagg::generate_scenario(spec, seed));
    });
}

cdfagg_status cdfagg_panel_set_size(const cdfagg_panel_set* set, size_t* out) {
    return wrap([&] {
        require(set != nullptr && out != nullptr, "set or out is null");
        *out = set->panels.size();
    });
}

cdfagg_status cdfagg_panel_set_get(const cdfagg_panel_set* set, size_t index,
                                   const cdfagg_panel** out) {
    return wrap([&] {
        require(set != nullptr && out != nullptr, "set or out is null");
        require(index < set->views.size(), "panel index out of range");
        *out = &set->views[index];
    });
}

cdfagg_status cdfagg_panel_days(const cdfagg_panel* panel, int* out) {
    return wrap([&] {
        require(panel != nullptr && out != nullptr, "panel or out is null");
        *out = panel->impl->days();
    });
}

cdfagg_status cdfagg_panel_expert_count(const cdfagg_panel* panel, size_t* out) {
    return wrap([&] {
        require(panel != nullptr && out != nullptr, "panel or out is null");
        *out = panel->impl->expert_count();
    });
}

cdfagg_status cdfagg_panel_location(const cdfagg_panel* panel, const char** out) {
    return wrap([&] {
        require(panel != nullptr && out != nullptr, "panel or out is null");
        *out = panel->impl->location_id.c_str();
    });
}

cdfagg_status cdfagg_panel_lead_time(const cdfagg_panel* panel, int* out) {
    return wrap([&] {
        require(panel != nullptr && out != nullptr, "panel or out is null");
        *out = panel->impl->lead_time_h;
    });
}

cdfagg_status cdfagg_panel_expert_name(const cdfagg_panel* panel, size_t e, const char** out) {
    return wrap([&] {
        require(panel != nullptr && out != nullptr, "panel or out is null");
        require(e < panel->impl->expert_count(), "expert index out of range");
        *out = panel->impl->experts[e].name.c_str();
    });
}

cdfagg_status cdfagg_panel_observation(const cdfagg_panel* panel, int t, double* out) {
    return wrap([&] {
        require(panel != nullptr && out != nullptr, "panel or out is null");
        checked_day(t, panel->impl->days());
        *out = panel->impl->observations[static_cast<size_t>(t - 1)];
    });
}

void cdfagg_panel_set_free(cdfagg_panel_set* set) { delete set; }

cdfagg_status cdfagg_run_strategy(const cdfagg_panel* panel, const char* kind, int window_days,
                                  double eta, double reli_threshold, cdfagg_run** out) {
    return wrap([&] {
        require(panel != nullptr && kind != nullptr && out != nullptr,
                "panel, kind or out is null");
        cdfagg::StrategyConfig config;
        config.kind = cdfagg::parse_strategy_kind(kind);
        config.window =
            window_days <= 0 ? cdfagg::Window::all_past() : cdfagg::Window::days(window_days);
        config.eta = eta;
        config.reli_threshold = reli_threshold;
        config.validate();
        const cdfagg::PanelScoring scoring(*panel->impl);
        cdfagg::AggregationRun run = cdfagg::run_aggregation(scoring, config, true);
        cdfagg::attach_oracles(run, scoring);
        *out = new cdfagg_run{std::move(run)};
    });
}

cdfagg_status cdfagg_run_days(const cdfagg_run* run, int* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = static_cast<int>(unwrap_run(run).weights.size());
    });
}

cdfagg_status cdfagg_run_weights(const cdfagg_run* run, int t, const double** weights,
                                 size_t* n) {
    return wrap([&] {
        require(weights != nullptr && n != nullptr, "out is null");
        const cdfagg::AggregationRun& impl = unwrap_run(run);
        checked_day(t, static_cast<int>(impl.weights.size()));
        const std::vector<double>& w = impl.weights[static_cast<size_t>(t - 1)];
        *weights = w.data();
        *n = w.size();
    });
}

cdfagg_status cdfagg_run_loss(const cdfagg_run* run, int t, double* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        const cdfagg::AggregationRun& impl = unwrap_run(run);
        checked_day(t, static_cast<int>(impl.losses.size()));
        *out = impl.losses.loss_at(t);
    });
}

cdfagg_status cdfagg_run_total_loss(const cdfagg_run* run, double* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        *out = unwrap_run(run).losses.total();
    });
}

cdfagg_status cdfagg_run_regret_best_expert(const cdfagg_run* run, int t, double* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        const cdfagg::AggregationRun& impl = unwrap_run(run);
        checked_day(t, static_cast<int>(impl.regret_best_expert.size()));
        *out = impl.regret_best_expert[static_cast<size_t>(t - 1)];
    });
}

cdfagg_status cdfagg_run_regret_best_constant(const cdfagg_run* run, int t, double* out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        const cdfagg::AggregationRun& impl = unwrap_run(run);
        checked_day(t, static_cast<int>(impl.regret_best_constant.size()));
        *out = impl.regret_best_constant[static_cast<size_t>(t - 1)];
    });
}

cdfagg_status cdfagg_run_best_expert(const cdfagg_run* run, size_t* index, double* total_loss) {
    return wrap([&] {
        require(index != nullptr && total_loss != nullptr, "out is null");
        const cdfagg::AggregationRun& impl = unwrap_run(run);
        require(impl.best_expert.has_value(), "run carries no oracle");
        *index = impl.best_expert->index;
        *total_loss = impl.best_expert->total_loss;
    });
}

cdfagg_status cdfagg_run_best_constant(const cdfagg_run* run, const double** weights, size_t* n,
                                       double* total_loss, int* converged) {
    return wrap([&] {
        require(weights != nullptr && n != nullptr && total_loss != nullptr &&
                    converged != nullptr,
                "out is null");
        const cdfagg::AggregationRun& impl = unwrap_run(run);
        require(impl.best_constant.has_value(), "run carries no oracle");
        *weights = impl.best_constant->weights.data();
        *n = impl.best_constant->weights.size();
        *total_loss = impl.best_constant->total_loss;
        *converged = impl.best_constant->converged ? 1 : 0;
    });
}

cdfagg_status cdfagg_run_combined(const cdfagg_run* run, int t, cdfagg_cdf** out) {
    return wrap([&] {
        require(out != nullptr, "out is null");
        const cdfagg::AggregationRun& impl = unwrap_run(run);
        require(!impl.combined.empty(), "run stored no combined forecasts");
        checked_day(t, static_cast<int>(impl.combined.size()));
        *out = new cdfagg_cdf{impl.combined[static_cast<size_t>(t - 1)]};
    });
}

void cdfagg_run_free(cdfagg_run* run) { delete run; }

cdfagg_status cdfagg_pipeline(const char* subcommand, const char* config_path,
                              const char* overrides_json) {
    return wrap([&] {
        require(subcommand != nullptr && config_path != nullptr,
                "subcommand or config_path is null");
        cdfagg::run_pipeline(subcommand, config_path,
                             overrides_json == nullptr ? "" : overrides_json);
    });
}

} // extern "C"
