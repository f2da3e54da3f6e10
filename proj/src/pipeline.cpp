#include "cdfagg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "cdfagg/errors.hpp"
#include "cdfagg/experts.hpp"
#include "cdfagg/reliability.hpp"
#include "cdfagg/rng.hpp"

namespace fs = std::filesystem;

namespace cdfagg {

namespace {

void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw parse_error("unknown " + where + " key: " + item.key());
        }
    }
}

Window parse_window_json(const nlohmann::json& node) {
    if (node.is_string()) {
        if (node.get<std::string>() == "all-past") return Window::all_past();
        throw parse_error("window must be a positive integer or \"all-past\"");
    }
    if (!node.is_number_integer() || node.get<int>() < 1) {
        throw parse_error("window must be a positive integer or \"all-past\"");
    }
    return Window::days(node.get<int>());
}

StrategyGrid parse_grid(const nlohmann::json& node) {
    reject_unknown_keys(node, {"kinds", "windows", "etas", "reli_threshold"}, "strategies");
    StrategyGrid grid = default_strategy_grid();
    if (node.contains("kinds")) {
        grid.kinds.clear();
        for (const nlohmann::json& item : node.at("kinds")) {
            grid.kinds.push_back(parse_strategy_kind(item.get<std::string>()));
        }
    }
    if (node.contains("windows")) {
        grid.windows.clear();
        for (const nlohmann::json& item : node.at("windows")) {
            grid.windows.push_back(parse_window_json(item));
        }
    }
    if (node.contains("etas")) {
        grid.etas.clear();
        for (const nlohmann::json& item : node.at("etas")) {
            const double eta = item.get<double>();
            if (!(eta > 0.0)) throw parse_error("etas must be positive");
            grid.etas.push_back(eta);
        }
    }
    if (node.contains("reli_threshold")) {
        grid.reli_threshold = node.at("reli_threshold").get<double>();
        if (!(grid.reli_threshold > 0.0)) {
            throw parse_error("reli_threshold must be positive");
        }
    }
    if (grid.kinds.empty() || grid.windows.empty()) {
        throw parse_error("strategies need at least one kind and one window");
    }
    return grid;
}

// Runs body(0..count-1) on up to jobs threads. Tasks write to disjoint
// slots, so results do not depend on the thread count.
void parallel_for(int jobs, std::size_t count,
                  const std::function<void(std::size_t)>& body) {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) threads.emplace_back(worker);
    for (std::thread& thread : threads) thread.join();
    if (error) std::rethrow_exception(error);
}

class CsvFile {
public:
    explicit CsvFile(const fs::path& path)
        : path_(path.string()), out_(path, std::ios::binary) {
        if (!out_) throw io_error("cannot open for writing: " + path_);
    }

    void row(std::initializer_list<std::string> cells) {
        bool first = true;
        for (const std::string& cell : cells) {
            if (!first) out_ << ',';
            out_ << cell;
            first = false;
        }
        out_ << '\n';
    }

    void finish() {
        out_.flush();
        if (!out_) throw io_error("failed writing: " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

std::string join_values(const std::vector<double>& values, char sep) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += sep;
        out += format_value(values[i]);
    }
    return out;
}

std::string window_name(Window window) {
    return window.is_all_past() ? "all-past" : std::to_string(window.raw_days());
}

std::string eta_cell(const StrategyConfig& config) {
    const bool rated = config.kind == StrategyKind::Ewa || config.kind == StrategyKind::Grad;
    return rated ? format_value(config.eta) : "";
}

const char* kind_cell(ForecastKind kind) {
    return kind == ForecastKind::Sample ? "sample" : "quantile";
}

const char* family_cell(ObsFamily family) {
    return family == ObsFamily::GaussianInfo ? "gaussian_info" : "truncnorm_sq";
}

std::vector<ExpertPanel> load_input_panels(const RunConfig& config) {
    const std::string forecasts =
        config.forecasts_path ? *config.forecasts_path
                              : (fs::path(config.out) / "forecasts.csv").string();
    const std::string observations =
        config.observations_path ? *config.observations_path
                                 : (fs::path(config.out) / "observations.csv").string();
    return load_panels_csv(forecasts, observations);
}

// Scorings are built once per panel and shared read-only by every task.
std::vector<std::optional<PanelScoring>> build_scorings(const std::vector<ExpertPanel>& panels,
                                                        int jobs) {
    std::vector<std::optional<PanelScoring>> scorings(panels.size());
    parallel_for(jobs, panels.size(),
                 [&](std::size_t p) { scorings[p].emplace(panels[p]); });
    return scorings;
}

struct PanelOracles {
    OracleBestExpert best_expert;
    OracleBestConstant best_constant;
    std::vector<double> expert_series;
    std::vector<double> constant_series;
};

std::vector<PanelOracles> build_oracles(const std::vector<std::optional<PanelScoring>>& scorings,
                                        int jobs) {
    std::vector<PanelOracles> oracles(scorings.size());
    parallel_for(jobs, scorings.size(), [&](std::size_t p) {
        const PanelScoring& scoring = *scorings[p];
        PanelOracles& o = oracles[p];
        o.best_expert = oracle_best_expert(scoring);
        o.best_constant = oracle_best_constant(scoring);
        o.expert_series = expert_loss_series(scoring, o.best_expert.index);
        o.constant_series = constant_weight_loss_series(scoring, o.best_constant.weights);
    });
    return oracles;
}

AggregationRun scored_run(const PanelScoring& scoring, const StrategyConfig& config,
                          const PanelOracles& oracles, bool store_cdfs) {
    AggregationRun run = run_aggregation(scoring, config, store_cdfs);
    run.best_expert = oracles.best_expert;
    run.best_constant = oracles.best_constant;
    run.regret_best_expert = regret(run.losses, oracles.expert_series);
    run.regret_best_constant = regret(run.losses, oracles.constant_series);
    return run;
}

// Verification treats every expert and every strategy configuration as a
// forecast system; rank draws take an independent stream per
// (system, panel) so results do not depend on scheduling.
constexpr std::uint64_t kRankSaltBase = 0x100000000ULL;

std::uint64_t rank_salt(std::size_t system, std::size_t panel) {
    return kRankSaltBase + system * 65536 + panel;
}

std::vector<int> expert_ranks(const ExpertPanel& panel, std::size_t e, Rng& rng,
                              std::size_t& k_out) {
    const ExpertSeries& series = panel.experts[e];
    const ForecastKind kind = series.days.front().kind;
    std::vector<int> ranks;
    ranks.reserve(series.days.size());
    if (kind == ForecastKind::Sample) {
        const std::size_t members = series.days.front().values.size();
        for (std::size_t t = 0; t < series.days.size(); ++t) {
            const Forecast& fc = series.days[t];
            if (fc.kind != kind || fc.values.size() != members) {
                throw std::invalid_argument("expert " + series.name +
                                            " changes forecast shape over time");
            }
            ranks.push_back(rank_among(fc.values, panel.observations[t], rng));
        }
        k_out = members + 1;
    } else {
        for (std::size_t t = 0; t < series.days.size(); ++t) {
            ranks.push_back(
                rank_among(decile_values(series.days[t].cdf), panel.observations[t], rng));
        }
        k_out = 10;
    }
    return ranks;
}

std::vector<int> config_ranks(const PanelScoring& scoring, const StrategyConfig& config,
                              Rng& rng) {
    const AggregationRun run = run_aggregation(scoring, config, true);
    const ExpertPanel& panel = scoring.panel();
    std::vector<int> ranks;
    ranks.reserve(run.combined.size());
    for (std::size_t t = 0; t < run.combined.size(); ++t) {
        ranks.push_back(
            rank_among(decile_values(run.combined[t]), panel.observations[t], rng));
    }
    return ranks;
}

std::vector<int> sorted_leads(const std::vector<ExpertPanel>& panels) {
    std::vector<int> leads;
    for (const ExpertPanel& panel : panels) leads.push_back(panel.lead_time_h);
    std::sort(leads.begin(), leads.end());
    leads.erase(std::unique(leads.begin(), leads.end()), leads.end());
    return leads;
}

void require_matching_experts(const std::vector<ExpertPanel>& panels) {
    for (const ExpertPanel& panel : panels) {
        if (panel.expert_count() != panels.front().expert_count()) {
            throw alignment_error("expert sets differ between panels");
        }
        for (std::size_t e = 0; e < panel.expert_count(); ++e) {
            if (panel.experts[e].name != panels.front().experts[e].name) {
                throw alignment_error("expert sets differ between panels");
            }
        }
    }
}

} // namespace

std::vector<StrategyConfig> StrategyGrid::expand() const {
    std::vector<StrategyConfig> out;
    for (StrategyKind kind : kinds) {
        const bool rated = kind == StrategyKind::Ewa || kind == StrategyKind::Grad;
        for (const Window& window : windows) {
            if (rated) {
                for (double eta : etas) {
                    StrategyConfig config;
                    config.kind = kind;
                    config.window = window;
                    config.eta = eta;
                    config.reli_threshold = reli_threshold;
                    out.push_back(config);
                }
            } else {
                StrategyConfig config;
                config.kind = kind;
                config.window = window;
                config.reli_threshold = reli_threshold;
                out.push_back(config);
            }
        }
    }
    for (const StrategyConfig& config : out) config.validate();
    return out;
}

StrategyGrid default_strategy_grid() {
    StrategyGrid grid;
    grid.kinds = {StrategyKind::Inv, StrategyKind::Sharp, StrategyKind::Min, StrategyKind::Ewa,
                  StrategyKind::Grad};
    grid.windows = {Window::days(7),  Window::days(15),  Window::days(30),
                    Window::days(90), Window::days(365), Window::all_past()};
    grid.etas = {std::pow(10.0, -1.5), std::pow(10.0, -1.0), std::pow(10.0, -0.5), 1.0,
                 std::pow(10.0, 0.5),  std::pow(10.0, 1.5),  std::pow(10.0, 2.0)};
    return grid;
}

RunConfig load_run_config(const std::string& config_path, const std::string& overrides_json) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw io_error("cannot open config file: " + config_path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(config_path + ": " + e.what());
    }
    if (!doc.is_object()) throw parse_error(config_path + ": config must be a JSON object");

    RunConfig config;
    try {
        reject_unknown_keys(doc,
                            {"scenario", "forecasts", "observations", "strategies", "alpha",
                             "out", "seed", "jobs"},
                            "config");
        if (doc.contains("scenario")) config.scenario_path = doc.at("scenario").get<std::string>();
        if (doc.contains("forecasts")) {
            config.forecasts_path = doc.at("forecasts").get<std::string>();
        }
        if (doc.contains("observations")) {
            config.observations_path = doc.at("observations").get<std::string>();
        }
        if (doc.contains("strategies")) config.strategies = parse_grid(doc.at("strategies"));
        if (doc.contains("alpha")) config.alpha = doc.at("alpha").get<double>();
        if (doc.contains("out")) config.out = doc.at("out").get<std::string>();
        if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("jobs")) config.jobs = doc.at("jobs").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(config_path + ": " + e.what());
    }

    if (!overrides_json.empty() && overrides_json != "{}") {
        nlohmann::json overrides;
        try {
            overrides = nlohmann::json::parse(overrides_json);
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(std::string("overrides: ") + e.what());
        }
        if (!overrides.is_object()) throw parse_error("overrides must be a JSON object");
        try {
            reject_unknown_keys(overrides, {"seed", "out", "jobs"}, "override");
            if (overrides.contains("seed")) config.seed = overrides.at("seed").get<std::uint64_t>();
            if (overrides.contains("out")) config.out = overrides.at("out").get<std::string>();
            if (overrides.contains("jobs")) config.jobs = overrides.at("jobs").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(std::string("overrides: ") + e.what());
        }
    }

    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw parse_error("alpha must be inside (0, 1)");
    }
    if (config.jobs < 1) throw parse_error("jobs must be at least 1");
    if (config.out.empty()) throw parse_error("out must not be empty");
    return config;
}

void cmd_simulate(const RunConfig& config) {
    if (!config.scenario_path) {
        throw std::invalid_argument("simulate needs a scenario path in the config");
    }
    std::ifstream in(*config.scenario_path, std::ios::binary);
    if (!in) throw io_error("cannot open scenario file: " + *config.scenario_path);
    const std::string text((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    const ScenarioSpec spec = parse_scenario_json(text);
    const std::vector<ExpertPanel> panels = generate_scenario(spec, config.seed);

    fs::create_directories(config.out);
    const fs::path out_dir(config.out);
    write_panels_csv(panels, (out_dir / "forecasts.csv").string(),
                     (out_dir / "observations.csv").string());

    nlohmann::ordered_json manifest;
    manifest["command"] = "simulate";
    manifest["seed"] = config.seed;
    manifest["scenario"] = *config.scenario_path;
    manifest["family"] = family_cell(spec.family);
    manifest["days"] = spec.days;
    manifest["locations"] = spec.locations;
    manifest["lead_times"] = spec.lead_times;
    if (spec.switch_day) {
        manifest["switch_day"] = *spec.switch_day;
    } else {
        manifest["switch_day"] = nullptr;
    }
    manifest["start_date"] = spec.start_date;
    nlohmann::ordered_json experts = nlohmann::ordered_json::array();
    for (const ExpertSpec& expert : spec.experts) {
        nlohmann::ordered_json je;
        je["name"] = expert.name;
        je["kind"] = kind_cell(expert.kind);
        experts.push_back(je);
    }
    manifest["experts"] = experts;
    manifest["panels"] = panels.size();
    manifest["first_date"] = panels.front().dates.front();
    manifest["last_date"] = panels.front().dates.back();
    // File names are relative to the manifest so runs into different
    // output directories stay byte-identical.
    manifest["forecasts"] = "forecasts.csv";
    manifest["observations"] = "observations.csv";

    std::ofstream mf(out_dir / "manifest.json", std::ios::binary);
    if (!mf) throw io_error("cannot open for writing: " + (out_dir / "manifest.json").string());
    mf << manifest.dump(2) << '\n';
    mf.flush();
    if (!mf) throw io_error("failed writing: " + (out_dir / "manifest.json").string());
}

void cmd_aggregate(const RunConfig& config) {
    const std::vector<ExpertPanel> panels = load_input_panels(config);
    const std::vector<StrategyConfig> grid = config.strategies.expand();
    const fs::path out_dir(config.out);
    fs::create_directories(out_dir / "runs");

    const std::vector<std::optional<PanelScoring>> scorings =
        build_scorings(panels, config.jobs);
    const std::vector<PanelOracles> oracles = build_oracles(scorings, config.jobs);

    const std::size_t task_count = panels.size() * grid.size();
    std::vector<AggregationRun> runs(task_count);
    parallel_for(config.jobs, task_count, [&](std::size_t i) {
        const std::size_t p = i / grid.size();
        const std::size_t c = i % grid.size();
        runs[i] = scored_run(*scorings[p], grid[c], oracles[p], false);
    });

    for (std::size_t c = 0; c < grid.size(); ++c) {
        for (std::size_t p = 0; p < panels.size(); ++p) {
            const ExpertPanel& panel = panels[p];
            const AggregationRun& run = runs[p * grid.size() + c];
            const std::string name = grid[c].label() + "__" + panel.location_id + "_" +
                                     std::to_string(panel.lead_time_h) + "h.csv";
            CsvFile detail(out_dir / "runs" / name);
            std::string header = "t,date,loss,cum_loss,regret_best_expert,regret_best_constant";
            for (const ExpertSeries& expert : panel.experts) header += ",w_" + expert.name;
            detail.row({header});
            for (int t = 1; t <= panel.days(); ++t) {
                std::string line = std::to_string(t) + "," +
                                   panel.dates[static_cast<std::size_t>(t - 1)] + "," +
                                   format_value(run.losses.loss_at(t)) + "," +
                                   format_value(run.losses.cumulative_at(t)) + "," +
                                   format_value(
                                       run.regret_best_expert[static_cast<std::size_t>(t - 1)]) +
                                   "," +
                                   format_value(
                                       run.regret_best_constant[static_cast<std::size_t>(t - 1)]);
                for (double w : run.weights[static_cast<std::size_t>(t - 1)]) {
                    line += "," + format_value(w);
                }
                detail.row({line});
            }
            detail.finish();
        }
    }

    CsvFile summary(out_dir / "summary.csv");
    summary.row({"label,kind,window,eta,location_id,lead_time_h,days,total_crps,mean_crps,"
                 "final_regret_best_expert,final_regret_best_constant"});
    const std::vector<int> leads = sorted_leads(panels);
    for (std::size_t c = 0; c < grid.size(); ++c) {
        for (std::size_t p = 0; p < panels.size(); ++p) {
            const ExpertPanel& panel = panels[p];
            const AggregationRun& run = runs[p * grid.size() + c];
            const double panel_total = run.losses.total();
            summary.row({grid[c].label(), strategy_kind_name(grid[c].kind),
                         window_name(grid[c].window), eta_cell(grid[c]), panel.location_id,
                         std::to_string(panel.lead_time_h), std::to_string(panel.days()),
                         format_value(panel_total),
                         format_value(panel_total / panel.days()),
                         format_value(run.regret_best_expert.back()),
                         format_value(run.regret_best_constant.back())});
        }
        // Pooled over locations, one row per lead time.
        for (int lead : leads) {
            double total = 0.0, regret_expert = 0.0, regret_constant = 0.0;
            long total_days = 0;
            for (std::size_t p = 0; p < panels.size(); ++p) {
                if (panels[p].lead_time_h != lead) continue;
                const AggregationRun& run = runs[p * grid.size() + c];
                total += run.losses.total();
                total_days += panels[p].days();
                regret_expert += run.regret_best_expert.back();
                regret_constant += run.regret_best_constant.back();
            }
            summary.row({grid[c].label(), strategy_kind_name(grid[c].kind),
                         window_name(grid[c].window), eta_cell(grid[c]), "all",
                         std::to_string(lead), std::to_string(total_days),
                         format_value(total),
                         format_value(total / static_cast<double>(total_days)),
                         format_value(regret_expert), format_value(regret_constant)});
        }
    }
    summary.finish();

    CsvFile oracles_csv(out_dir / "oracles.csv");
    oracles_csv.row({"location_id,lead_time_h,days,value_bound,best_expert_index,"
                     "best_expert_name,best_expert_total_crps,best_constant_total_crps,"
                     "best_constant_converged,best_constant_iterations,best_constant_weights"});
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const ExpertPanel& panel = panels[p];
        const PanelOracles& o = oracles[p];
        oracles_csv.row({panel.location_id, std::to_string(panel.lead_time_h),
                         std::to_string(panel.days()), format_value(scorings[p]->value_bound()),
                         std::to_string(o.best_expert.index),
                         panel.experts[o.best_expert.index].name,
                         format_value(o.best_expert.total_loss),
                         format_value(o.best_constant.total_loss),
                         o.best_constant.converged ? "1" : "0",
                         std::to_string(o.best_constant.iterations),
                         join_values(o.best_constant.weights, ';')});
    }
    oracles_csv.finish();
}

void cmd_verify(const RunConfig& config) {
    const std::vector<ExpertPanel> panels = load_input_panels(config);
    require_matching_experts(panels);
    const std::vector<StrategyConfig> grid = config.strategies.expand();
    const fs::path out_dir(config.out);
    fs::create_directories(out_dir);

    const std::vector<std::optional<PanelScoring>> scorings =
        build_scorings(panels, config.jobs);

    const std::size_t expert_count = panels.front().expert_count();
    std::vector<std::string> systems;
    for (std::size_t e = 0; e < expert_count; ++e) {
        systems.push_back(panels.front().experts[e].name);
    }
    for (const StrategyConfig& cfg : grid) systems.push_back(cfg.label());

    const std::size_t task_count = systems.size() * panels.size();
    std::vector<RankHistogram> histograms(task_count);
    parallel_for(config.jobs, task_count, [&](std::size_t i) {
        const std::size_t s = i / panels.size();
        const std::size_t p = i % panels.size();
        Rng rng(mix_seed(config.seed, rank_salt(s, p)));
        std::vector<int> ranks;
        std::size_t k = 10;
        if (s < expert_count) {
            ranks = expert_ranks(panels[p], s, rng, k);
        } else {
            ranks = config_ranks(*scorings[p], grid[s - expert_count], rng);
        }
        histograms[i] = build_histogram(ranks, k);
    });

    const std::vector<int> leads = sorted_leads(panels);
    // Shape p-values pool into one FDR family per (system, lead time).
    std::vector<FlatnessReport> reports(task_count);
    CsvFile flatness(out_dir / "flatness.csv");
    flatness.row({"system,lead_time_h,flat_proportion,n_locations"});
    for (std::size_t s = 0; s < systems.size(); ++s) {
        for (int lead : leads) {
            std::vector<RankHistogram> group;
            std::vector<std::size_t> members;
            for (std::size_t p = 0; p < panels.size(); ++p) {
                if (panels[p].lead_time_h != lead) continue;
                group.push_back(histograms[s * panels.size() + p]);
                members.push_back(s * panels.size() + p);
            }
            const FlatProportionResult result = flat_proportion(group, config.alpha);
            for (std::size_t g = 0; g < members.size(); ++g) {
                reports[members[g]] = result.reports[g];
            }
            flatness.row({systems[s], std::to_string(lead),
                          format_value(result.proportion), std::to_string(group.size())});
        }
    }
    flatness.finish();

    CsvFile hist_csv(out_dir / "histograms.csv");
    hist_csv.row({"system,location_id,lead_time_h,k,n,bin,count"});
    for (std::size_t s = 0; s < systems.size(); ++s) {
        for (std::size_t p = 0; p < panels.size(); ++p) {
            const RankHistogram& hist = histograms[s * panels.size() + p];
            for (std::size_t bin = 0; bin < hist.k(); ++bin) {
                hist_csv.row({systems[s], panels[p].location_id,
                              std::to_string(panels[p].lead_time_h), std::to_string(hist.k()),
                              std::to_string(hist.n()), std::to_string(bin + 1),
                              std::to_string(hist.counts[bin])});
            }
        }
    }
    hist_csv.finish();

    CsvFile jp_csv(out_dir / "jp_pvalues.csv");
    jp_csv.row({"system,location_id,lead_time_h,chi2_stat,chi2_p,slope_stat,slope_p,"
                "convexity_stat,convexity_p,wave_stat,wave_p,small_counts,flat"});
    for (std::size_t s = 0; s < systems.size(); ++s) {
        for (std::size_t p = 0; p < panels.size(); ++p) {
            const FlatnessReport& report = reports[s * panels.size() + p];
            jp_csv.row({systems[s], panels[p].location_id,
                        std::to_string(panels[p].lead_time_h), format_value(report.chi2.stat),
                        format_value(report.chi2.pvalue), format_value(report.slope.stat),
                        format_value(report.slope.pvalue), format_value(report.convexity.stat),
                        format_value(report.convexity.pvalue), format_value(report.wave.stat),
                        format_value(report.wave.pvalue), report.small_counts ? "1" : "0",
                        report.flat.value_or(false) ? "1" : "0"});
        }
    }
    jp_csv.finish();
}

void cmd_report(const RunConfig& config) {
    const std::vector<ExpertPanel> panels = load_input_panels(config);
    require_matching_experts(panels);
    const std::vector<StrategyConfig> grid = config.strategies.expand();
    const fs::path out_dir(config.out);
    fs::create_directories(out_dir);

    const std::vector<std::optional<PanelScoring>> scorings =
        build_scorings(panels, config.jobs);
    const std::vector<PanelOracles> oracles = build_oracles(scorings, config.jobs);
    const std::size_t expert_count = panels.front().expert_count();

    CsvFile regret_csv(out_dir / "regret_vs_time.csv");
    regret_csv.row({"label,location_id,lead_time_h,t,date,loss,cum_loss,regret_best_expert,"
                    "regret_best_constant"});
    CsvFile weights_csv(out_dir / "weights_vs_time.csv");
    weights_csv.row({"label,location_id,lead_time_h,t,date,expert,weight"});

    // Per (configuration, lead time): pooled CRPS and rank histograms.
    const std::vector<int> leads = sorted_leads(panels);
    std::vector<double> lead_total(grid.size() * leads.size(), 0.0);
    std::vector<long> lead_days(grid.size() * leads.size(), 0);
    std::vector<std::vector<RankHistogram>> lead_hists(grid.size() * leads.size());
    const auto lead_index = [&](int lead) {
        return static_cast<std::size_t>(
            std::find(leads.begin(), leads.end(), lead) - leads.begin());
    };

    struct TaskResult {
        AggregationRun run;
        RankHistogram hist;
    };

    for (std::size_t p = 0; p < panels.size(); ++p) {
        const ExpertPanel& panel = panels[p];
        std::vector<TaskResult> results(grid.size());
        parallel_for(config.jobs, grid.size(), [&](std::size_t c) {
            TaskResult& result = results[c];
            result.run = scored_run(*scorings[p], grid[c], oracles[p], true);
            Rng rng(mix_seed(config.seed, rank_salt(expert_count + c, p)));
            std::vector<int> ranks;
            ranks.reserve(result.run.combined.size());
            for (std::size_t t = 0; t < result.run.combined.size(); ++t) {
                ranks.push_back(rank_among(decile_values(result.run.combined[t]),
                                           panel.observations[t], rng));
            }
            result.hist = build_histogram(ranks, 10);
            result.run.combined.clear();
        });

        for (std::size_t c = 0; c < grid.size(); ++c) {
            const AggregationRun& run = results[c].run;
            const std::string label = grid[c].label();
            for (int t = 1; t <= panel.days(); ++t) {
                const std::string& date = panel.dates[static_cast<std::size_t>(t - 1)];
                regret_csv.row(
                    {label, panel.location_id, std::to_string(panel.lead_time_h),
                     std::to_string(t), date, format_value(run.losses.loss_at(t)),
                     format_value(run.losses.cumulative_at(t)),
                     format_value(run.regret_best_expert[static_cast<std::size_t>(t - 1)]),
                     format_value(run.regret_best_constant[static_cast<std::size_t>(t - 1)])});
                for (std::size_t e = 0; e < panel.expert_count(); ++e) {
                    weights_csv.row({label, panel.location_id,
                                     std::to_string(panel.lead_time_h), std::to_string(t), date,
                                     panel.experts[e].name,
                                     format_value(
                                         run.weights[static_cast<std::size_t>(t - 1)][e])});
                }
            }
            const std::size_t slot = c * leads.size() + lead_index(panel.lead_time_h);
            lead_total[slot] += run.losses.total();
            lead_days[slot] += panel.days();
            lead_hists[slot].push_back(results[c].hist);
        }
    }
    regret_csv.finish();
    weights_csv.finish();

    CsvFile scatter(out_dir / "crps_vs_flat.csv");
    scatter.row({"label,kind,window,eta,lead_time_h,mean_crps,histograms,flat_proportion"});
    for (std::size_t c = 0; c < grid.size(); ++c) {
        for (std::size_t l = 0; l < leads.size(); ++l) {
            const std::size_t slot = c * leads.size() + l;
            if (lead_days[slot] == 0) continue;
            const FlatProportionResult flat = flat_proportion(lead_hists[slot], config.alpha);
            scatter.row({grid[c].label(), strategy_kind_name(grid[c].kind),
                         window_name(grid[c].window), eta_cell(grid[c]),
                         std::to_string(leads[l]),
                         format_value(lead_total[slot] / static_cast<double>(lead_days[slot])),
                         std::to_string(lead_hists[slot].size()),
                         format_value(flat.proportion)});
        }
    }
    scatter.finish();
}

void run_pipeline(const std::string& subcommand, const std::string& config_path,
                  const std::string& overrides_json) {
    const RunConfig config = load_run_config(config_path, overrides_json);
    if (subcommand == "simulate") {
        cmd_simulate(config);
    } else if (subcommand == "aggregate") {
        cmd_aggregate(config);
    } else if (subcommand == "verify") {
        cmd_verify(config);
    } else if (subcommand == "report") {
        cmd_report(config);
    } else {
        throw std::invalid_argument("unknown subcommand: " + subcommand);
    }
}

} // namespace cdfagg
