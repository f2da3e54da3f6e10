#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdfagg/aggregation.hpp"
#include "cdfagg/panel.hpp"

namespace cdfagg {

// Cross product of strategy kinds and windows, crossed with the learning
// rates for the strategies that use one.
struct StrategyGrid {
    std::vector<StrategyKind> kinds;
    std::vector<Window> windows;
    std::vector<double> etas;
    double reli_threshold = 0.1;

    std::vector<StrategyConfig> expand() const;
};

// All five kinds; windows 7, 15, 30, 90, 365 and all-past; learning
// rates 10^-1.5, 10^-1, 10^-0.5, 1, 10^0.5, 10^1.5, 10^2.
StrategyGrid default_strategy_grid();

// Pipeline configuration, read from a JSON file with overrides applied
// on top (the command line merges flags and environment before passing
// them down). Input panels come from forecasts/observations when given,
// otherwise from <out>/forecasts.csv and <out>/observations.csv as
// written by simulate.
struct RunConfig {
    std::optional<std::string> scenario_path;
    std::optional<std::string> forecasts_path;
    std::optional<std::string> observations_path;
    StrategyGrid strategies = default_strategy_grid();
    double alpha = 0.01;
    std::string out = "out";
    std::uint64_t seed = 1;
    int jobs = 1;
};

// Loads the JSON config file; overrides_json may carry seed, out and
// jobs keys that replace the file values ("" or "{}" for none). Unknown
// keys in either document are rejected.
RunConfig load_run_config(const std::string& config_path, const std::string& overrides_json);

// Generates the configured scenario and writes forecasts.csv,
// observations.csv and manifest.json into the output directory.
void cmd_simulate(const RunConfig& config);

// Runs every strategy configuration on every panel and writes
// summary.csv, oracles.csv and one per-day detail file per
// (configuration, panel) under runs/.
void cmd_aggregate(const RunConfig& config);

// Rank histograms and flatness tests for every expert and every strategy
// configuration: histograms.csv, jp_pvalues.csv and flatness.csv, with
// the Benjamini-Hochberg family pooled per (system, lead time) across
// locations.
void cmd_verify(const RunConfig& config);

// Time-resolved regret and weight trajectories plus the skill/flatness
// scatter: regret_vs_time.csv, weights_vs_time.csv, crps_vs_flat.csv.
void cmd_report(const RunConfig& config);

// Dispatches one of the subcommands above by name.
void run_pipeline(const std::string& subcommand, const std::string& config_path,
                  const std::string& overrides_json);

} // namespace cdfagg
