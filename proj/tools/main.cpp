#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cdfagg/cdfagg.h"

namespace {

const char* status_category(cdfagg_status status) {
    switch (status) {
        case CDFAGG_OK: return "ok";
        case CDFAGG_INVALID_ARGUMENT: return "invalid_argument";
        case CDFAGG_PARSE: return "parse";
        case CDFAGG_IO: return "io";
        case CDFAGG_ALIGNMENT: return "alignment";
        case CDFAGG_NO_CONVERGENCE: return "no_convergence";
        case CDFAGG_INTERNAL: return "internal";
    }
    return "internal";
}

void print_error(const char* category, const std::string& message) {
    nlohmann::json doc;
    doc["error"]["category"] = category;
    doc["error"]["message"] = message;
    std::cerr << doc.dump() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online convex aggregation of step-CDF forecasts under CRPS"};
    app.set_version_flag("--version", cdfagg_version());
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Master seed (overrides the config)")
            ->envname("CDFAGG_SEED");
        sub->add_option("--out", out, "Output directory (overrides the config)")
            ->envname("CDFAGG_OUT");
        sub->add_option("--jobs", jobs, "Worker threads (overrides the config)")
            ->envname("CDFAGG_JOBS");
    };
    add_common(app.add_subcommand(
        "simulate", "Generate the configured scenario into forecast/observation CSVs"));
    add_common(app.add_subcommand(
        "aggregate", "Run the strategy grid and write per-day details, summary and oracles"));
    add_common(app.add_subcommand(
        "verify", "Rank histograms and flatness tests for experts and strategies"));
    add_common(app.add_subcommand(
        "report", "Regret and weight trajectories plus the skill/flatness scatter"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("invalid_argument", e.what());
        return CDFAGG_INVALID_ARGUMENT;
    }

    nlohmann::json overrides = nlohmann::json::object();
    if (seed) overrides["seed"] = *seed;
    if (out) overrides["out"] = *out;
    if (jobs) overrides["jobs"] = *jobs;

    const std::string subcommand = app.get_subcommands().front()->get_name();
    const cdfagg_status status =
        cdfagg_pipeline(subcommand.c_str(), config_path.c_str(), overrides.dump().c_str());
    if (status != CDFAGG_OK) {
        print_error(status_category(status), cdfagg_last_error());
        return status;
    }
    return 0;
}
