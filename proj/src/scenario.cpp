#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <nlohmann/json.hpp>

#include "cdfagg/errors.hpp"
#include "cdfagg/experts.hpp"

namespace cdfagg {

namespace {

const boost::math::normal_distribution<double> kUnitNormal{};

std::string iso_of_serial(long serial);

// Distorted predictive distribution one expert issues for one day.
struct Predictive {
    double mu = 0.0;
    double sd = 1.0;
    bool truncated_square = false; // values are squares of a truncated normal
};

double predictive_quantile(const Predictive& pred, double tau) {
    if (pred.truncated_square) {
        if (tau == 0.0) return 0.0;
        const double q = truncnorm_quantile(tau, pred.mu, pred.sd);
        return q * q;
    }
    return pred.mu + pred.sd * boost::math::quantile(kUnitNormal, tau);
}

double predictive_draw(const Predictive& pred, Rng& rng) {
    if (pred.truncated_square) {
        const double z = truncnorm_quantile(rng.uniform01(), pred.mu, pred.sd);
        return z * z;
    }
    return pred.mu + pred.sd * rng.normal();
}

ExpertPanel generate_panel(const ScenarioSpec& spec, const std::string& location_id,
                           int lead_time_h, Rng& rng) {
    ExpertPanel panel;
    panel.location_id = location_id;
    panel.lead_time_h = lead_time_h;
    panel.experts.resize(spec.experts.size());
    for (std::size_t e = 0; e < spec.experts.size(); ++e) {
        panel.experts[e].name = spec.experts[e].name;
        panel.experts[e].days.reserve(static_cast<std::size_t>(spec.days));
    }

    const long start_serial = parse_date(spec.start_date);
    const double var_signal = spec.sigma_signal * spec.sigma_signal;

    for (int t = 1; t <= spec.days; ++t) {
        panel.dates.push_back(iso_of_serial(start_serial + t - 1));
        const double signal = spec.mu + spec.sigma_signal * rng.normal();

        double obs;
        if (spec.family == ObsFamily::TruncNormalSquare) {
            const double z = truncnorm_quantile(rng.uniform01(), signal, spec.sigma_noise);
            obs = z * z;
        } else {
            obs = signal + spec.sigma_noise * rng.normal();
        }
        panel.observations.push_back(obs);

        for (std::size_t e = 0; e < spec.experts.size(); ++e) {
            const ExpertSpec& ex = spec.experts[e];
            const bool after = spec.switch_day && t >= *spec.switch_day;
            const double bias = after && ex.bias_after ? *ex.bias_after : ex.bias;
            const double dispersion =
                after && ex.dispersion_after ? *ex.dispersion_after : ex.dispersion;

            Predictive pred;
            if (spec.family == ObsFamily::TruncNormalSquare) {
                pred.truncated_square = true;
                pred.mu = signal + bias;
                pred.sd = dispersion * spec.sigma_noise;
            } else {
                // The expert sees the signal through a noisy channel and
                // issues the exact conditional law of the observation
                // given that channel, so zero bias and unit dispersion
                // give a reliable forecast at any channel noise.
                const double channel = signal + ex.sigma_info * rng.normal();
                const double var_info = ex.sigma_info * ex.sigma_info;
                const double shrink = var_signal / (var_signal + var_info);
                const double post_mean = spec.mu + shrink * (channel - spec.mu);
                const double post_var = var_signal * var_info / (var_signal + var_info);
                pred.mu = post_mean + bias;
                pred.sd = dispersion *
                          std::sqrt(post_var + spec.sigma_noise * spec.sigma_noise);
            }

            if (ex.kind == ForecastKind::Sample) {
                std::vector<double> members(static_cast<std::size_t>(ex.members));
                for (double& m : members) m = predictive_draw(pred, rng);
                panel.experts[e].days.push_back(Forecast::sample(std::move(members)));
            } else {
                const std::vector<double>* orders = &ex.orders;
                static const std::vector<double> deciles = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                            0.6, 0.7, 0.8, 0.9};
                if (orders->empty()) orders = &deciles;
                std::vector<double> values;
                values.reserve(orders->size());
                for (double tau : *orders) values.push_back(predictive_quantile(pred, tau));
                panel.experts[e].days.push_back(
                    Forecast::quantiles(std::move(values), *orders));
            }
        }
    }
    panel.validate();
    return panel;
}

} // namespace

void ScenarioSpec::validate() const {
    if (days < 1) throw std::invalid_argument("scenario needs days >= 1");
    if (locations < 1) throw std::invalid_argument("scenario needs locations >= 1");
    if (lead_times.empty()) throw std::invalid_argument("scenario needs a lead time");
    if (experts.empty()) throw std::invalid_argument("scenario needs at least one expert");
    if (!(sigma_signal >= 0.0) || !(sigma_noise > 0.0)) {
        throw std::invalid_argument("scenario needs sigma_signal >= 0 and sigma_noise > 0");
    }
    if (switch_day && (*switch_day < 1 || *switch_day > days)) {
        throw std::invalid_argument("switch day outside the scenario period");
    }
    for (const ExpertSpec& ex : experts) {
        if (ex.name.empty()) throw std::invalid_argument("expert names must be non-empty");
        if (ex.kind == ForecastKind::Sample && ex.members < 1) {
            throw std::invalid_argument("sample experts need at least one member");
        }
        if (!(ex.dispersion > 0.0) ||
            (ex.dispersion_after && !(*ex.dispersion_after > 0.0))) {
            throw std::invalid_argument("dispersion must be positive");
        }
        if (ex.sigma_info < 0.0) throw std::invalid_argument("sigma_info must be >= 0");
        if (family == ObsFamily::TruncNormalSquare && ex.sigma_info != 0.0) {
            throw std::invalid_argument(
                "sigma_info is only supported by the gaussian-info family");
        }
    }
}

std::vector<ExpertPanel> generate_scenario(const ScenarioSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::vector<ExpertPanel> panels;
    panels.reserve(static_cast<std::size_t>(spec.locations) * spec.lead_times.size());
    for (int loc = 0; loc < spec.locations; ++loc) {
        const std::string location_id = "L" + std::to_string(loc + 1);
        for (std::size_t li = 0; li < spec.lead_times.size(); ++li) {
            // Independent stream per (location, lead time) pair.
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(loc) * 4096u + li));
            panels.push_back(generate_panel(spec, location_id, spec.lead_times[li], rng));
        }
    }
    return panels;
}

namespace {

std::string iso_of_serial(long serial) {
    // Civil-from-days (Howard Hinnant's algorithm), serial relative to
    // 1970-01-01.
    long z = serial + 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned long doe = static_cast<unsigned long>(z - era * 146097);
    const unsigned long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned long mp = (5 * doy + 2) / 153;
    const unsigned long d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned long m = mp < 10 ? mp + 3 : mp - 9;
    const long year = m <= 2 ? y + 1 : y;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04ld-%02lu-%02lu", year, m, d);
    return buf;
}

ForecastKind parse_kind(const std::string& kind) {
    if (kind == "sample") return ForecastKind::Sample;
    if (kind == "quantile") return ForecastKind::Quantiles;
    throw parse_error("unknown forecast kind: " + kind);
}

} // namespace

ScenarioSpec parse_scenario_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("scenario JSON: ") + e.what());
    }
    try {
        ScenarioSpec spec;
        spec.days = doc.at("days").get<int>();
        const std::string family = doc.value("family", std::string("truncnorm_sq"));
        if (family == "truncnorm_sq") {
            spec.family = ObsFamily::TruncNormalSquare;
        } else if (family == "gaussian_info") {
            spec.family = ObsFamily::GaussianInfo;
        } else {
            throw parse_error("unknown observation family: " + family);
        }
        spec.mu = doc.value("mu", spec.mu);
        spec.sigma_signal = doc.value("sigma_signal", spec.sigma_signal);
        spec.sigma_noise = doc.value("sigma_noise", spec.sigma_noise);
        spec.locations = doc.value("locations", spec.locations);
        if (doc.contains("lead_times")) {
            spec.lead_times = doc.at("lead_times").get<std::vector<int>>();
        }
        if (doc.contains("switch_day") && !doc.at("switch_day").is_null()) {
            spec.switch_day = doc.at("switch_day").get<int>();
        }
        spec.start_date = doc.value("start_date", spec.start_date);
        for (const nlohmann::json& je : doc.at("experts")) {
            ExpertSpec ex;
            ex.name = je.at("name").get<std::string>();
            ex.kind = parse_kind(je.value("kind", std::string("sample")));
            ex.members = je.value("members", ex.members);
            if (je.contains("orders")) {
                ex.orders = je.at("orders").get<std::vector<double>>();
            }
            ex.bias = je.value("bias", 0.0);
            ex.dispersion = je.value("dispersion", 1.0);
            ex.sigma_info = je.value("sigma_info", 0.0);
            if (je.contains("bias_after") && !je.at("bias_after").is_null()) {
                ex.bias_after = je.at("bias_after").get<double>();
            }
            if (je.contains("dispersion_after") && !je.at("dispersion_after").is_null()) {
                ex.dispersion_after = je.at("dispersion_after").get<double>();
            }
            spec.experts.push_back(std::move(ex));
        }
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("scenario JSON: ") + e.what());
    }
}

} // namespace cdfagg
