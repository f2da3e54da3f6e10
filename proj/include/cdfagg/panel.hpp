#pragma once

#include <string>
#include <vector>

#include "cdfagg/stepwise_cdf.hpp"

namespace cdfagg {

enum class ForecastKind { Sample, Quantiles };

// One forecast distribution for one day, keeping the values it was
// issued as (members or quantiles) alongside the derived step CDF.
struct Forecast {
    static Forecast sample(std::vector<double> members);
    static Forecast quantiles(std::vector<double> values, std::vector<double> orders);

    ForecastKind kind;
    std::vector<double> values;
    std::vector<double> orders; // quantile forecasts only
    StepwiseCdf cdf;

private:
    Forecast(ForecastKind kind, std::vector<double> values, std::vector<double> orders,
             StepwiseCdf cdf)
        : kind(kind), values(std::move(values)), orders(std::move(orders)), cdf(std::move(cdf)) {}
};

struct ExpertSeries {
    std::string name;
    std::vector<Forecast> days; // one per panel day, aligned with dates
};

// Aligned forecast/observation series for one location and lead time:
// every expert has a forecast for every day and every day has an
// observation. Day indices are 1-based in the API.
struct ExpertPanel {
    std::string location_id;
    int lead_time_h = 0;
    std::vector<std::string> dates; // ISO-8601, strictly ascending
    std::vector<double> observations;
    std::vector<ExpertSeries> experts;

    int days() const { return static_cast<int>(dates.size()); }
    std::size_t expert_count() const { return experts.size(); }
    // Forecast CDFs of all experts for day t (1-based).
    std::vector<const StepwiseCdf*> cdfs_at(int t) const;
    void validate() const;
};

// Reads a forecast/observation CSV pair into one panel per
// (location, lead time) group, ordered by location then lead time.
// Forecast columns: date,location_id,lead_time_h,expert_name,kind,index,
// value[,order]; observation columns: date,location_id,lead_time_h,
// observed_value. Any missing (expert, day) pair, missing observation,
// or duplicate row is an alignment error naming the offender.
std::vector<ExpertPanel> load_panels_csv(const std::string& forecasts_path,
                                         const std::string& observations_path);

// Convenience wrapper for files holding exactly one panel.
ExpertPanel load_panel_csv(const std::string& forecasts_path,
                           const std::string& observations_path);

// Writes panels in the format load_panels_csv reads, values with nine
// significant digits. A second write of what was read back reproduces
// the files byte for byte.
void write_panels_csv(const std::vector<ExpertPanel>& panels,
                      const std::string& forecasts_path,
                      const std::string& observations_path);

// Serial day number of an ISO-8601 date (days since 1970-01-01);
// rejects malformed dates.
long parse_date(const std::string& iso);

// Formats a double with nine significant digits, the panel CSV format.
std::string format_value(double v);

} // namespace cdfagg
