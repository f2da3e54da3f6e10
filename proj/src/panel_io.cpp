#include "cdfagg/panel.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cdfagg/errors.hpp"

namespace cdfagg {

Forecast Forecast::sample(std::vector<double> members) {
    StepwiseCdf cdf = StepwiseCdf::from_sample(members);
    return Forecast(ForecastKind::Sample, std::move(members), {}, std::move(cdf));
}

Forecast Forecast::quantiles(std::vector<double> values, std::vector<double> orders) {
    StepwiseCdf cdf = StepwiseCdf::from_quantiles(values, orders);
    return Forecast(ForecastKind::Quantiles, std::move(values), std::move(orders),
                    std::move(cdf));
}

std::vector<const StepwiseCdf*> ExpertPanel::cdfs_at(int t) const {
    if (t < 1 || t > days()) {
        throw std::invalid_argument("day index outside the panel");
    }
    std::vector<const StepwiseCdf*> out;
    out.reserve(experts.size());
    for (const ExpertSeries& series : experts) {
        out.push_back(&series.days[static_cast<std::size_t>(t - 1)].cdf);
    }
    return out;
}

void ExpertPanel::validate() const {
    if (dates.empty()) {
        throw alignment_error("panel has no days");
    }
    if (observations.size() != dates.size()) {
        throw alignment_error("panel observations misaligned with dates");
    }
    if (experts.empty()) {
        throw alignment_error("panel has no experts");
    }
    std::set<std::string> names;
    for (const ExpertSeries& series : experts) {
        if (!names.insert(series.name).second) {
            throw alignment_error("duplicate expert name: " + series.name);
        }
        if (series.days.size() != dates.size()) {
            throw alignment_error("expert " + series.name + " misaligned with panel days");
        }
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (parse_date(dates[i]) <= parse_date(dates[i - 1])) {
            throw alignment_error("panel dates must be strictly ascending");
        }
    }
}

long parse_date(const std::string& iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
        throw parse_error("malformed date: " + iso);
    }
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (iso[i] < '0' || iso[i] > '9') {
            throw parse_error("malformed date: " + iso);
        }
    }
    const int y = std::stoi(iso.substr(0, 4));
    const unsigned m = static_cast<unsigned>(std::stoi(iso.substr(5, 2)));
    const unsigned d = static_cast<unsigned>(std::stoi(iso.substr(8, 2)));
    if (m < 1 || m > 12 || d < 1 || d > 31) {
        throw parse_error("date out of range: " + iso);
    }
    // Days-from-civil (Howard Hinnant's algorithm).
    const long yy = y - (m <= 2 ? 1 : 0);
    const long era = (yy >= 0 ? yy : yy - 399) / 400;
    const unsigned long yoe = static_cast<unsigned long>(yy - era * 400);
    const unsigned long doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

namespace {

struct CsvReader {
    std::ifstream stream;
    std::string path;
    std::size_t line_no = 0;

    explicit CsvReader(const std::string& p) : stream(p), path(p) {
        if (!stream) {
            throw io_error("cannot open " + p);
        }
    }

    bool next(std::vector<std::string>& fields) {
        std::string line;
        if (!std::getline(stream, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        fields.clear();
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        return true;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw parse_error(path + ":" + std::to_string(line_no) + ": " + what);
    }
};

double parse_double(CsvReader& reader, const std::string& field, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) reader.fail(std::string("trailing characters in ") + what);
        return v;
    } catch (const std::exception&) {
        reader.fail(std::string("malformed ") + what + ": " + field);
    }
}

int parse_int(CsvReader& reader, const std::string& field, const char* what) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(field, &used);
        if (used != field.size()) reader.fail(std::string("trailing characters in ") + what);
        return v;
    } catch (const std::exception&) {
        reader.fail(std::string("malformed ") + what + ": " + field);
    }
}

struct GroupKey {
    std::string location;
    int lead = 0;
    auto operator<=>(const GroupKey&) const = default;
};

struct RawForecast {
    // index -> (value, order); order is NaN for sample rows
    std::map<int, std::pair<double, double>> rows;
    bool quantile = false;
};

} // namespace

std::vector<ExpertPanel> load_panels_csv(const std::string& forecasts_path,
                                         const std::string& observations_path) {
    // forecast data: group -> expert -> date -> rows
    std::map<GroupKey, std::map<std::string, std::map<std::string, RawForecast>>> forecasts;
    std::map<GroupKey, std::vector<std::string>> expert_order;

    {
        CsvReader reader(forecasts_path);
        std::vector<std::string> fields;
        if (!reader.next(fields)) reader.fail("empty file");
        const bool has_order = fields.size() == 8 && fields[7] == "order";
        const std::vector<std::string> expected = {"date",        "location_id", "lead_time_h",
                                                   "expert_name", "kind",        "index",
                                                   "value"};
        if (fields.size() != expected.size() + (has_order ? 1 : 0)) {
            reader.fail("unexpected forecast header");
        }
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (fields[i] != expected[i]) reader.fail("unexpected forecast header");
        }
        while (reader.next(fields)) {
            if (fields.size() == 1 && fields[0].empty()) continue; // trailing newline
            if (fields.size() != expected.size() + (has_order ? 1 : 0)) {
                reader.fail("wrong field count");
            }
            const std::string& date = fields[0];
            parse_date(date);
            const GroupKey key{fields[1], parse_int(reader, fields[2], "lead time")};
            const std::string& expert = fields[3];
            const std::string& kind = fields[4];
            const int index = parse_int(reader, fields[5], "index");
            const double value = parse_double(reader, fields[6], "value");

            RawForecast& raw = forecasts[key][expert][date];
            if (kind == "quantile") {
                if (!has_order) reader.fail("quantile row in a file without an order column");
                raw.quantile = true;
                const double order = parse_double(reader, fields[7], "order");
                if (!raw.rows.emplace(index, std::make_pair(value, order)).second) {
                    reader.fail("duplicate forecast row for expert " + expert + " on " + date);
                }
            } else if (kind == "sample") {
                if (has_order && !fields[7].empty()) reader.fail("sample row carries an order");
                if (!raw.rows.emplace(index, std::make_pair(value, 0.0)).second) {
                    reader.fail("duplicate forecast row for expert " + expert + " on " + date);
                }
            } else {
                reader.fail("unknown forecast kind: " + kind);
            }
            std::vector<std::string>& order_list = expert_order[key];
            if (std::find(order_list.begin(), order_list.end(), expert) == order_list.end()) {
                order_list.push_back(expert);
            }
        }
    }

    std::map<GroupKey, std::map<std::string, double>> observations;
    {
        CsvReader reader(observations_path);
        std::vector<std::string> fields;
        if (!reader.next(fields)) reader.fail("empty file");
        const std::vector<std::string> expected = {"date", "location_id", "lead_time_h",
                                                   "observed_value"};
        if (fields != expected) reader.fail("unexpected observation header");
        while (reader.next(fields)) {
            if (fields.size() == 1 && fields[0].empty()) continue;
            if (fields.size() != expected.size()) reader.fail("wrong field count");
            parse_date(fields[0]);
            const GroupKey key{fields[1], parse_int(reader, fields[2], "lead time")};
            const double value = parse_double(reader, fields[3], "observed value");
            if (!observations[key].emplace(fields[0], value).second) {
                reader.fail("duplicate observation on " + fields[0]);
            }
        }
    }

    if (forecasts.empty()) {
        throw alignment_error(forecasts_path + ": no forecast rows");
    }

    std::vector<ExpertPanel> panels;
    for (auto& [key, by_expert] : forecasts) {
        const auto obs_it = observations.find(key);
        if (obs_it == observations.end()) {
            throw alignment_error("no observations for location " + key.location +
                                  " lead " + std::to_string(key.lead));
        }
        const std::map<std::string, double>& obs = obs_it->second;

        // The panel timeline is the union of dates seen in either file.
        std::set<std::string> date_set;
        for (const auto& [expert, by_date] : by_expert) {
            for (const auto& [date, raw] : by_date) date_set.insert(date);
        }
        for (const auto& [date, value] : obs) date_set.insert(date);

        ExpertPanel panel;
        panel.location_id = key.location;
        panel.lead_time_h = key.lead;
        panel.dates.assign(date_set.begin(), date_set.end());
        std::sort(panel.dates.begin(), panel.dates.end(),
                  [](const std::string& a, const std::string& b) {
                      return parse_date(a) < parse_date(b);
                  });

        for (const std::string& date : panel.dates) {
            const auto it = obs.find(date);
            if (it == obs.end()) {
                throw alignment_error("missing observation for location " + key.location +
                                      " lead " + std::to_string(key.lead) + " on " + date);
            }
            panel.observations.push_back(it->second);
        }

        for (const std::string& expert : expert_order[key]) {
            const std::map<std::string, RawForecast>& by_date = by_expert[expert];
            ExpertSeries series;
            series.name = expert;
            for (const std::string& date : panel.dates) {
                const auto it = by_date.find(date);
                if (it == by_date.end()) {
                    throw alignment_error("missing forecast from expert " + expert + " on " +
                                          date);
                }
                const RawForecast& raw = it->second;
                std::vector<double> values;
                values.reserve(raw.rows.size());
                try {
                    if (raw.quantile) {
                        std::vector<double> orders;
                        orders.reserve(raw.rows.size());
                        for (const auto& [index, row] : raw.rows) {
                            values.push_back(row.first);
                            orders.push_back(row.second);
                        }
                        series.days.push_back(
                            Forecast::quantiles(std::move(values), std::move(orders)));
                    } else {
                        for (const auto& [index, row] : raw.rows) values.push_back(row.first);
                        series.days.push_back(Forecast::sample(std::move(values)));
                    }
                } catch (const std::invalid_argument& e) {
                    throw parse_error("forecast from expert " + expert + " on " + date + ": " +
                                      e.what());
                }
            }
            panel.experts.push_back(std::move(series));
        }
        panel.validate();
        panels.push_back(std::move(panel));
    }
    return panels;
}

ExpertPanel load_panel_csv(const std::string& forecasts_path,
                           const std::string& observations_path) {
    std::vector<ExpertPanel> panels = load_panels_csv(forecasts_path, observations_path);
    if (panels.size() != 1) {
        throw alignment_error(forecasts_path + ": expected exactly one panel, found " +
                              std::to_string(panels.size()));
    }
    return std::move(panels.front());
}

void write_panels_csv(const std::vector<ExpertPanel>& panels,
                      const std::string& forecasts_path,
                      const std::string& observations_path) {
    bool any_quantile = false;
    for (const ExpertPanel& panel : panels) {
        panel.validate();
        for (const ExpertSeries& series : panel.experts) {
            for (const Forecast& fc : series.days) {
                if (fc.kind == ForecastKind::Quantiles) any_quantile = true;
            }
        }
    }

    std::ofstream fout(forecasts_path);
    if (!fout) throw io_error("cannot write " + forecasts_path);
    fout << "date,location_id,lead_time_h,expert_name,kind,index,value";
    if (any_quantile) fout << ",order";
    fout << "\n";
    for (const ExpertPanel& panel : panels) {
        for (std::size_t t = 0; t < panel.dates.size(); ++t) {
            for (const ExpertSeries& series : panel.experts) {
                const Forecast& fc = series.days[t];
                for (std::size_t i = 0; i < fc.values.size(); ++i) {
                    fout << panel.dates[t] << ',' << panel.location_id << ','
                         << panel.lead_time_h << ',' << series.name << ','
                         << (fc.kind == ForecastKind::Sample ? "sample" : "quantile") << ','
                         << (i + 1) << ',' << format_value(fc.values[i]);
                    if (any_quantile) {
                        fout << ',';
                        if (fc.kind == ForecastKind::Quantiles) {
                            fout << format_value(fc.orders[i]);
                        }
                    }
                    fout << "\n";
                }
            }
        }
    }
    if (!fout) throw io_error("failed writing " + forecasts_path);

    std::ofstream oout(observations_path);
    if (!oout) throw io_error("cannot write " + observations_path);
    oout << "date,location_id,lead_time_h,observed_value\n";
    for (const ExpertPanel& panel : panels) {
        for (std::size_t t = 0; t < panel.dates.size(); ++t) {
            oout << panel.dates[t] << ',' << panel.location_id << ',' << panel.lead_time_h
                 << ',' << format_value(panel.observations[t]) << "\n";
        }
    }
    if (!oout) throw io_error("failed writing " + observations_path);
}

} // namespace cdfagg
