#pragma once

// Hourly renewable-generation and grid-price signals: CSV ingestion,
// per-turbine normalization, the solar profile, seeded synthetic
// generators, and discretization into a small number of levels.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "evq/domain.hpp"
#include "evq/errors.hpp"

namespace evq {

enum class Unit { kWh, EurPerKwh };

inline const char* to_string(Unit u) { return u == Unit::kWh ? "kWh" : "eur_per_kWh"; }

struct HourlyRecord {
    int day = 0;
    int hour = 0;
    double value = 0.0;

    friend bool operator==(const HourlyRecord&, const HourlyRecord&) = default;
};

/// Day-major hourly values: record i sits at day first_day + i/24, hour i%24.
class HourlySeries {
public:
    HourlySeries() = default;

    HourlySeries(Unit unit, int first_day, std::vector<double> values)
        : unit_(unit), first_day_(first_day), values_(std::move(values)) {
        if (values_.size() % kHoursPerDay != 0) {
            throw DataError("hourly series length must be a whole number of days");
        }
        for (double v : values_) {
            if (!(v >= 0.0)) throw DataError("hourly series values must be non-negative");
        }
    }

    Unit unit() const { return unit_; }
    int first_day() const { return first_day_; }
    int days() const { return static_cast<int>(values_.size() / kHoursPerDay); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    const std::vector<double>& values() const { return values_; }

    double at(int day, int hour) const {
        const int d = day - first_day_;
        if (d < 0 || d >= days() || hour < 0 || hour >= kHoursPerDay) {
            throw DomainError("hourly series index out of range");
        }
        return values_[static_cast<std::size_t>(d) * kHoursPerDay + static_cast<std::size_t>(hour)];
    }

    std::vector<HourlyRecord> records() const {
        std::vector<HourlyRecord> out;
        out.reserve(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) {
            out.push_back({first_day_ + static_cast<int>(i / kHoursPerDay),
                           static_cast<int>(i % kHoursPerDay), values_[i]});
        }
        return out;
    }

    /// Days [from, from + count) as a new series.
    HourlySeries slice(int from, int count) const {
        if (count < 0 || from < first_day_ || from + count > first_day_ + days()) {
            throw DomainError("hourly series slice out of range");
        }
        auto begin = values_.begin() + static_cast<std::ptrdiff_t>(from - first_day_) * kHoursPerDay;
        return HourlySeries(unit_, from, std::vector<double>(begin, begin + count * kHoursPerDay));
    }

private:
    Unit unit_ = Unit::kWh;
    int first_day_ = 0;
    std::vector<double> values_;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline double parse_real(const std::string& text, std::size_t row, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw DataError("row " + std::to_string(row) + ": malformed " + what + " '" + text + "'");
    }
}

} // namespace detail

/// Parses `day,hour,value` CSV text. Half-hourly rows (hour = h or h + 0.5)
/// are averaged into hour h. Every hour of every day between the first and
/// last day must be present.
inline HourlySeries parse_hourly_series(std::istream& in, Unit unit) {
    std::string line;
    std::size_t row = 0;
    bool header_seen = false;
    // (day, hour) -> values found in that hour, keyed by half-hour index
    std::map<std::pair<int, int>, std::map<int, double>> buckets;

    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (row == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"day", "hour", "value"}) {
                throw DataError("row " + std::to_string(row) + ": expected header 'day,hour,value'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 3) {
            throw DataError("row " + std::to_string(row) + ": expected 3 fields, got " +
                            std::to_string(fields.size()));
        }
        const double day_real = detail::parse_real(fields[0], row, "day");
        const double hour_real = detail::parse_real(fields[1], row, "hour");
        const double value = detail::parse_real(fields[2], row, "value");
        if (day_real < 0 || day_real != std::floor(day_real)) {
            throw DataError("row " + std::to_string(row) + ": day must be a non-negative integer");
        }
        if (hour_real < 0 || hour_real >= kHoursPerDay || hour_real * 2 != std::floor(hour_real * 2)) {
            throw DataError("row " + std::to_string(row) + ": hour must be in [0,24) on a 0.5 grid");
        }
        if (value < 0) {
            throw DataError("row " + std::to_string(row) + ": negative value");
        }
        const int day = static_cast<int>(day_real);
        const int half = static_cast<int>(hour_real * 2);
        auto& bucket = buckets[{day, half / 2}];
        if (!bucket.emplace(half % 2, value).second) {
            throw DataError("row " + std::to_string(row) + ": duplicate timestamp");
        }
    }
    if (!header_seen) throw DataError("empty hourly series file");
    if (buckets.empty()) throw DataError("hourly series file has no data rows");

    const int first_day = buckets.begin()->first.first;
    const int last_day = buckets.rbegin()->first.first;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(last_day - first_day + 1) * kHoursPerDay);
    for (int d = first_day; d <= last_day; ++d) {
        for (int h = 0; h < kHoursPerDay; ++h) {
            const auto it = buckets.find({d, h});
            if (it == buckets.end()) {
                throw DataError("missing data for day " + std::to_string(d) + " hour " + std::to_string(h));
            }
            double sum = 0.0;
            for (const auto& [_, v] : it->second) sum += v;
            values.push_back(sum / static_cast<double>(it->second.size()));
        }
    }
    return HourlySeries(unit, first_day, std::move(values));
}

inline HourlySeries load_hourly_series(const std::string& path, Unit unit) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return parse_hourly_series(in, unit);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void write_hourly_series(std::ostream& out, const HourlySeries& s) {
    out << "day,hour,value\n";
    char buf[64];
    for (const auto& r : s.records()) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", r.day, r.hour, r.value);
        out << buf;
    }
}

/// National wind output to per-turbine output.
inline HourlySeries normalize_wind(const HourlySeries& series, int turbine_count) {
    if (turbine_count <= 0) throw DomainError("normalize_wind: turbine_count must be positive");
    std::vector<double> v = series.values();
    const double n = static_cast<double>(turbine_count);
    for (double& x : v) x /= n;
    return HourlySeries(series.unit(), series.first_day(), std::move(v));
}

/// Average-day solar output (kWh per hour bucket) for a panel producing
/// `annual_kwh` per 365-day year, shaped as a normal density centred on
/// `peak_hour` and evaluated at bucket midpoints.
inline std::array<double, kHoursPerDay> solar_profile(double annual_kwh, double peak_hour, double sigma) {
    if (!(sigma > 0.0)) throw DomainError("solar_profile: sigma must be positive");
    if (!(annual_kwh >= 0.0)) throw DomainError("solar_profile: annual_kwh must be non-negative");
    std::array<double, kHoursPerDay> w{};
    double total = 0.0;
    for (int h = 0; h < kHoursPerDay; ++h) {
        const double z = (h + 0.5 - peak_hour) / sigma;
        w[h] = std::exp(-0.5 * z * z);
        total += w[h];
    }
    const double daily = annual_kwh / 365.0;
    for (double& x : w) x = total > 0.0 ? x / total * daily : 0.0;
    return w;
}

/// Per-turbine wind plus the solar profile, hour by hour.
inline HourlySeries combine_renewables(const HourlySeries& wind_per_turbine,
                                       const std::array<double, kHoursPerDay>& solar) {
    std::vector<double> v = wind_per_turbine.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += solar[i % kHoursPerDay];
    return HourlySeries(Unit::kWh, wind_per_turbine.first_day(), std::move(v));
}

inline double kwh_to_soc_points(double kwh, double battery_capacity_kwh) {
    return kwh / battery_capacity_kwh * 100.0;
}

inline double eur_per_kwh_to_eur_per_point(double eur_per_kwh, double battery_capacity_kwh) {
    return eur_per_kwh * battery_capacity_kwh / 100.0;
}

/// Discretizes a real signal into `level_values.size()` levels. A value
/// equal to a threshold belongs to the upper level.
struct LevelCodec {
    std::vector<double> thresholds;
    std::vector<double> level_values;

    std::size_t levels() const { return level_values.size(); }

    std::size_t level_of(double x) const {
        return static_cast<std::size_t>(std::upper_bound(thresholds.begin(), thresholds.end(), x) -
                                        thresholds.begin());
    }

    double value_of(std::size_t level) const {
        if (level >= level_values.size()) throw DomainError("level index out of range");
        return level_values[level];
    }

    void validate() const {
        if (level_values.size() < 2 || thresholds.size() + 1 != level_values.size()) {
            throw DomainError("level codec needs >= 2 levels and one fewer thresholds");
        }
        for (std::size_t i = 1; i < thresholds.size(); ++i) {
            if (!(thresholds[i - 1] < thresholds[i])) throw DomainError("level thresholds must increase");
        }
        if (!std::is_sorted(level_values.begin(), level_values.end())) {
            throw DomainError("level values must be ascending");
        }
    }

    friend bool operator==(const LevelCodec&, const LevelCodec&) = default;
};

namespace detail {

// Linear-interpolation sample quantile over sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace detail

/// Equal-mass levels: thresholds at the i/level_count quantiles, each level
/// represented by the mean of the samples that fall in it.
inline LevelCodec fit_levels(const std::vector<double>& samples, std::size_t level_count) {
    if (level_count < 2) throw DomainError("fit_levels: need at least 2 levels");
    if (samples.empty()) throw DomainError("fit_levels: empty series");
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());

    LevelCodec codec;
    for (std::size_t i = 1; i < level_count; ++i) {
        const double t = detail::quantile_sorted(sorted, static_cast<double>(i) / static_cast<double>(level_count));
        if (!codec.thresholds.empty() && !(t > codec.thresholds.back())) {
            throw DataError("fit_levels: degenerate levels (series has too few distinct values)");
        }
        codec.thresholds.push_back(t);
    }
    std::vector<double> sum(level_count, 0.0);
    std::vector<std::size_t> count(level_count, 0);
    for (double x : sorted) {
        const std::size_t l = codec.level_of(x);
        sum[l] += x;
        ++count[l];
    }
    for (std::size_t l = 0; l < level_count; ++l) {
        if (count[l] == 0) {
            throw DataError("fit_levels: degenerate levels (series has too few distinct values)");
        }
        codec.level_values.push_back(sum[l] / static_cast<double>(count[l]));
    }
    return codec;
}

inline LevelCodec fit_levels(const HourlySeries& series, std::size_t level_count) {
    return fit_levels(series.values(), level_count);
}

/// Discretized r(t) and p(t). The values are the level representatives in
/// station units: SOC-points for r, euro per SOC-point for p.
struct ExogenousObservation {
    std::size_t r_level = 0;
    std::size_t p_level = 0;
    double r_value = 0.0;
    double p_value = 0.0;

    friend bool operator==(const ExogenousObservation&, const ExogenousObservation&) = default;
};

/// Codecs are expected in station units (see the converters above).
inline ExogenousObservation encode_observation(const LevelCodec& codec_r, const LevelCodec& codec_p,
                                               double r_kwh, double p_eur_kwh, double battery_capacity_kwh) {
    if (r_kwh < 0.0 || p_eur_kwh < 0.0) throw DomainError("encode_observation: negative input");
    if (!(battery_capacity_kwh > 0.0)) throw DomainError("encode_observation: battery capacity must be positive");
    ExogenousObservation obs;
    obs.r_level = codec_r.level_of(kwh_to_soc_points(r_kwh, battery_capacity_kwh));
    obs.p_level = codec_p.level_of(eur_per_kwh_to_eur_per_point(p_eur_kwh, battery_capacity_kwh));
    obs.r_value = codec_r.value_of(obs.r_level);
    obs.p_value = codec_p.value_of(obs.p_level);
    return obs;
}

/// Observations for consecutive days, replayed by day index.
class ObservationTrack {
public:
    ObservationTrack() = default;
    explicit ObservationTrack(std::vector<std::array<ExogenousObservation, kHoursPerDay>> days)
        : days_(std::move(days)) {}

    int days() const { return static_cast<int>(days_.size()); }
    bool empty() const { return days_.empty(); }

    const ExogenousObservation& at(int day, int hour) const {
        if (day < 0 || day >= days() || hour < 0 || hour >= kHoursPerDay) {
            throw DomainError("observation track index out of range");
        }
        return days_[static_cast<std::size_t>(day)][static_cast<std::size_t>(hour)];
    }

    /// The observation one hour later; the last day wraps to the first.
    const ExogenousObservation& next(int day, int hour) const {
        return hour + 1 < kHoursPerDay ? at(day, hour + 1) : at((day + 1) % days(), 0);
    }

    /// Every hour of `days` copies of `obs`.
    static ObservationTrack constant(int days, const ExogenousObservation& obs) {
        std::array<ExogenousObservation, kHoursPerDay> day;
        day.fill(obs);
        return ObservationTrack(std::vector(static_cast<std::size_t>(days), day));
    }

private:
    std::vector<std::array<ExogenousObservation, kHoursPerDay>> days_;
};

/// Encodes aligned renewable (kWh) and price (euro/kWh) series hour by hour.
inline ObservationTrack encode_track(const LevelCodec& codec_r, const LevelCodec& codec_p,
                                     const HourlySeries& r_kwh, const HourlySeries& p_eur_kwh,
                                     double battery_capacity_kwh) {
    if (r_kwh.days() != p_eur_kwh.days()) throw DataError("renewable and price series cover different days");
    std::vector<std::array<ExogenousObservation, kHoursPerDay>> days(static_cast<std::size_t>(r_kwh.days()));
    for (int d = 0; d < r_kwh.days(); ++d) {
        for (int h = 0; h < kHoursPerDay; ++h) {
            days[static_cast<std::size_t>(d)][static_cast<std::size_t>(h)] =
                encode_observation(codec_r, codec_p, r_kwh.at(r_kwh.first_day() + d, h),
                                   p_eur_kwh.at(p_eur_kwh.first_day() + d, h), battery_capacity_kwh);
        }
    }
    return ObservationTrack(std::move(days));
}

/// Observation built directly from level values; used by tests and toy setups.
inline ExogenousObservation make_observation(double r_points, double p_per_point) {
    return ExogenousObservation{0, 0, r_points, p_per_point};
}

// ---------------------------------------------------------------------------
// Synthetic signals. Used when no CSV files are configured.

struct SyntheticWindParams {
    int turbine_count = 4058;
    double mean_kwh_per_turbine = 1.5; // hourly mean after normalization
    double persistence = 0.9;          // AR(1) coefficient of the latent driver
    double volatility = 0.5;           // log-scale standard deviation
};

/// National-scale hourly wind output (kWh), i.e. before normalize_wind.
inline HourlySeries synthetic_wind(int days, std::uint64_t seed, const SyntheticWindParams& p = {}) {
    if (days < 0) throw DomainError("synthetic_wind: negative day count");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double innov = std::sqrt(1.0 - p.persistence * p.persistence);
    const double bias = 0.5 * p.volatility * p.volatility;
    double z = noise(rng);
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(days) * kHoursPerDay);
    for (int i = 0; i < days * kHoursPerDay; ++i) {
        z = p.persistence * z + innov * noise(rng);
        v.push_back(p.turbine_count * p.mean_kwh_per_turbine * std::exp(p.volatility * z - bias));
    }
    return HourlySeries(Unit::kWh, 0, std::move(v));
}

struct SyntheticPriceParams {
    double base = 0.095;        // euro per kWh overnight
    double morning_peak = 0.03; // extra at 9h
    double evening_peak = 0.05; // extra at 19h
    double day_noise = 0.01;    // per-day level shift (std)
    double hour_noise = 0.005;  // per-hour noise (std)
};

/// Hourly grid price (euro/kWh) with a two-peak daily shape.
inline HourlySeries synthetic_price(int days, std::uint64_t seed, const SyntheticPriceParams& p = {}) {
    if (days < 0) throw DomainError("synthetic_price: negative day count");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto bump = [](double h, double centre, double width) {
        const double z = (h - centre) / width;
        return std::exp(-0.5 * z * z);
    };
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(days) * kHoursPerDay);
    for (int d = 0; d < days; ++d) {
        const double shift = p.day_noise * noise(rng);
        for (int h = 0; h < kHoursPerDay; ++h) {
            const double x = p.base + p.morning_peak * bump(h, 9.0, 1.5) + p.evening_peak * bump(h, 19.0, 1.5) +
                             shift + p.hour_noise * noise(rng);
            v.push_back(std::max(0.0, x));
        }
    }
    return HourlySeries(Unit::EurPerKwh, 0, std::move(v));
}

} // namespace evq
