#pragma once

// Experiment orchestration: configuration, exogenous data assembly,
// arrival-rate estimation, paired policy evaluation and reports.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "evq/domain.hpp"
#include "evq/env.hpp"
#include "evq/errors.hpp"
#include "evq/exogenous.hpp"
#include "evq/learner.hpp"
#include "evq/policies.hpp"

namespace evq {

using json = nlohmann::ordered_json;

struct ExogenousConfig {
    std::optional<std::string> wind_csv;  // national output, kWh per hour
    std::optional<std::string> price_csv; // euro per kWh
    int turbine_count = 4058;
    std::uint64_t wind_seed = 2012;
    SyntheticWindParams wind{};
    std::uint64_t price_seed = 2013;
    SyntheticPriceParams price{};
    double solar_annual_kwh = 1000.0;
    double solar_peak_hour = 13.5;
    double solar_sigma = 3.0;
    std::size_t r_levels = 2;
    std::size_t p_levels = 2;
};

struct ExperimentConfig {
    StationParams station{};
    double battery_capacity_kwh = 24.0;
    CustomerModel customers = default_customer_model();
    Schedules schedules{};
    ExogenousConfig exogenous{};
    int training_days = 190;
    int training_repetitions = 40;
    int evaluation_days = 29;
    std::uint64_t seed = 1;
};

inline ExperimentConfig default_config() { return ExperimentConfig{}; }

inline void validate(const ExperimentConfig& c) {
    c.station.validate();
    c.customers.validate();
    c.schedules.validate();
    if (!(c.battery_capacity_kwh > 0.0)) throw ConfigError("battery_capacity_kwh must be positive");
    if (c.training_days < 0 || c.training_repetitions < 0) throw ConfigError("training counts must be >= 0");
    if (c.evaluation_days < 1) throw ConfigError("evaluation days must be >= 1");
    if (c.exogenous.turbine_count < 1) throw ConfigError("turbine_count must be positive");
    if (c.exogenous.r_levels < 2 || c.exogenous.p_levels < 2) throw ConfigError("need at least 2 levels");
    if (c.exogenous.r_levels > 255 || c.exogenous.p_levels > 255) throw ConfigError("at most 255 levels");
    if (!(c.exogenous.solar_sigma > 0.0) || !(c.exogenous.solar_annual_kwh >= 0.0)) {
        throw ConfigError("solar profile needs sigma > 0 and annual_kwh >= 0");
    }
    for (const auto& path : {c.exogenous.wind_csv, c.exogenous.price_csv}) {
        if (path && !std::filesystem::exists(*path)) throw ConfigError("data file '" + *path + "' does not exist");
    }
    for (const UserType& t : c.customers.types) {
        if (t.id > 255) throw ConfigError("user type ids must be <= 255");
    }
}

// ---------------------------------------------------------------------------
// JSON config

namespace detail {

template <std::size_t N>
json to_json_array(const std::array<double, N>& a) {
    return json(std::vector<double>(a.begin(), a.end()));
}

/// Reads an object, rejecting keys it does not know.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
        for (const auto& [k, _] : j_.items()) unknown_.insert(k);
    }

    template <class T>
    void get(const char* key, T& out) {
        const auto it = j_.find(key);
        unknown_.erase(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }

    template <std::size_t N>
    void get(const char* key, std::array<double, N>& out) {
        std::vector<double> v;
        get(key, v);
        if (j_.contains(key)) {
            if (v.size() != N) throw ConfigError(where_ + "." + key + ": expected " + std::to_string(N) + " values");
            std::copy(v.begin(), v.end(), out.begin());
        }
    }

    void get(const char* key, std::optional<std::string>& out) {
        const auto it = j_.find(key);
        unknown_.erase(key);
        if (it == j_.end() || it->is_null()) return;
        if (!it->is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
        out = it->template get<std::string>();
    }

    const json* child(const char* key) {
        unknown_.erase(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void finish() const {
        if (!unknown_.empty()) throw ConfigError(where_ + ": unknown key '" + *unknown_.begin() + "'");
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> unknown_;
};

} // namespace detail

inline json to_json(const ExperimentConfig& c) {
    json types = json::array();
    for (const auto& t : c.customers.types) types.push_back({{"name", t.name}, {"id", t.id}, {"max_price", t.max_price}});
    const auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
    return json{
        {"station",
         {{"places", c.station.places},
          {"slots", c.station.slots},
          {"ttl_max", c.station.ttl_max},
          {"expenses_mode", to_string(c.station.expenses)}}},
        {"battery_capacity_kwh", c.battery_capacity_kwh},
        {"types", types},
        {"customers",
         {{"lambda", detail::to_json_array(c.customers.lambda)},
          {"soc_weights", c.customers.soc_weights},
          {"ttl_mean", detail::to_json_array(c.customers.ttl_mean)},
          {"ttl_std", detail::to_json_array(c.customers.ttl_std)},
          {"type_weights", c.customers.type_weights}}},
        {"schedules",
         {{"epsilon0", c.schedules.epsilon0},
          {"epsilon_min", c.schedules.epsilon_min},
          {"beta0", c.schedules.beta0},
          {"beta_min", c.schedules.beta_min},
          {"horizon", c.schedules.horizon},
          {"gamma", c.schedules.gamma},
          {"initial_q", c.schedules.initial_q}}},
        {"exogenous",
         {{"wind_csv", opt(c.exogenous.wind_csv)},
          {"price_csv", opt(c.exogenous.price_csv)},
          {"turbine_count", c.exogenous.turbine_count},
          {"wind_seed", c.exogenous.wind_seed},
          {"wind_mean_kwh_per_turbine", c.exogenous.wind.mean_kwh_per_turbine},
          {"wind_persistence", c.exogenous.wind.persistence},
          {"wind_volatility", c.exogenous.wind.volatility},
          {"price_seed", c.exogenous.price_seed},
          {"price_base", c.exogenous.price.base},
          {"price_morning_peak", c.exogenous.price.morning_peak},
          {"price_evening_peak", c.exogenous.price.evening_peak},
          {"price_day_noise", c.exogenous.price.day_noise},
          {"price_hour_noise", c.exogenous.price.hour_noise},
          {"solar_annual_kwh", c.exogenous.solar_annual_kwh},
          {"solar_peak_hour", c.exogenous.solar_peak_hour},
          {"solar_sigma", c.exogenous.solar_sigma},
          {"r_levels", c.exogenous.r_levels},
          {"p_levels", c.exogenous.p_levels}}},
        {"training", {{"days", c.training_days}, {"repetitions", c.training_repetitions}}},
        {"evaluation", {{"days", c.evaluation_days}}},
        {"seed", c.seed},
    };
}

/// Overlays `j` on the defaults. Unknown keys are rejected.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig c = default_config()) {
    detail::ObjectReader root(j, "config");
    if (const json* s = root.child("station")) {
        detail::ObjectReader r(*s, "station");
        r.get("places", c.station.places);
        r.get("slots", c.station.slots);
        r.get("ttl_max", c.station.ttl_max);
        std::string mode = to_string(c.station.expenses);
        r.get("expenses_mode", mode);
        c.station.expenses = expenses_mode_from_string(mode);
        r.finish();
    }
    root.get("battery_capacity_kwh", c.battery_capacity_kwh);
    if (const json* t = root.child("types")) {
        if (!t->is_array()) throw ConfigError("types: expected an array");
        c.customers.types.clear();
        for (const auto& item : *t) {
            detail::ObjectReader r(item, "types[]");
            UserType u;
            r.get("name", u.name);
            r.get("id", u.id);
            r.get("max_price", u.max_price);
            r.finish();
            c.customers.types.push_back(u);
        }
    }
    if (const json* m = root.child("customers")) {
        detail::ObjectReader r(*m, "customers");
        r.get("lambda", c.customers.lambda);
        r.get("soc_weights", c.customers.soc_weights);
        r.get("ttl_mean", c.customers.ttl_mean);
        r.get("ttl_std", c.customers.ttl_std);
        r.get("type_weights", c.customers.type_weights);
        r.finish();
    }
    if (const json* s = root.child("schedules")) {
        detail::ObjectReader r(*s, "schedules");
        r.get("epsilon0", c.schedules.epsilon0);
        r.get("epsilon_min", c.schedules.epsilon_min);
        r.get("beta0", c.schedules.beta0);
        r.get("beta_min", c.schedules.beta_min);
        r.get("horizon", c.schedules.horizon);
        r.get("gamma", c.schedules.gamma);
        r.get("initial_q", c.schedules.initial_q);
        r.finish();
    }
    if (const json* e = root.child("exogenous")) {
        detail::ObjectReader r(*e, "exogenous");
        auto& x = c.exogenous;
        r.get("wind_csv", x.wind_csv);
        r.get("price_csv", x.price_csv);
        r.get("turbine_count", x.turbine_count);
        r.get("wind_seed", x.wind_seed);
        r.get("wind_mean_kwh_per_turbine", x.wind.mean_kwh_per_turbine);
        r.get("wind_persistence", x.wind.persistence);
        r.get("wind_volatility", x.wind.volatility);
        r.get("price_seed", x.price_seed);
        r.get("price_base", x.price.base);
        r.get("price_morning_peak", x.price.morning_peak);
        r.get("price_evening_peak", x.price.evening_peak);
        r.get("price_day_noise", x.price.day_noise);
        r.get("price_hour_noise", x.price.hour_noise);
        r.get("solar_annual_kwh", x.solar_annual_kwh);
        r.get("solar_peak_hour", x.solar_peak_hour);
        r.get("solar_sigma", x.solar_sigma);
        r.get("r_levels", x.r_levels);
        r.get("p_levels", x.p_levels);
        r.finish();
    }
    if (const json* t = root.child("training")) {
        detail::ObjectReader r(*t, "training");
        r.get("days", c.training_days);
        r.get("repetitions", c.training_repetitions);
        r.finish();
    }
    if (const json* v = root.child("evaluation")) {
        detail::ObjectReader r(*v, "evaluation");
        r.get("days", c.evaluation_days);
        r.finish();
    }
    root.get("seed", c.seed);
    root.finish();
    c.exogenous.wind.turbine_count = c.exogenous.turbine_count;
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a over the canonical JSON form; any field change changes the digest.
inline std::string config_digest(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Independent stream seeds from one master seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t { kTrainStream = 1, kEvalStream = 2, kArrivalStream = 3, kDecisionStream = 4 };

// ---------------------------------------------------------------------------
// Exogenous data

struct ExogenousData {
    HourlySeries renewable_kwh; // per-turbine wind + solar
    HourlySeries price_eur_kwh;
    LevelCodec codec_r;         // SOC-points
    LevelCodec codec_p;         // euro per SOC-point
    ObservationTrack training;
    ObservationTrack evaluation;
};

/// Loads or synthesizes r(t) and p(t) for training followed by evaluation
/// days, fits the level codecs on the training days (all days when there is
/// no training) and encodes both tracks.
inline ExogenousData build_exogenous(const ExperimentConfig& c) {
    const auto& x = c.exogenous;
    const int needed = c.training_days + c.evaluation_days;

    HourlySeries wind = x.wind_csv ? load_hourly_series(*x.wind_csv, Unit::kWh) : [&] {
        SyntheticWindParams p = x.wind;
        p.turbine_count = x.turbine_count;
        return synthetic_wind(needed, x.wind_seed, p);
    }();
    HourlySeries price =
        x.price_csv ? load_hourly_series(*x.price_csv, Unit::EurPerKwh) : synthetic_price(needed, x.price_seed, x.price);
    if (wind.days() < needed || price.days() < needed) {
        throw DataError("data covers fewer days than training + evaluation (" + std::to_string(needed) + ")");
    }
    wind = wind.slice(wind.first_day(), needed);
    price = price.slice(price.first_day(), needed);

    ExogenousData d;
    d.renewable_kwh = combine_renewables(normalize_wind(wind, x.turbine_count),
                                         solar_profile(x.solar_annual_kwh, x.solar_peak_hour, x.solar_sigma));
    d.price_eur_kwh = HourlySeries(Unit::EurPerKwh, 0, price.values());
    d.renewable_kwh = HourlySeries(Unit::kWh, 0, d.renewable_kwh.values());

    const int fit_days = c.training_days > 0 ? c.training_days : needed;
    std::vector<double> r_points, p_points;
    for (int i = 0; i < fit_days * kHoursPerDay; ++i) {
        r_points.push_back(kwh_to_soc_points(d.renewable_kwh.values()[i], c.battery_capacity_kwh));
        p_points.push_back(eur_per_kwh_to_eur_per_point(d.price_eur_kwh.values()[i], c.battery_capacity_kwh));
    }
    d.codec_r = fit_levels(r_points, x.r_levels);
    d.codec_p = fit_levels(p_points, x.p_levels);

    const auto encode = [&](int from, int count) {
        return encode_track(d.codec_r, d.codec_p, d.renewable_kwh.slice(from, count), d.price_eur_kwh.slice(from, count),
                            c.battery_capacity_kwh);
    };
    if (c.training_days > 0) d.training = encode(0, c.training_days);
    d.evaluation = encode(c.training_days, c.evaluation_days);
    return d;
}

// ---------------------------------------------------------------------------
// Arrival-rate estimation

struct ArrivalEvent {
    int day = 0;
    int hour = 0;
};

/// Poisson MLE per hour: events at that hour divided by days observed.
/// Days are 0-based from the start of monitoring; without an explicit count
/// the observation window is taken to end with the last logged day.
inline std::array<double, kHoursPerDay> estimate_arrival_rates(const std::vector<ArrivalEvent>& log,
                                                                std::optional<int> days_observed = std::nullopt) {
    if (log.empty()) throw DomainError("estimate_arrival_rates: empty arrival log");
    int last_day = 0;
    std::array<double, kHoursPerDay> counts{};
    for (const auto& e : log) {
        if (e.day < 0 || e.hour < 0 || e.hour >= kHoursPerDay) throw DataError("arrival event out of range");
        counts[static_cast<std::size_t>(e.hour)] += 1.0;
        last_day = std::max(last_day, e.day);
    }
    const int days = days_observed.value_or(last_day + 1);
    if (days < last_day + 1) throw DomainError("estimate_arrival_rates: log extends past the observed days");
    for (double& c : counts) c /= static_cast<double>(days);
    return counts;
}

/// Reads a `day,hour` CSV arrival log, one row per arriving vehicle.
inline std::vector<ArrivalEvent> parse_arrival_log(std::istream& in) {
    std::vector<ArrivalEvent> log;
    std::string line;
    std::size_t row = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            if (fields != std::vector<std::string>{"day", "hour"}) {
                throw DataError("row " + std::to_string(row) + ": expected header 'day,hour'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 2) throw DataError("row " + std::to_string(row) + ": expected 2 fields");
        const double day = detail::parse_real(fields[0], row, "day");
        const double hour = detail::parse_real(fields[1], row, "hour");
        if (day < 0 || day != std::floor(day)) throw DataError("row " + std::to_string(row) + ": bad day");
        if (hour < 0 || hour >= kHoursPerDay) throw DataError("row " + std::to_string(row) + ": bad hour");
        log.push_back({static_cast<int>(day), static_cast<int>(std::floor(hour))});
    }
    return log;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Simulates `eval_days` days of `track` under `policy` without learning and
/// returns the income of each day. Arrivals and policy randomness come from
/// separate streams of `seed`, so every policy sees the same customers.
inline std::vector<double> run_evaluation(const Policy& policy, const StationParams& params,
                                          const CustomerModel& model, const ObservationTrack& track, int eval_days,
                                          std::uint64_t seed) {
    if (eval_days < 1) throw DomainError("run_evaluation: eval_days must be >= 1");
    if (track.days() < eval_days) throw DomainError("run_evaluation: observation track too short");
    Rng arrivals(derive_seed(seed, kArrivalStream));
    Rng decisions(derive_seed(seed, kDecisionStream));

    std::vector<double> incomes;
    incomes.reserve(static_cast<std::size_t>(eval_days));
    StationState state =
        admit(StationState(0, params.places), sample_arrivals(arrivals, 0, model, params.ttl_max)).state;
    for (int day = 0; day < eval_days; ++day) {
        double income = 0.0;
        for (int hour = 0; hour < kHoursPerDay; ++hour) {
            const auto& obs = track.at(day, hour);
            const auto actions = enumerate_actions(state, params.slots);
            const std::size_t choice = choose(policy, state, obs, actions, decisions);
            Transition tr = step(state, actions[choice], obs, track.next(day, hour), arrivals, model, params);
            income += tr.reward;
            state = std::move(tr.next_state);
        }
        incomes.push_back(income);
    }
    return incomes;
}

inline double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

struct PolicyIncome {
    std::string policy;
    std::vector<double> daily;
    double total = 0.0;
};

struct RunReport {
    std::vector<PolicyIncome> incomes;
    std::optional<double> uplift; // learned / random
    std::string config_digest;
    std::uint64_t seed = 0;
    double wall_clock_seconds = 0.0;
    std::uint64_t training_steps = 0;
    std::size_t table_entries = 0;

    const PolicyIncome* find(const std::string& name) const {
        for (const auto& p : incomes) {
            if (p.policy == name) return &p;
        }
        return nullptr;
    }

    void add(std::string name, std::vector<double> daily) {
        const double total = sum(daily);
        incomes.push_back({std::move(name), std::move(daily), total});
    }

    void compute_uplift() {
        const auto* learned = find("learned");
        const auto* random = find("random");
        uplift.reset();
        if (learned && random && random->total > 0.0) uplift = learned->total / random->total;
    }
};

inline json to_json(const RunReport& r) {
    json policies = json::object();
    for (const auto& p : r.incomes) policies[p.policy] = {{"daily_income_eur", p.daily}, {"total_income_eur", p.total}};
    return json{
        {"config_digest", r.config_digest},
        {"seed", r.seed},
        {"policies", policies},
        {"uplift", r.uplift ? json(*r.uplift) : json(nullptr)},
        {"training_steps", r.training_steps},
        {"table_entries", r.table_entries},
        {"wall_clock_seconds", r.wall_clock_seconds},
    };
}

/// `day,policy,income_eur`, one row per policy per evaluation day.
inline void write_incomes_csv(std::ostream& out, const RunReport& r) {
    out << "day,policy,income_eur\n";
    char buf[64];
    for (const auto& p : r.incomes) {
        for (std::size_t d = 0; d < p.daily.size(); ++d) {
            std::snprintf(buf, sizeof buf, "%.9f", p.daily[d]);
            out << d << ',' << p.policy << ',' << buf << '\n';
        }
    }
}

struct TrainedModel {
    QTable table;
    std::vector<double> episode_income;
    std::uint64_t steps = 0;
};

/// Trains on the configured training days; zero training days yields an
/// empty table.
inline TrainedModel train_from_config(const ExperimentConfig& c, const ExogenousData& data) {
    if (c.training_days == 0 || c.training_repetitions == 0) return {QTable(c.schedules.initial_q), {}, 0};
    Rng rng(derive_seed(c.seed, kTrainStream));
    auto r = train(c.station, c.customers, c.schedules, data.training, c.training_days, c.training_repetitions, rng);
    return {std::move(r.table), std::move(r.episode_income), r.steps};
}

struct CompareResult {
    RunReport report;
    TrainedModel model;
};

/// Trains, then evaluates learned, random and myopic policies on the same
/// evaluation days and the same customer realizations.
inline CompareResult compare(const ExperimentConfig& c) {
    validate(c);
    const auto started = std::chrono::steady_clock::now();
    const ExogenousData data = build_exogenous(c);
    TrainedModel model = train_from_config(c, data);

    const auto table = std::make_shared<const QTable>(model.table);
    const std::uint64_t eval_seed = derive_seed(c.seed, kEvalStream);
    RunReport report;
    report.config_digest = config_digest(c);
    report.seed = c.seed;
    report.training_steps = model.steps;
    report.table_entries = model.table.size();
    report.add("learned",
               run_evaluation(LearnedPolicy{table}, c.station, c.customers, data.evaluation, c.evaluation_days, eval_seed));
    report.add("random",
               run_evaluation(RandomPolicy{}, c.station, c.customers, data.evaluation, c.evaluation_days, eval_seed));
    report.add("myopic", run_evaluation(MyopicPolicy{c.station.expenses}, c.station, c.customers, data.evaluation,
                                        c.evaluation_days, eval_seed));
    report.compute_uplift();
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(report), std::move(model)};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << text;
}

/// Writes report.json and incomes.csv into `dir`.
inline void write_report(const std::filesystem::path& dir, const RunReport& r) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "report.json", to_json(r).dump(2) + "\n");
    std::ostringstream csv;
    write_incomes_csv(csv, r);
    write_text_file(dir / "incomes.csv", csv.str());
}

inline void write_table(const std::filesystem::path& path, const QTable& table) {
    std::ostringstream out;
    table.save(out);
    write_text_file(path, out.str());
}

inline QTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open Q-table '" + path.string() + "'");
    return QTable::load(in);
}

} // namespace evq
