// evq: command-line front end for training, evaluating and comparing
// charging-station policies.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 contract violation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "evq/harness.hpp"

namespace fs = std::filesystem;
using namespace evq;

namespace {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kContractViolation = 4 };

struct CommonOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_option = nullptr;
    std::string out_dir = ".";
    std::string table_path;
};

void add_common(CLI::App& cmd, CommonOptions& o) {
    cmd.add_option("--config", o.config_path, "Experiment config (JSON); defaults apply when omitted");
    o.seed_option = cmd.add_option("--seed", o.seed, "Master seed, overrides the config");
    cmd.add_option("--out", o.out_dir, "Output directory")->capture_default_str();
    cmd.add_option("--table", o.table_path, "Q-table snapshot path");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
    ExperimentConfig c = o.config_path.empty() ? default_config() : load_config(o.config_path);
    if (o.seed_option && o.seed_option->count() > 0) c.seed = o.seed;
    validate(c);
    return c;
}

fs::path table_path_or_default(const CommonOptions& o) {
    return o.table_path.empty() ? fs::path(o.out_dir) / "qtable.evqtab" : fs::path(o.table_path);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_train(const CommonOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig c = resolve_config(o);
    if (c.training_days < 1 || c.training_repetitions < 1) {
        throw ConfigError("train needs training.days >= 1 and training.repetitions >= 1");
    }
    const ExogenousData data = build_exogenous(c);
    const TrainedModel model = train_from_config(c, data);

    const fs::path table = table_path_or_default(o);
    fs::create_directories(o.out_dir);
    if (table.has_parent_path()) fs::create_directories(table.parent_path());
    write_table(table, model.table);

    const json report{
        {"config_digest", config_digest(c)},
        {"seed", c.seed},
        {"training_steps", model.steps},
        {"table_entries", model.table.size()},
        {"table_states", model.table.state_count()},
        {"table_path", table.string()},
        {"training_income_eur", model.episode_income},
        {"wall_clock_seconds", seconds_since(t0)},
    };
    write_text_file(fs::path(o.out_dir) / "report.json", report.dump(2) + "\n");
    std::cout << "trained " << model.steps << " steps, " << model.table.size() << " entries -> " << table.string()
              << "\n";
    return kOk;
}

int run_evaluate(const CommonOptions& o, const std::string& policy_name) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig c = resolve_config(o);
    Policy policy = RandomPolicy{};
    if (policy_name == "myopic") {
        policy = MyopicPolicy{c.station.expenses};
    } else if (policy_name == "learned") {
        if (o.table_path.empty()) throw ConfigError("--policy learned needs --table");
        policy = LearnedPolicy{std::make_shared<const QTable>(read_table(o.table_path))};
    }
    const ExogenousData data = build_exogenous(c);

    RunReport report;
    report.config_digest = config_digest(c);
    report.seed = c.seed;
    report.add(policy_name, run_evaluation(policy, c.station, c.customers, data.evaluation, c.evaluation_days,
                                           derive_seed(c.seed, kEvalStream)));
    report.wall_clock_seconds = seconds_since(t0);
    write_report(o.out_dir, report);
    std::printf("%s total income: %.2f EUR over %d days\n", policy_name.c_str(), report.incomes[0].total,
                c.evaluation_days);
    return kOk;
}

int run_compare(const CommonOptions& o) {
    const ExperimentConfig c = resolve_config(o);
    const CompareResult result = compare(c);
    write_report(o.out_dir, result.report);
    const fs::path table = table_path_or_default(o);
    if (table.has_parent_path()) fs::create_directories(table.parent_path());
    write_table(table, result.model.table);
    for (const auto& p : result.report.incomes) std::printf("%-8s %10.2f EUR\n", p.policy.c_str(), p.total);
    if (result.report.uplift) {
        std::printf("uplift   %10.3f\n", *result.report.uplift);
    } else {
        std::printf("uplift   undefined (random total <= 0)\n");
    }
    return kOk;
}

int run_estimate_rates(const std::string& log_path, std::optional<int> days, const std::string& out_dir,
                       bool write_out) {
    std::ifstream in(log_path);
    if (!in) throw DataError("cannot open arrival log '" + log_path + "'");
    const auto rates = estimate_arrival_rates(parse_arrival_log(in), days);
    const json j{{"lambda", std::vector<double>(rates.begin(), rates.end())}};
    if (write_out) {
        fs::create_directories(out_dir);
        write_text_file(fs::path(out_dir) / "rates.json", j.dump(2) + "\n");
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
}

struct FitOptions {
    std::string series_path;
    std::string unit = "kwh";
    std::size_t levels = 2;
    double battery_kwh = 24.0;
    int turbines = 0;
};

int run_fit_levels(const FitOptions& f, const std::string& out_dir, bool write_out) {
    const bool energy = f.unit == "kwh";
    HourlySeries series = load_hourly_series(f.series_path, energy ? Unit::kWh : Unit::EurPerKwh);
    if (energy && f.turbines > 0) series = normalize_wind(series, f.turbines);
    std::vector<double> station_units;
    station_units.reserve(series.values().size());
    for (double x : series.values()) {
        station_units.push_back(energy ? kwh_to_soc_points(x, f.battery_kwh)
                                       : eur_per_kwh_to_eur_per_point(x, f.battery_kwh));
    }
    const LevelCodec codec = fit_levels(station_units, f.levels);
    const json j{
        {"unit", energy ? "soc_points" : "eur_per_soc_point"},
        {"samples", station_units.size()},
        {"thresholds", codec.thresholds},
        {"level_values", codec.level_values},
    };
    if (write_out) {
        fs::create_directories(out_dir);
        write_text_file(fs::path(out_dir) / "levels.json", j.dump(2) + "\n");
    }
    std::cout << j.dump(2) << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EV charging station scheduling with tabular Q-learning"};
    app.require_subcommand(1);

    CommonOptions train_opts, eval_opts, compare_opts;
    auto* train = app.add_subcommand("train", "Train a Q-table and write its snapshot");
    add_common(*train, train_opts);

    std::string policy = "random";
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate one policy on the evaluation days");
    add_common(*evaluate, eval_opts);
    evaluate->add_option("--policy", policy, "Policy to evaluate")
        ->check(CLI::IsMember({"random", "myopic", "learned"}))
        ->capture_default_str();

    auto* cmp = app.add_subcommand("compare", "Train, then evaluate learned, random and myopic policies");
    add_common(*cmp, compare_opts);

    std::string log_path, rates_out = ".";
    int rate_days = 0;
    auto* rates = app.add_subcommand("estimate-rates", "Estimate hourly arrival rates from a day,hour log");
    rates->add_option("--log", log_path, "Arrival log CSV")->required();
    auto* days_opt = rates->add_option("--days", rate_days, "Days observed (default: last logged day + 1)")
                         ->check(CLI::PositiveNumber);
    auto* rates_out_opt = rates->add_option("--out", rates_out, "Also write rates.json into this directory");

    FitOptions fit;
    std::string fit_out = ".";
    auto* levels = app.add_subcommand("fit-levels", "Fit a quantile level codec to an hourly series");
    levels->add_option("--series", fit.series_path, "day,hour,value CSV")->required();
    levels->add_option("--unit", fit.unit, "kwh (renewables) or eur (price per kWh)")
        ->check(CLI::IsMember({"kwh", "eur"}))
        ->capture_default_str();
    levels->add_option("--levels", fit.levels, "Number of levels")->check(CLI::Range(2, 255))->capture_default_str();
    levels->add_option("--battery-kwh", fit.battery_kwh, "Battery capacity for unit conversion")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    levels->add_option("--turbines", fit.turbines, "Divide national wind output by this turbine count")
        ->check(CLI::NonNegativeNumber);
    auto* fit_out_opt = levels->add_option("--out", fit_out, "Also write levels.json into this directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (*train) return run_train(train_opts);
        if (*evaluate) return run_evaluate(eval_opts, policy);
        if (*cmp) return run_compare(compare_opts);
        if (*rates) {
            return run_estimate_rates(log_path, days_opt->count() ? std::optional<int>(rate_days) : std::nullopt,
                                      rates_out, rates_out_opt->count() > 0);
        }
        if (*levels) return run_fit_levels(fit, fit_out, fit_out_opt->count() > 0);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const ContractViolation& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return kContractViolation;
    } catch (const DomainError& e) {
        std::cerr << "contract violation: " << e.what() << "\n";
        return kContractViolation;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    }
    return kOk;
}
