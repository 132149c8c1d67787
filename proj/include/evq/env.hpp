#pragma once

// The charging-station decision process. Each hour the controller picks a
// ChargeAction for the vehicles already admitted; the station earns the
// customers' charge prices, pays the grid for energy not covered by the
// renewable supply, then time advances: TTLs drop, expired vehicles leave
// and the hour's arrivals are admitted first-come first-served.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "evq/domain.hpp"
#include "evq/errors.hpp"
#include "evq/exogenous.hpp"

namespace evq {

using Rng = std::mt19937_64;

enum class ExpensesMode {
    literal, // p * (sum u - r), negative when renewable supply exceeds demand
    clamped, // p * max(0, sum u - r)
};

inline const char* to_string(ExpensesMode m) { return m == ExpensesMode::literal ? "literal" : "clamped"; }

inline ExpensesMode expenses_mode_from_string(const std::string& s) {
    if (s == "literal") return ExpensesMode::literal;
    if (s == "clamped") return ExpensesMode::clamped;
    throw ConfigError("unknown expenses mode '" + s + "'");
}

struct StationParams {
    std::size_t places = 5; // M
    std::size_t slots = 3;  // k
    int ttl_max = kDefaultTtlMax;
    ExpensesMode expenses = ExpensesMode::literal;

    void validate() const {
        if (slots < 1 || places < slots) throw ConfigError("station needs places >= slots >= 1");
        if (ttl_max < 1) throw ConfigError("ttl_max must be >= 1");
    }
};

/// Arrival statistics of the station's customers, by hour of day.
struct CustomerModel {
    std::array<double, kHoursPerDay> lambda{};
    std::vector<double> soc_weights; // over initial soc 0, 10, ..., 90
    std::array<double, kHoursPerDay> ttl_mean{};
    std::array<double, kHoursPerDay> ttl_std{};
    std::vector<UserType> types;
    std::vector<double> type_weights;

    void validate() const {
        for (double l : lambda) {
            if (!(l >= 0.0)) throw ConfigError("arrival rates must be non-negative");
        }
        for (double s : ttl_std) {
            if (!(s > 0.0)) throw ConfigError("ttl_std must be positive");
        }
        const auto check_weights = [](const std::vector<double>& w, const char* what) {
            if (w.empty()) throw ConfigError(std::string(what) + " must not be empty");
            double sum = 0.0;
            for (double x : w) {
                if (!(x >= 0.0)) throw ConfigError(std::string(what) + " must be non-negative");
                sum += x;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(std::string(what) + " must sum to 1");
        };
        check_weights(soc_weights, "soc_weights");
        if (soc_weights.size() != kSocFull / kSocStep) {
            throw ConfigError("soc_weights needs one weight per initial soc 0..90");
        }
        check_weights(type_weights, "type_weights");
        if (types.size() != type_weights.size()) throw ConfigError("one type weight per user type");
        for (std::size_t i = 0; i < types.size(); ++i) {
            check_type(types[i]);
            for (std::size_t j = 0; j < i; ++j) {
                if (types[i].id == types[j].id) throw ConfigError("user type ids must be distinct");
            }
        }
    }

private:
    static void check_type(const UserType& t) {
        try {
            evq::validate(t);
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    }
};

/// Commuter-shaped demand: arrival peaks at 8h and 17h, mostly low initial
/// SOC, and shorter stays the later in the day a vehicle arrives.
inline CustomerModel default_customer_model() {
    CustomerModel m;
    const auto bump = [](double h, double centre, double width) {
        const double z = (h - centre) / width;
        return std::exp(-0.5 * z * z);
    };
    for (int h = 0; h < kHoursPerDay; ++h) {
        m.lambda[h] = 0.1 + 1.0 * bump(h, 8, 1.5) + 0.9 * bump(h, 17, 1.5) + 0.3 * bump(h, 13, 3.0);
        m.ttl_mean[h] = std::max(2.0, 4.0 - 0.1 * h);
        m.ttl_std[h] = 0.7;
    }
    m.soc_weights = {0.20, 0.20, 0.15, 0.12, 0.10, 0.08, 0.06, 0.04, 0.03, 0.02};
    m.types = {medium_type(), rich_type()};
    m.type_weights = {0.6, 0.4};
    return m;
}

// ---------------------------------------------------------------------------
// Customer generation

inline int sample_arrival_count(Rng& rng, double lambda_h) {
    if (lambda_h < 0.0) throw DomainError("sample_arrival_count: negative rate");
    if (lambda_h == 0.0) return 0;
    return std::poisson_distribution<int>(lambda_h)(rng);
}

inline Vehicle sample_vehicle(Rng& rng, int hour, const CustomerModel& model, int ttl_max = kDefaultTtlMax) {
    Vehicle v;
    v.soc = kSocStep * static_cast<int>(
        std::discrete_distribution<int>(model.soc_weights.begin(), model.soc_weights.end())(rng));
    const double ttl = std::normal_distribution<double>(model.ttl_mean[hour], model.ttl_std[hour])(rng);
    v.ttl = static_cast<int>(std::clamp(std::round(ttl), 1.0, static_cast<double>(ttl_max)));
    v.type = model.types[static_cast<std::size_t>(
        std::discrete_distribution<int>(model.type_weights.begin(), model.type_weights.end())(rng))];
    v.completed = false;
    return v;
}

/// One hour's arrivals, in arrival order.
inline std::vector<Vehicle> sample_arrivals(Rng& rng, int hour, const CustomerModel& model,
                                            int ttl_max = kDefaultTtlMax) {
    const int n = sample_arrival_count(rng, model.lambda[hour]);
    std::vector<Vehicle> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sample_vehicle(rng, hour, model, ttl_max));
    return out;
}

// ---------------------------------------------------------------------------
// State transitions

struct AdmitResult {
    StationState state;
    int rejected = 0;
};

inline AdmitResult admit(StationState state, const std::vector<Vehicle>& newcomers) {
    AdmitResult r;
    auto free_slot = state.slots.begin();
    for (const Vehicle& v : newcomers) {
        free_slot = std::find_if(free_slot, state.slots.end(), [](const Slot& s) { return !s.has_value(); });
        if (free_slot == state.slots.end()) {
            ++r.rejected;
            continue;
        }
        *free_slot = v;
    }
    canonicalize(state);
    r.state = std::move(state);
    return r;
}

/// All feasible actions, in a fixed order: an odometer over the per-slot
/// options {0, 10, 100 - soc} with slot 0 varying fastest, skipping vectors
/// with more than k nonzero entries. Index 0 is always the idle action.
inline std::vector<ChargeAction> enumerate_actions(const StationState& state, std::size_t k) {
    const std::size_t m = state.places();
    std::vector<std::vector<int>> options(m);
    for (std::size_t i = 0; i < m; ++i) {
        options[i].push_back(0);
        const Slot& s = state.slots[i];
        if (s && s->chargeable()) {
            options[i].push_back(kSocStep);
            if (kSocFull - s->soc != kSocStep) options[i].push_back(kSocFull - s->soc);
        }
    }
    std::vector<ChargeAction> out;
    std::vector<std::size_t> digit(m, 0);
    while (true) {
        std::size_t nz = 0;
        for (std::size_t i = 0; i < m; ++i) nz += digit[i] != 0;
        if (nz <= k) {
            ChargeAction a;
            a.u.resize(m);
            for (std::size_t i = 0; i < m; ++i) a.u[i] = options[i][digit[i]];
            out.push_back(std::move(a));
        }
        std::size_t i = 0;
        while (i < m && ++digit[i] == options[i].size()) digit[i++] = 0;
        if (i == m) break;
    }
    return out;
}

/// Station revenue for one hour: customer payments minus grid purchases.
/// The observation's r_value is in SOC-points, p_value in euro per SOC-point.
inline double reward(const StationState& state, const ChargeAction& action, const ExogenousObservation& obs,
                     ExpensesMode mode = ExpensesMode::literal) {
    if (!is_feasible_per_slot(state, action)) throw DomainError("reward: infeasible action");
    double incomes = 0.0;
    for (std::size_t i = 0; i < action.u.size(); ++i) {
        if (action.u[i] == 0) continue;
        const Vehicle& v = *state.slots[i];
        incomes += charge_price(v.type, v.soc, v.soc + action.u[i]);
    }
    double bought = static_cast<double>(action.total()) - obs.r_value;
    if (mode == ExpensesMode::clamped) bought = std::max(0.0, bought);
    return incomes - obs.p_value * bought;
}

/// Delivers the charge. Vehicles reaching 100% are marked completed and their
/// stored soc wraps to 0.
inline StationState apply_action(StationState state, const ChargeAction& action) {
    if (!is_feasible_per_slot(state, action)) throw DomainError("apply_action: infeasible action");
    for (std::size_t i = 0; i < action.u.size(); ++i) {
        if (action.u[i] == 0) continue;
        Vehicle& v = *state.slots[i];
        v.soc += action.u[i];
        if (v.soc == kSocFull) {
            v.soc = 0;
            v.completed = true;
        }
    }
    canonicalize(state);
    return state;
}

/// Moves to the next hour: TTLs drop by one, vehicles at TTL 0 leave, then
/// `arrivals` are admitted into the freed places.
inline AdmitResult advance_time(StationState state, const std::vector<Vehicle>& arrivals) {
    state.hour = (state.hour + 1) % kHoursPerDay;
    for (Slot& s : state.slots) {
        if (s && --s->ttl == 0) s.reset();
    }
    canonicalize(state);
    return admit(std::move(state), arrivals);
}

struct Transition {
    StationState state;
    ExogenousObservation obs;
    ChargeAction action;
    double reward = 0.0;
    StationState next_state;
    ExogenousObservation next_obs;
    int rejected = 0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// One decision hour with the next hour's arrivals supplied by the caller.
inline Transition step(const StationState& state, const ChargeAction& action, const ExogenousObservation& obs,
                       const ExogenousObservation& next_obs, const std::vector<Vehicle>& arrivals,
                       const StationParams& params) {
    if (!is_canonical(state)) throw ContractViolation("step: state is not canonical");
    if (action.nonzero() > params.slots) throw DomainError("step: action uses more than k slots");
    Transition t;
    t.state = state;
    t.obs = obs;
    t.action = action;
    t.reward = reward(state, action, obs, params.expenses);
    auto advanced = advance_time(apply_action(state, action), arrivals);
    t.next_state = std::move(advanced.state);
    t.rejected = advanced.rejected;
    t.next_obs = next_obs;
    return t;
}

/// One decision hour with arrivals for the new hour drawn from `model`.
inline Transition step(const StationState& state, const ChargeAction& action, const ExogenousObservation& obs,
                       const ExogenousObservation& next_obs, Rng& rng, const CustomerModel& model,
                       const StationParams& params) {
    const int next_hour = (state.hour + 1) % kHoursPerDay;
    return step(state, action, obs, next_obs, sample_arrivals(rng, next_hour, model, params.ttl_max), params);
}

} // namespace evq
