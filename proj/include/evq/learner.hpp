#pragma once

// Tabular Q-learning over canonical station states.
//
// States are keyed by a compact byte string of the canonical station
// content plus the discretized exogenous levels; actions by their index in
// the deterministic enumerate_actions order of that state. The table is
// sparse: only visited (state, action) pairs are stored, everything else
// reads as the initial value.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "evq/domain.hpp"
#include "evq/env.hpp"
#include "evq/errors.hpp"
#include "evq/exogenous.hpp"
#include "evq/finite_mdp.hpp"

namespace evq {

using StateKey = std::string;

inline StateKey encode_state(const StationState& state, const ExogenousObservation& obs) {
    if (!is_canonical(state)) throw ContractViolation("encode_state: state is not canonical");
    if (state.hour < 0 || state.hour >= kHoursPerDay || obs.r_level > 255 || obs.p_level > 255) {
        throw ContractViolation("encode_state: hour or level out of range");
    }
    StateKey key;
    key.reserve(3 + 3 * state.places());
    key.push_back(static_cast<char>(state.hour));
    key.push_back(static_cast<char>(obs.r_level));
    key.push_back(static_cast<char>(obs.p_level));
    for (const Slot& s : state.slots) {
        if (!s) {
            key.append(3, '\0');
            continue;
        }
        if (s->ttl < 1 || s->ttl > 255 || s->type.id < 0 || s->type.id > 255) {
            throw ContractViolation("encode_state: vehicle field out of range");
        }
        key.push_back(static_cast<char>(s->ttl));
        key.push_back(static_cast<char>(s->soc / kSocStep | (s->completed ? 0x80 : 0)));
        key.push_back(static_cast<char>(s->type.id));
    }
    return key;
}

/// Key for state `index` of an explicit finite MDP.
inline StateKey finite_state_key(std::size_t index) {
    StateKey key;
    for (int shift = 0; shift < 64; shift += 8) key.push_back(static_cast<char>((index >> shift) & 0xff));
    return key;
}

struct QEntry {
    double q = 0.0;
    std::uint64_t visits = 0;

    friend bool operator==(const QEntry&, const QEntry&) = default;
};

inline constexpr const char* kQTableMagic = "EVQTAB1";

class QTable {
public:
    using ActionIndex = std::uint32_t;

    explicit QTable(double initial_q = 0.0) : q0_(initial_q) {}

    double initial_q() const { return q0_; }

    /// Number of stored (state, action) pairs.
    std::size_t size() const { return entries_; }
    std::size_t state_count() const { return rows_.size(); }
    bool empty() const { return entries_ == 0; }

    double value(const StateKey& key, ActionIndex a) const {
        const QEntry* e = find(key, a);
        return e ? e->q : q0_;
    }

    std::uint64_t visits(const StateKey& key, ActionIndex a) const {
        const QEntry* e = find(key, a);
        return e ? e->visits : 0;
    }

    bool contains(const StateKey& key, ActionIndex a) const { return find(key, a) != nullptr; }

    /// max_a Q(key, a) over a in [0, action_count).
    double max_value(const StateKey& key, std::size_t action_count) const {
        if (action_count == 0) throw DomainError("max_value: no actions");
        const auto it = rows_.find(key);
        double best = -std::numeric_limits<double>::infinity();
        std::size_t stored = 0;
        if (it != rows_.end()) {
            for (const auto& [a, e] : it->second) {
                if (a >= action_count) break;
                best = std::max(best, e.q);
                ++stored;
            }
        }
        if (stored < action_count) best = std::max(best, q0_);
        return best;
    }

    /// Lowest-index action attaining max_value.
    ActionIndex greedy_action(const StateKey& key, std::size_t action_count) const {
        if (action_count == 0) throw DomainError("greedy_action: no actions");
        const auto it = rows_.find(key);
        if (it == rows_.end()) return 0;
        ActionIndex best = 0;
        double best_q = -std::numeric_limits<double>::infinity();
        auto e = it->second.begin();
        for (ActionIndex a = 0; a < action_count; ++a) {
            double q = q0_;
            if (e != it->second.end() && e->first == a) {
                q = e->second.q;
                ++e;
            }
            if (q > best_q) {
                best_q = q;
                best = a;
            }
        }
        return best;
    }

    /// Q <- (1 - beta) Q + beta * target; counts the visit. Returns the new value.
    double update(const StateKey& key, ActionIndex a, double target, double beta) {
        auto& row = rows_[key];
        auto [it, inserted] = row.try_emplace(a, QEntry{q0_, 0});
        if (inserted) ++entries_;
        QEntry& e = it->second;
        e.q = (1.0 - beta) * e.q + beta * target;
        ++e.visits;
        return e.q;
    }

    void set(const StateKey& key, ActionIndex a, QEntry entry) {
        auto [it, inserted] = rows_[key].insert_or_assign(a, entry);
        if (inserted) ++entries_;
    }

    /// Visits every stored entry in (key, action) order.
    template <class F>
    void for_each(F&& f) const {
        std::vector<const StateKey*> keys;
        keys.reserve(rows_.size());
        for (const auto& [k, _] : rows_) keys.push_back(&k);
        std::sort(keys.begin(), keys.end(), [](const StateKey* a, const StateKey* b) { return *a < *b; });
        for (const StateKey* k : keys) {
            for (const auto& [a, e] : rows_.at(*k)) f(*k, a, e);
        }
    }

    void scale(double factor) {
        for (auto& [_, row] : rows_) {
            for (auto& [__, e] : row) e.q *= factor;
        }
    }

    void save(std::ostream& out) const {
        char buf[64];
        out << kQTableMagic << '\n';
        std::snprintf(buf, sizeof buf, "%a", q0_);
        out << "initial_q " << buf << '\n';
        out << "entries " << entries_ << '\n';
        for_each([&](const StateKey& k, ActionIndex a, const QEntry& e) {
            std::snprintf(buf, sizeof buf, "%a", e.q);
            out << to_hex(k) << ' ' << a << ' ' << buf << ' ' << e.visits << '\n';
        });
    }

    static QTable load(std::istream& in) {
        std::string line;
        if (!std::getline(in, line) || line != kQTableMagic) {
            throw DataError("Q-table snapshot: missing EVQTAB1 header");
        }
        std::string word, value;
        std::size_t declared = 0;
        if (!(in >> word >> value) || word != "initial_q") throw DataError("Q-table snapshot: missing initial_q");
        QTable table(parse_double(value));
        if (!(in >> word >> declared) || word != "entries") throw DataError("Q-table snapshot: missing entries");
        for (std::size_t i = 0; i < declared; ++i) {
            std::string hex, q;
            unsigned long long action = 0, visits = 0;
            if (!(in >> hex >> action >> q >> visits)) {
                throw DataError("Q-table snapshot: truncated at record " + std::to_string(i + 1));
            }
            if (action > std::numeric_limits<ActionIndex>::max()) {
                throw DataError("Q-table snapshot: action index out of range at record " + std::to_string(i + 1));
            }
            table.set(from_hex(hex), static_cast<ActionIndex>(action), QEntry{parse_double(q), visits});
        }
        if (table.size() != declared) throw DataError("Q-table snapshot: duplicate records");
        if (in >> word) throw DataError("Q-table snapshot: trailing data");
        return table;
    }

    friend bool operator==(const QTable& a, const QTable& b) {
        return a.q0_ == b.q0_ && a.entries_ == b.entries_ && a.rows_ == b.rows_;
    }

private:
    double q0_;
    std::unordered_map<StateKey, std::map<ActionIndex, QEntry>> rows_;
    std::size_t entries_ = 0;

    const QEntry* find(const StateKey& key, ActionIndex a) const {
        const auto it = rows_.find(key);
        if (it == rows_.end()) return nullptr;
        const auto e = it->second.find(a);
        return e == it->second.end() ? nullptr : &e->second;
    }

    static std::string to_hex(const StateKey& k) {
        if (k.empty()) return "-";
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        out.reserve(2 * k.size());
        for (unsigned char c : k) {
            out.push_back(digits[c >> 4]);
            out.push_back(digits[c & 0xf]);
        }
        return out;
    }

    static StateKey from_hex(const std::string& hex) {
        if (hex == "-") return {};
        if (hex.size() % 2 != 0) throw DataError("Q-table snapshot: odd-length state key");
        const auto nibble = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            throw DataError("Q-table snapshot: bad hex digit in state key");
        };
        StateKey k;
        for (std::size_t i = 0; i < hex.size(); i += 2) {
            k.push_back(static_cast<char>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
        }
        return k;
    }

    static double parse_double(const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size()) throw DataError("Q-table snapshot: bad number '" + s + "'");
        return v;
    }
};

// ---------------------------------------------------------------------------
// Exploration and learning-rate schedules

struct Schedules {
    double epsilon0 = 0.9;
    double epsilon_min = 0.02;
    double beta0 = 0.5;
    double beta_min = 0.01;
    std::uint64_t horizon = 0; // steps; 0 = the whole training run
    double gamma = 0.95;
    double initial_q = 0.0;

    void validate() const {
        const auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
        if (!unit(epsilon0) || !unit(epsilon_min) || !unit(beta0) || !unit(beta_min) || !unit(gamma)) {
            throw ConfigError("schedule probabilities and rates must lie in [0, 1]");
        }
        if (epsilon_min > epsilon0) throw ConfigError("epsilon_min must not exceed epsilon0");
        if (beta_min > beta0) throw ConfigError("beta_min must not exceed beta0");
    }
};

namespace detail {
inline double linear_decay(std::uint64_t t, double start, double end, std::uint64_t horizon) {
    if (t >= horizon) return end;
    const double f = static_cast<double>(t) / static_cast<double>(horizon);
    return start + (end - start) * f;
}
} // namespace detail

inline double epsilon_at(std::uint64_t t, const Schedules& s) {
    return detail::linear_decay(t, s.epsilon0, s.epsilon_min, s.horizon);
}

inline double beta_at(std::uint64_t t, const Schedules& s) {
    return detail::linear_decay(t, s.beta0, s.beta_min, s.horizon);
}

/// Per-pair step size scale / (1 + visits)^exponent; square-summable but not
/// summable for exponent in (0.5, 1].
inline double robbins_monro_rate(std::uint64_t visits, double scale = 1.0, double exponent = 0.6) {
    return scale / std::pow(1.0 + static_cast<double>(visits), exponent);
}

// ---------------------------------------------------------------------------
// Action selection and the value update

/// Epsilon-greedy choice among `action_count` indexed actions.
inline std::size_t select_action_index(const QTable& table, const StateKey& key, std::size_t action_count,
                                       double epsilon, Rng& rng) {
    if (action_count == 0) throw DomainError("select_action: empty action set");
    if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
        return std::uniform_int_distribution<std::size_t>(0, action_count - 1)(rng);
    }
    return table.greedy_action(key, action_count);
}

inline const ChargeAction& select_action(const QTable& table, const StationState& state,
                                         const ExogenousObservation& obs, const std::vector<ChargeAction>& actions,
                                         double epsilon, Rng& rng) {
    return actions[select_action_index(table, encode_state(state, obs), actions.size(), epsilon, rng)];
}

/// Applies one Q-learning update and returns the new value.
inline double q_update_indexed(QTable& table, const StateKey& key, QTable::ActionIndex action, double reward,
                               const StateKey& next_key, std::size_t next_action_count, double beta,
                               double gamma) {
    const double target = reward + gamma * table.max_value(next_key, next_action_count);
    return table.update(key, action, target, beta);
}

inline std::size_t action_index(const std::vector<ChargeAction>& actions, const ChargeAction& a) {
    const auto it = std::find(actions.begin(), actions.end(), a);
    if (it == actions.end()) throw ContractViolation("action is not in the enumerated set");
    return static_cast<std::size_t>(it - actions.begin());
}

inline double q_update(QTable& table, const Transition& tr, double beta, double gamma, std::size_t k) {
    const auto actions = enumerate_actions(tr.state, k);
    const auto idx = static_cast<QTable::ActionIndex>(action_index(actions, tr.action));
    const auto next_count = enumerate_actions(tr.next_state, k).size();
    return q_update_indexed(table, encode_state(tr.state, tr.obs), idx, tr.reward,
                            encode_state(tr.next_state, tr.next_obs), next_count, beta, gamma);
}

// ---------------------------------------------------------------------------
// Training

/// Upper bound on |reward| for any hour of the track.
inline double reward_bound(const StationParams& params, const CustomerModel& model, const ObservationTrack& track) {
    double max_price = 0.0;
    for (const auto& t : model.types) max_price = std::max(max_price, t.max_price);
    double max_p = 0.0, max_r = 0.0;
    for (int d = 0; d < track.days(); ++d) {
        for (int h = 0; h < kHoursPerDay; ++h) {
            max_p = std::max(max_p, std::abs(track.at(d, h).p_value));
            max_r = std::max(max_r, std::abs(track.at(d, h).r_value));
        }
    }
    const double energy = static_cast<double>(params.slots * kSocFull) + max_r;
    return static_cast<double>(params.slots) * max_price + max_p * energy;
}

struct TrainingResult {
    QTable table;
    std::vector<double> episode_income; // one entry per simulated day
    std::uint64_t steps = 0;
};

/// Runs `repetitions` passes over days [0, days) of `track`, one episode per
/// day and one step per hour. The station state carries over from day to day.
inline TrainingResult train(const StationParams& params, const CustomerModel& model, Schedules schedules,
                            const ObservationTrack& track, int days, int repetitions, Rng& rng) {
    if (days < 1 || repetitions < 1) throw DomainError("train: days and repetitions must be >= 1");
    if (track.days() < days) throw DomainError("train: observation track shorter than training days");
    params.validate();
    model.validate();
    schedules.validate();
    if (schedules.horizon == 0) {
        schedules.horizon = static_cast<std::uint64_t>(days) * static_cast<std::uint64_t>(repetitions) * kHoursPerDay;
    }

    const double bound = schedules.gamma < 1.0
                             ? std::max(std::abs(schedules.initial_q),
                                        reward_bound(params, model, track) / (1.0 - schedules.gamma))
                             : std::numeric_limits<double>::infinity();

    TrainingResult result{QTable(schedules.initial_q), {}, 0};
    result.episode_income.reserve(static_cast<std::size_t>(days) * static_cast<std::size_t>(repetitions));

    StationState state = admit(StationState(0, params.places), sample_arrivals(rng, 0, model, params.ttl_max)).state;
    for (int rep = 0; rep < repetitions; ++rep) {
        for (int day = 0; day < days; ++day) {
            double income = 0.0;
            for (int hour = 0; hour < kHoursPerDay; ++hour) {
                const ExogenousObservation& obs = track.at(day, hour);
                const ExogenousObservation& next_obs =
                    hour + 1 < kHoursPerDay ? track.at(day, hour + 1) : track.at((day + 1) % days, 0);

                const auto actions = enumerate_actions(state, params.slots);
                const StateKey key = encode_state(state, obs);
                const double epsilon = epsilon_at(result.steps, schedules);
                const std::size_t choice = select_action_index(result.table, key, actions.size(), epsilon, rng);

                Transition tr = step(state, actions[choice], obs, next_obs, rng, model, params);
                const auto next_count = enumerate_actions(tr.next_state, params.slots).size();
                const double q = q_update_indexed(result.table, key, static_cast<QTable::ActionIndex>(choice),
                                                  tr.reward, encode_state(tr.next_state, next_obs), next_count,
                                                  beta_at(result.steps, schedules), schedules.gamma);
                if (std::abs(q) > bound * (1.0 + 1e-12)) {
                    throw ContractViolation("train: Q-value left the discounted reward bound");
                }
                income += tr.reward;
                state = std::move(tr.next_state);
                ++result.steps;
            }
            result.episode_income.push_back(income);
        }
    }
    return result;
}

/// Q-learning on an explicit finite MDP with a uniformly random behaviour
/// policy and per-pair Robbins-Monro step sizes. Returns the learned values.
inline ActionValues q_learning(const FiniteMdp& mdp, double gamma, std::uint64_t steps, Rng& rng,
                               double rate_exponent = 0.6, std::size_t start_state = 0) {
    mdp.validate();
    QTable table;
    std::size_t s = start_state;
    std::uniform_int_distribution<std::size_t> pick(0, mdp.actions - 1);
    for (std::uint64_t i = 0; i < steps; ++i) {
        const std::size_t a = pick(rng);
        const std::size_t next = mdp.sample_next(s, a, rng);
        const StateKey key = finite_state_key(s);
        const double beta = robbins_monro_rate(table.visits(key, static_cast<QTable::ActionIndex>(a)), 1.0,
                                               rate_exponent);
        q_update_indexed(table, key, static_cast<QTable::ActionIndex>(a), mdp.reward[s][a], finite_state_key(next),
                         mdp.actions, beta, gamma);
        s = next;
    }
    ActionValues q(mdp.states, std::vector<double>(mdp.actions));
    for (std::size_t st = 0; st < mdp.states; ++st) {
        for (std::size_t a = 0; a < mdp.actions; ++a) {
            q[st][a] = table.value(finite_state_key(st), static_cast<QTable::ActionIndex>(a));
        }
    }
    return q;
}

} // namespace evq
