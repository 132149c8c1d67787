#pragma once

// Decision policies behind one contract:
// (state, observation, feasible actions, rng) -> index into the actions.

#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "evq/env.hpp"
#include "evq/errors.hpp"
#include "evq/learner.hpp"

namespace evq {

/// Uniform over the feasible actions.
inline std::size_t random_policy(const std::vector<ChargeAction>& actions, Rng& rng) {
    if (actions.empty()) throw DomainError("random_policy: empty action set");
    return std::uniform_int_distribution<std::size_t>(0, actions.size() - 1)(rng);
}

/// Greedy on the immediate reward; ties go to the lowest index.
inline std::size_t myopic_policy(const StationState& state, const ExogenousObservation& obs,
                                 const std::vector<ChargeAction>& actions, ExpensesMode mode = ExpensesMode::literal) {
    if (actions.empty()) throw DomainError("myopic_policy: empty action set");
    std::size_t best = 0;
    double best_reward = reward(state, actions[0], obs, mode);
    for (std::size_t i = 1; i < actions.size(); ++i) {
        const double r = reward(state, actions[i], obs, mode);
        if (r > best_reward) {
            best_reward = r;
            best = i;
        }
    }
    return best;
}

/// Greedy on a frozen Q-table. Consumes no randomness.
inline std::size_t learned_policy(const QTable& table, const StationState& state, const ExogenousObservation& obs,
                                  const std::vector<ChargeAction>& actions) {
    if (actions.empty()) throw DomainError("learned_policy: empty action set");
    return table.greedy_action(encode_state(state, obs), actions.size());
}

struct RandomPolicy {};

struct MyopicPolicy {
    ExpensesMode mode = ExpensesMode::literal;
};

struct LearnedPolicy {
    std::shared_ptr<const QTable> table;
};

using Policy = std::variant<RandomPolicy, MyopicPolicy, LearnedPolicy>;

inline std::string policy_name(const Policy& p) {
    struct Visitor {
        std::string operator()(const RandomPolicy&) const { return "random"; }
        std::string operator()(const MyopicPolicy&) const { return "myopic"; }
        std::string operator()(const LearnedPolicy&) const { return "learned"; }
    };
    return std::visit(Visitor{}, p);
}

inline std::size_t choose(const Policy& policy, const StationState& state, const ExogenousObservation& obs,
                          const std::vector<ChargeAction>& actions, Rng& rng) {
    struct Visitor {
        const StationState& state;
        const ExogenousObservation& obs;
        const std::vector<ChargeAction>& actions;
        Rng& rng;

        std::size_t operator()(const RandomPolicy&) const { return random_policy(actions, rng); }
        std::size_t operator()(const MyopicPolicy& p) const { return myopic_policy(state, obs, actions, p.mode); }
        std::size_t operator()(const LearnedPolicy& p) const {
            if (!p.table) throw ContractViolation("learned policy has no Q-table");
            return learned_policy(*p.table, state, obs, actions);
        }
    };
    return std::visit(Visitor{state, obs, actions, rng}, policy);
}

} // namespace evq
