#pragma once

// Small explicit MDPs and their exact action values by value iteration.
// Used as the reference the tabular learner is checked against.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <vector>

#include "evq/errors.hpp"

namespace evq {

struct FiniteMdp {
    std::size_t states = 0;
    std::size_t actions = 0;
    // transition[s][a][s'] = P(s' | s, a)
    std::vector<std::vector<std::vector<double>>> transition;
    // reward[s][a], received on taking a in s
    std::vector<std::vector<double>> reward;

    void validate() const {
        if (states == 0 || actions == 0) throw DomainError("finite MDP needs states and actions");
        if (transition.size() != states || reward.size() != states) throw DomainError("finite MDP shape mismatch");
        for (std::size_t s = 0; s < states; ++s) {
            if (transition[s].size() != actions || reward[s].size() != actions) {
                throw DomainError("finite MDP shape mismatch");
            }
            for (const auto& row : transition[s]) {
                if (row.size() != states) throw DomainError("finite MDP shape mismatch");
                double sum = 0.0;
                for (double p : row) {
                    if (p < 0.0) throw DomainError("negative transition probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-12) throw DomainError("transition row does not sum to 1");
            }
        }
    }

    template <class Urbg>
    std::size_t sample_next(std::size_t s, std::size_t a, Urbg& rng) const {
        const auto& row = transition[s][a];
        return static_cast<std::size_t>(std::discrete_distribution<std::size_t>(row.begin(), row.end())(rng));
    }
};

using ActionValues = std::vector<std::vector<double>>;

/// Iterates Q <- R + gamma * P max Q until the sup-norm change drops below `tol`.
inline ActionValues value_iteration_oracle(const FiniteMdp& mdp, double gamma, double tol) {
    if (!(gamma >= 0.0) || gamma >= 1.0) throw DomainError("value iteration needs 0 <= gamma < 1");
    if (!(tol > 0.0)) throw DomainError("value iteration needs tol > 0");
    mdp.validate();

    ActionValues q(mdp.states, std::vector<double>(mdp.actions, 0.0));
    std::vector<double> v(mdp.states, 0.0);
    while (true) {
        double change = 0.0;
        ActionValues next = q;
        for (std::size_t s = 0; s < mdp.states; ++s) {
            for (std::size_t a = 0; a < mdp.actions; ++a) {
                double expected = 0.0;
                for (std::size_t t = 0; t < mdp.states; ++t) expected += mdp.transition[s][a][t] * v[t];
                next[s][a] = mdp.reward[s][a] + gamma * expected;
                change = std::max(change, std::abs(next[s][a] - q[s][a]));
            }
        }
        q = std::move(next);
        for (std::size_t s = 0; s < mdp.states; ++s) v[s] = *std::max_element(q[s].begin(), q[s].end());
        if (change < tol) return q;
    }
}

} // namespace evq
