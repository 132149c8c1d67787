#include <gtest/gtest.h>

#include <random>

#include "evq/policies.hpp"
#include "test_support.hpp"

namespace evq {
namespace {

StationState one_rich_empty_car() {
    StationState s(10, 5);
    s.slots[0] = Vehicle{3, 0, rich_type(), false};
    return s;
}

TEST(RandomPolicy, SingleActionIsForced) {
    Rng rng(1);
    const auto actions = enumerate_actions(StationState(0, 5), 3);
    ASSERT_EQ(actions.size(), 1u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(random_policy(actions, rng), 0u);
}

TEST(RandomPolicy, UniformFrequencies) {
    Rng rng(7);
    StationState s(0, 2);
    s.slots[0] = Vehicle{2, 0, rich_type(), false};
    s.slots[1] = Vehicle{3, 0, rich_type(), false};
    const auto actions = enumerate_actions(s, 1); // idle, 2 x {10, 100} on one slot
    ASSERT_EQ(actions.size(), 5u);
    std::vector<int> counts(actions.size(), 0);
    constexpr int kDraws = 10000;
    for (int i = 0; i < kDraws; ++i) ++counts[random_policy(actions, rng)];
    for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / kDraws, 0.2, 0.02);
}

TEST(RandomPolicy, EmptySetThrows) {
    Rng rng(1);
    EXPECT_THROW(random_policy({}, rng), DomainError);
    EXPECT_THROW(myopic_policy(StationState(0, 1), make_observation(0, 0), {}), DomainError);
    EXPECT_THROW(learned_policy(QTable{}, StationState(0, 1), make_observation(0, 0), {}), DomainError);
}

TEST(MyopicPolicy, ChargesFullyWhenEnergyIsCheap) {
    const auto s = one_rich_empty_car();
    const auto actions = enumerate_actions(s, 3);
    const auto i = myopic_policy(s, make_observation(0.0, 0.001), actions);
    EXPECT_EQ(actions[i].u[0], 100);
}

TEST(MyopicPolicy, IdlesWhenEnergyIsExpensive) {
    const auto s = one_rich_empty_car();
    const auto actions = enumerate_actions(s, 3);
    EXPECT_EQ(myopic_policy(s, make_observation(0.0, 10.0), actions), 0u);
    EXPECT_EQ(actions[0], ChargeAction::idle(5));
}

TEST(MyopicPolicy, EmptyStationIdles) {
    const StationState s(4, 5);
    EXPECT_EQ(myopic_policy(s, make_observation(5.0, 0.01), enumerate_actions(s, 3)), 0u);
}

TEST(MyopicPolicy, MaximizesImmediateReward) {
    std::mt19937_64 gen(11);
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto s = testing::random_state(gen, 4);
        const auto obs = make_observation(static_cast<double>(gen() % 50), 0.001 * static_cast<double>(gen() % 60));
        const auto actions = enumerate_actions(s, 2);
        const auto choice = myopic_policy(s, obs, actions);
        for (const auto& a : actions) EXPECT_LE(reward(s, a, obs, ExpensesMode::literal), reward(s, actions[choice], obs, ExpensesMode::literal));
    }
}

TEST(LearnedPolicy, EmptyTableFallsBackToIdle) {
    const auto s = one_rich_empty_car();
    EXPECT_EQ(learned_policy(QTable{}, s, make_observation(0, 0), enumerate_actions(s, 3)), 0u);
}

TEST(LearnedPolicy, FollowsDominantValue) {
    const auto s = one_rich_empty_car();
    const auto obs = make_observation(0, 0);
    QTable table;
    table.update(encode_state(s, obs), 2, 7.0, 1.0);
    table.update(encode_state(s, obs), 1, 3.0, 1.0);
    EXPECT_EQ(learned_policy(table, s, obs, enumerate_actions(s, 3)), 2u);
}

TEST(LearnedPolicy, ConsumesNoRandomness) {
    const auto s = one_rich_empty_car();
    const auto obs = make_observation(0, 0);
    const Policy p = LearnedPolicy{std::make_shared<const QTable>()};
    Rng used(5), fresh(5);
    choose(p, s, obs, enumerate_actions(s, 3), used);
    EXPECT_EQ(used(), fresh());
}

TEST(LearnedPolicy, MissingTableIsContractViolation) {
    Rng rng(1);
    const Policy p = LearnedPolicy{};
    EXPECT_THROW(choose(p, StationState(0, 1), make_observation(0, 0), enumerate_actions(StationState(0, 1), 1), rng),
                 ContractViolation);
}

TEST(Policies, ChoicesAreFeasible) {
    std::mt19937_64 gen(23);
    Rng rng(23);
    QTable table;
    std::normal_distribution<double> q(0.0, 1.0);
    std::vector<StationState> states;
    for (int i = 0; i < 300; ++i) states.push_back(testing::random_state(gen, 5));
    const auto obs = make_observation(4.0, 0.02);
    for (const auto& s : states) {
        for (QTable::ActionIndex a = 0; a < 8; ++a) table.update(encode_state(s, obs), a, q(gen), 1.0);
    }
    const std::vector<Policy> policies{RandomPolicy{}, MyopicPolicy{}, MyopicPolicy{ExpensesMode::clamped},
                                       LearnedPolicy{std::make_shared<const QTable>(table)}};
    for (const auto& s : states) {
        const auto actions = enumerate_actions(s, 3);
        for (const auto& p : policies) {
            const auto i = choose(p, s, obs, actions, rng);
            ASSERT_LT(i, actions.size()) << policy_name(p);
            EXPECT_TRUE(is_feasible(s, actions[i], 3)) << policy_name(p);
        }
    }
}

TEST(Policies, Names) {
    EXPECT_EQ(policy_name(RandomPolicy{}), "random");
    EXPECT_EQ(policy_name(MyopicPolicy{}), "myopic");
    EXPECT_EQ(policy_name(LearnedPolicy{}), "learned");
}

} // namespace
} // namespace evq
