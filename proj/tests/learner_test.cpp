#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "evq/learner.hpp"
#include "test_support.hpp"

namespace evq {
namespace {

Vehicle car(int ttl, int soc, UserType type = rich_type()) { return Vehicle{ttl, soc, type, false}; }

StationState station(int hour, std::vector<Vehicle> cars, std::size_t places = 5) {
    StationState s(hour, places);
    for (std::size_t i = 0; i < cars.size(); ++i) s.slots[i] = cars[i];
    canonicalize(s);
    return s;
}

ExogenousObservation levels(std::size_t r, std::size_t p) { return ExogenousObservation{r, p, 0.0, 0.0}; }

TEST(EncodeState, PermutationInvariant) {
    StationState a(3, 5), b(3, 5);
    a.slots[0] = car(4, 20);
    a.slots[3] = car(2, 50, medium_type());
    b.slots[4] = car(2, 50, medium_type());
    b.slots[1] = car(4, 20);
    canonicalize(a);
    canonicalize(b);
    EXPECT_EQ(encode_state(a, levels(0, 1)), encode_state(b, levels(0, 1)));
}

TEST(EncodeState, HourAndLevelsAreDistinguished) {
    EXPECT_NE(encode_state(StationState(0, 5), levels(0, 0)), encode_state(StationState(1, 5), levels(0, 0)));
    const auto s = station(7, {car(3, 10)});
    EXPECT_NE(encode_state(s, levels(0, 0)), encode_state(s, levels(1, 0)));
    EXPECT_NE(encode_state(s, levels(0, 0)), encode_state(s, levels(0, 1)));
}

TEST(EncodeState, RejectsNonCanonical) {
    StationState s(0, 3);
    s.slots[1] = car(2, 0);
    EXPECT_THROW(encode_state(s, levels(0, 0)), ContractViolation);
}

TEST(EncodeState, InjectiveOnCanonicalStates) {
    std::mt19937_64 rng(31);
    std::map<StateKey, std::pair<StationState, ExogenousObservation>> seen;
    for (int i = 0; i < 20000; ++i) {
        const auto s = testing::random_state(rng, 5);
        const auto obs = levels(rng() % 2, rng() % 2);
        const auto [it, inserted] = seen.try_emplace(encode_state(s, obs), s, obs);
        if (!inserted) {
            EXPECT_EQ(it->second.first, s);
            EXPECT_EQ(it->second.second.r_level, obs.r_level);
            EXPECT_EQ(it->second.second.p_level, obs.p_level);
        }
    }
}

TEST(Schedules, LinearInterpolation) {
    Schedules s;
    s.epsilon0 = 0.4;
    s.epsilon_min = 0.0;
    s.beta0 = 0.5;
    s.beta_min = 0.1;
    s.horizon = 1000;
    EXPECT_EQ(epsilon_at(0, s), 0.4);
    EXPECT_EQ(epsilon_at(1000, s), 0.0);
    EXPECT_DOUBLE_EQ(epsilon_at(500, s), 0.2);
    EXPECT_EQ(epsilon_at(5000, s), 0.0);
    EXPECT_EQ(beta_at(0, s), 0.5);
    EXPECT_DOUBLE_EQ(beta_at(500, s), 0.3);
    EXPECT_EQ(beta_at(1000, s), 0.1);
}

TEST(Schedules, Validation) {
    EXPECT_NO_THROW(Schedules{}.validate());
    Schedules s;
    s.epsilon_min = 0.95;
    EXPECT_THROW(s.validate(), ConfigError);
    s = Schedules{};
    s.gamma = 1.5;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(SelectAction, UniformWhenFullyExploring) {
    QTable table;
    table.update("s", 3, 100.0, 1.0);
    Rng rng(5);
    constexpr std::size_t kActions = 10;
    constexpr int kDraws = 10000;
    std::vector<int> counts(kActions, 0);
    for (int i = 0; i < kDraws; ++i) ++counts[select_action_index(table, "s", kActions, 1.0, rng)];
    double chi2 = 0.0;
    const double expected = static_cast<double>(kDraws) / kActions;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 27.88); // chi-square, 9 dof, p = 0.001
}

TEST(SelectAction, GreedyArgmaxAndTieBreak) {
    QTable table;
    table.update("s", 2, 5.0, 1.0);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(select_action_index(table, "s", 4, 0.0, rng), 2u);
    EXPECT_EQ(select_action_index(table, "unseen", 4, 0.0, rng), 0u);
    QTable flat;
    for (QTable::ActionIndex a = 0; a < 4; ++a) flat.update("s", a, 1.0, 1.0);
    EXPECT_EQ(select_action_index(flat, "s", 4, 0.0, rng), 0u);
    EXPECT_THROW(select_action_index(table, "s", 0, 0.0, rng), DomainError);
}

TEST(SelectAction, NegativeValuesLoseToUnvisited) {
    QTable table;
    table.update("s", 0, -1.0, 1.0);
    table.update("s", 1, -2.0, 1.0);
    EXPECT_EQ(table.greedy_action("s", 3), 2u);
    EXPECT_EQ(table.max_value("s", 3), 0.0);
    EXPECT_EQ(table.max_value("s", 2), -1.0);
}

TEST(SelectAction, ArgmaxInvariantUnderPositiveScaling) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> q(0.0, 3.0);
    QTable table;
    for (int s = 0; s < 50; ++s) {
        for (QTable::ActionIndex a = 0; a < 20; ++a) {
            if (rng() % 3 == 0) table.update("k" + std::to_string(s), a, q(rng), 1.0);
        }
    }
    std::vector<QTable::ActionIndex> before;
    for (int s = 0; s < 50; ++s) before.push_back(table.greedy_action("k" + std::to_string(s), 20));
    table.scale(7.5);
    for (int s = 0; s < 50; ++s) EXPECT_EQ(table.greedy_action("k" + std::to_string(s), 20), before[s]);
}

Transition one_car_transition(double reward) {
    Transition tr;
    tr.state = station(4, {car(3, 0)});
    tr.action = ChargeAction({100, 0, 0, 0, 0});
    tr.reward = reward;
    tr.next_state = StationState(5, 5);
    return tr;
}

TEST(QUpdate, HandEvaluated) {
    const auto tr = one_car_transition(2.0);
    QTable table;
    EXPECT_DOUBLE_EQ(q_update(table, tr, 0.5, 1.0, 3), 1.0);
    const auto key = encode_state(tr.state, tr.obs);
    const auto idx = static_cast<QTable::ActionIndex>(action_index(enumerate_actions(tr.state, 3), tr.action));
    EXPECT_EQ(idx, 2u);
    EXPECT_EQ(table.visits(key, idx), 1u);
}

TEST(QUpdate, ZeroRateAndMyopicOverwrite) {
    const auto tr = one_car_transition(2.0);
    QTable table(0.25);
    EXPECT_EQ(q_update(table, tr, 0.0, 0.9, 3), 0.25);
    EXPECT_EQ(q_update(table, tr, 1.0, 0.0, 3), 2.0);
}

TEST(QUpdate, BootstrapsFromNextStateMax) {
    auto tr = one_car_transition(1.0);
    tr.next_state = station(5, {car(2, 10)});
    QTable table;
    table.update(encode_state(tr.next_state, tr.next_obs), 1, 4.0, 1.0);
    EXPECT_DOUBLE_EQ(q_update(table, tr, 1.0, 0.5, 3), 3.0);
}

TEST(QUpdate, RejectsForeignAction) {
    auto tr = one_car_transition(1.0);
    tr.action = ChargeAction({20, 0, 0, 0, 0});
    QTable table;
    EXPECT_THROW(q_update(table, tr, 0.5, 0.9, 3), ContractViolation);
}

TEST(QUpdate, ReplayIsOrderDeterministic) {
    StationParams params;
    const auto model = default_customer_model();
    Rng rng(99);
    std::vector<Transition> stream;
    StationState s(0, 5);
    for (int i = 0; i < 2000; ++i) {
        const auto actions = enumerate_actions(s, params.slots);
        const auto& a = actions[std::uniform_int_distribution<std::size_t>(0, actions.size() - 1)(rng)];
        stream.push_back(step(s, a, make_observation(3, 0.02), make_observation(3, 0.02), rng, model, params));
        s = stream.back().next_state;
    }
    const auto replay = [&] {
        QTable t;
        for (const auto& tr : stream) q_update(t, tr, 0.3, 0.9, params.slots);
        return t;
    };
    EXPECT_EQ(replay(), replay());
}

TEST(QTable, SnapshotRoundTrip) {
    QTable table(0.125);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> q(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const auto s = testing::random_state(rng, 5);
        table.update(encode_state(s, levels(1, 0)), static_cast<QTable::ActionIndex>(rng() % 100), q(rng), 0.7);
    }
    std::stringstream buf;
    table.save(buf);
    EXPECT_EQ(buf.str().rfind("EVQTAB1\n", 0), 0u);
    const QTable back = QTable::load(buf);
    EXPECT_EQ(back, table);
}

TEST(QTable, SnapshotErrors) {
    std::istringstream bad_magic("EVQTAB0\ninitial_q 0x0p+0\nentries 0\n");
    EXPECT_THROW(QTable::load(bad_magic), DataError);
    std::istringstream truncated("EVQTAB1\ninitial_q 0x0p+0\nentries 2\n0001 3 0x1p+0 1\n");
    EXPECT_THROW(QTable::load(truncated), DataError);
    std::istringstream bad_hex("EVQTAB1\ninitial_q 0x0p+0\nentries 1\nzz 3 0x1p+0 1\n");
    EXPECT_THROW(QTable::load(bad_hex), DataError);
}

ObservationTrack flat_track(int days, double r, double p) {
    return ObservationTrack::constant(days, ExogenousObservation{0, 0, r, p});
}

TEST(Train, NoCustomersMeansNoIncome) {
    StationParams params;
    CustomerModel model = default_customer_model();
    model.lambda.fill(0.0);
    Rng rng(1);
    const auto result = train(params, model, Schedules{}, flat_track(1, 0.0, 0.03), 1, 1, rng);
    ASSERT_EQ(result.episode_income.size(), 1u);
    EXPECT_EQ(result.episode_income[0], 0.0);
    EXPECT_EQ(result.steps, 24u);
    result.table.for_each([](const StateKey& k, QTable::ActionIndex a, const QEntry&) {
        EXPECT_EQ(a, 0u);
        for (std::size_t i = 3; i < k.size(); ++i) EXPECT_EQ(k[i], '\0'); // every slot vacant
    });
}

TEST(Train, DeterministicAndBounded) {
    StationParams params;
    const auto model = default_customer_model();
    Schedules sched;
    const auto track = flat_track(5, 8.0, 0.022);
    const auto run = [&] {
        Rng rng(2024);
        return train(params, model, sched, track, 5, 20, rng);
    };
    const auto a = run();
    const auto b = run();
    EXPECT_EQ(a.table, b.table);
    EXPECT_EQ(a.episode_income, b.episode_income);
    EXPECT_EQ(a.steps, 5u * 20u * 24u);
    EXPECT_LE(a.table.size(), a.steps);

    const double bound = reward_bound(params, model, track) / (1.0 - sched.gamma);
    a.table.for_each([&](const StateKey&, QTable::ActionIndex, const QEntry& e) { EXPECT_LE(std::abs(e.q), bound); });
}

TEST(Train, RejectsEmptyRuns) {
    Rng rng(1);
    EXPECT_THROW(train(StationParams{}, default_customer_model(), Schedules{}, flat_track(1, 0, 0), 0, 1, rng),
                 DomainError);
    EXPECT_THROW(train(StationParams{}, default_customer_model(), Schedules{}, flat_track(1, 0, 0), 2, 1, rng),
                 DomainError);
}

TEST(RobbinsMonro, StepSizes) {
    EXPECT_EQ(robbins_monro_rate(0), 1.0);
    EXPECT_LT(robbins_monro_rate(100), robbins_monro_rate(99));
    EXPECT_NEAR(robbins_monro_rate(3, 1.0, 1.0), 0.25, 1e-15);
}

} // namespace
} // namespace evq
