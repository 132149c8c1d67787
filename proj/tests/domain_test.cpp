#include <gtest/gtest.h>

#include <random>

#include "evq/domain.hpp"
#include "test_support.hpp"

namespace evq {
namespace {

TEST(UserTypeValue, EndpointsMatchMaxPrice) {
    EXPECT_EQ(user_type_value(rich_type(), 0), 0.0);
    EXPECT_EQ(user_type_value(rich_type(), 100), 3.6);
    EXPECT_EQ(user_type_value(medium_type(), 100), 2.4);
}

TEST(UserTypeValue, HalfCharge) {
    // 0.036 * (100 - 25)
    EXPECT_NEAR(user_type_value(rich_type(), 50), 2.7, 1e-12);
}

TEST(UserTypeValue, FlatAboveFull) {
    EXPECT_EQ(user_type_value(rich_type(), 130), 3.6);
}

TEST(UserTypeValue, NegativeSocThrows) {
    EXPECT_THROW(user_type_value(rich_type(), -10), DomainError);
}

TEST(ChargePrice, Examples) {
    EXPECT_EQ(charge_price(rich_type(), 0, 100), 3.6);
    EXPECT_EQ(charge_price(rich_type(), 50, 50), 0.0);
    // 3.6 - 0.036 * (180 - 81)
    EXPECT_NEAR(charge_price(rich_type(), 90, 100), 0.036, 1e-12);
}

TEST(ChargePrice, ReversedRangeThrows) {
    EXPECT_THROW(charge_price(rich_type(), 60, 50), DomainError);
}

TEST(UserTypeValue, MonotoneOnGrid) {
    for (const auto& t : {rich_type(), medium_type()}) {
        for (int a = 0; a <= 100; ++a) {
            for (int b = a; b <= 100; ++b) {
                EXPECT_LE(user_type_value(t, a), user_type_value(t, b)) << a << " " << b;
            }
        }
    }
}

TEST(ChargePrice, DiminishingReturnsPerTenPercent) {
    for (const auto& t : {rich_type(), medium_type()}) {
        for (int x = 10; x <= 90; x += 10) {
            EXPECT_LT(charge_price(t, x, x + 10), charge_price(t, x - 10, x)) << x;
        }
    }
}

TEST(UserType, Validation) {
    EXPECT_NO_THROW(validate(rich_type()));
    EXPECT_THROW(validate(UserType{2, 0.0, "free"}), DomainError);
}

TEST(Canonical, SortsByTtlThenType) {
    StationState s(3, 4);
    s.slots[0] = Vehicle{5, 20, rich_type(), false};
    s.slots[2] = Vehicle{2, 40, rich_type(), false};
    s.slots[3] = Vehicle{5, 0, medium_type(), false};
    canonicalize(s);
    ASSERT_TRUE(is_canonical(s));
    EXPECT_EQ(s.slots[0]->ttl, 2);
    EXPECT_EQ(s.slots[1]->type.id, medium_type().id);
    EXPECT_EQ(s.slots[2]->type.id, rich_type().id);
    EXPECT_FALSE(s.slots[3].has_value());
}

TEST(Canonical, IdempotentOnRandomStates) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        const StationState s = testing::random_state(rng, 5);
        EXPECT_EQ(canonicalized(s), s);
    }
}

TEST(Canonical, PermutationsCollapse) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 500; ++i) {
        const StationState s = testing::random_state(rng, 5);
        StationState shuffled = s;
        std::shuffle(shuffled.slots.begin(), shuffled.slots.end(), rng);
        EXPECT_EQ(canonicalized(shuffled), s);
    }
}

TEST(ChargeAction, Feasibility) {
    StationState s(0, 3);
    s.slots[0] = Vehicle{2, 30, rich_type(), false};
    s.slots[1] = Vehicle{3, 0, medium_type(), true};
    canonicalize(s);
    EXPECT_TRUE(is_feasible(s, ChargeAction({70, 0, 0}), 1));
    EXPECT_TRUE(is_feasible(s, ChargeAction({10, 0, 0}), 1));
    EXPECT_FALSE(is_feasible(s, ChargeAction({20, 0, 0}), 1));  // neither step nor top-up
    EXPECT_FALSE(is_feasible(s, ChargeAction({0, 10, 0}), 1));  // completed vehicle
    EXPECT_FALSE(is_feasible(s, ChargeAction({0, 0, 10}), 1));  // vacant
    EXPECT_FALSE(is_feasible(s, ChargeAction({10, 0}), 1));     // wrong width
}

} // namespace
} // namespace evq
