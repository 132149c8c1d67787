#pragma once

// Core value types of the charging-station model: user types and their
// willingness-to-pay curves, parked vehicles, the canonical station state
// and per-slot charge actions.
//
// Energy is measured in SOC-points: one point raises one vehicle's state of
// charge by one percentage point. All batteries share one capacity.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "evq/errors.hpp"

namespace evq {

inline constexpr int kHoursPerDay = 24;
inline constexpr int kSocStep = 10;
inline constexpr int kSocFull = 100;
inline constexpr int kDefaultTtlMax = 12;

/// A customer class: `id` orders types for canonical sorting, `max_price` is
/// what the customer pays for a full 0 -> 100% charge.
struct UserType {
    int id = 0;
    double max_price = 0.0;
    std::string name;

    friend bool operator==(const UserType& a, const UserType& b) {
        return a.id == b.id && a.max_price == b.max_price;
    }
};

inline UserType medium_type() { return UserType{0, 2.4, "medium"}; }
inline UserType rich_type() { return UserType{1, 3.6, "rich"}; }

inline void validate(const UserType& t) {
    if (!(t.max_price > 0.0)) {
        throw DomainError("user type '" + t.name + "' needs max_price > 0");
    }
    if (t.id < 0) {
        throw DomainError("user type '" + t.name + "' needs a non-negative id");
    }
}

/// Cumulative willingness to pay for reaching `soc` percent from empty.
/// Quadratic and concave on [0, 100], flat at `max_price` above.
inline double user_type_value(const UserType& type, double soc) {
    if (soc < 0.0) {
        throw DomainError("user_type_value: negative soc");
    }
    if (soc > kSocFull) {
        return type.max_price;
    }
    return type.max_price * (2.0 * soc - soc * soc / 100.0) / 100.0;
}

/// Price the customer pays for charging from `soc_from` to `soc_to`.
inline double charge_price(const UserType& type, double soc_from, double soc_to) {
    if (soc_from < 0.0 || soc_to > kSocFull) {
        throw DomainError("charge_price: soc outside [0, 100]");
    }
    if (soc_from > soc_to) {
        throw DomainError("charge_price: soc_from > soc_to");
    }
    return user_type_value(type, soc_to) - user_type_value(type, soc_from);
}

/// One parked EV. `completed` marks a vehicle that reached 100% at some
/// point; its stored soc is nullified to 0 but it may not be charged or
/// billed again.
struct Vehicle {
    int ttl = 1;
    int soc = 0;
    UserType type{};
    bool completed = false;

    bool chargeable() const { return !completed && soc < kSocFull; }

    friend bool operator==(const Vehicle& a, const Vehicle& b) {
        return a.ttl == b.ttl && a.soc == b.soc && a.type == b.type && a.completed == b.completed;
    }
};

inline bool is_valid(const Vehicle& v, int ttl_max = kDefaultTtlMax) {
    return v.ttl >= 1 && v.ttl <= ttl_max && v.soc >= 0 && v.soc <= kSocFull &&
           v.soc % kSocStep == 0 && v.type.max_price > 0.0;
}

// Canonical slot order: ttl, then type id; soc and the completion flag
// break the remaining ties so that permutations collapse to one layout.
inline bool canonical_less(const Vehicle& a, const Vehicle& b) {
    return std::tuple(a.ttl, a.type.id, a.soc, a.completed) <
           std::tuple(b.ttl, b.type.id, b.soc, b.completed);
}

using Slot = std::optional<Vehicle>;

struct StationState {
    int hour = 0;
    std::vector<Slot> slots;

    StationState() = default;
    StationState(int hour_of_day, std::size_t places) : hour(hour_of_day), slots(places) {}

    std::size_t places() const { return slots.size(); }

    std::size_t occupied() const {
        return static_cast<std::size_t>(
            std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.has_value(); }));
    }

    std::size_t vacant() const { return places() - occupied(); }

    friend bool operator==(const StationState&, const StationState&) = default;
};

inline bool slot_less(const Slot& a, const Slot& b) {
    if (!a) return false;
    if (!b) return true;
    return canonical_less(*a, *b);
}

inline void canonicalize(StationState& s) {
    std::stable_sort(s.slots.begin(), s.slots.end(), slot_less);
}

inline StationState canonicalized(StationState s) {
    canonicalize(s);
    return s;
}

inline bool is_canonical(const StationState& s) {
    return std::is_sorted(s.slots.begin(), s.slots.end(), slot_less);
}

/// Energy (SOC-points) delivered to each slot during one hour.
struct ChargeAction {
    std::vector<int> u;

    ChargeAction() = default;
    explicit ChargeAction(std::vector<int> amounts) : u(std::move(amounts)) {}

    static ChargeAction idle(std::size_t places) { return ChargeAction(std::vector<int>(places, 0)); }

    std::size_t nonzero() const {
        return static_cast<std::size_t>(std::count_if(u.begin(), u.end(), [](int x) { return x != 0; }));
    }

    int total() const {
        int sum = 0;
        for (int x : u) sum += x;
        return sum;
    }

    friend bool operator==(const ChargeAction&, const ChargeAction&) = default;
    friend bool operator<(const ChargeAction& a, const ChargeAction& b) { return a.u < b.u; }
};

/// Per-slot feasibility: u_i in {0, 10, 100 - soc_i} for chargeable vehicles,
/// zero elsewhere. The slot-count limit k is checked separately.
inline bool is_feasible_per_slot(const StationState& s, const ChargeAction& a) {
    if (a.u.size() != s.places()) return false;
    for (std::size_t i = 0; i < a.u.size(); ++i) {
        const int x = a.u[i];
        if (x == 0) continue;
        const Slot& slot = s.slots[i];
        if (!slot || !slot->chargeable()) return false;
        if (x != kSocStep && x != kSocFull - slot->soc) return false;
        if (slot->soc + x > kSocFull) return false;
    }
    return true;
}

inline bool is_feasible(const StationState& s, const ChargeAction& a, std::size_t k) {
    return a.nonzero() <= k && is_feasible_per_slot(s, a);
}

} // namespace evq
