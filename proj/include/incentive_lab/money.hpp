#pragma once

#include <compare>
#include <cstdint>
#include <ostream>

namespace incentive_lab {

/// Integer amount of money in cents. No floating currency anywhere.
struct Cents {
    std::int64_t value = 0;

    constexpr Cents() = default;
    constexpr explicit Cents(std::int64_t v) : value(v) {}

    constexpr auto operator<=>(const Cents&) const = default;

    constexpr Cents& operator+=(Cents o) {
        value += o.value;
        return *this;
    }
    constexpr Cents& operator-=(Cents o) {
        value -= o.value;
        return *this;
    }
    friend constexpr Cents operator+(Cents a, Cents b) { return Cents{a.value + b.value}; }
    friend constexpr Cents operator-(Cents a, Cents b) { return Cents{a.value - b.value}; }
    friend constexpr Cents operator*(Cents a, std::int64_t k) { return Cents{a.value * k}; }
    friend constexpr Cents operator*(std::int64_t k, Cents a) { return Cents{a.value * k}; }

    friend std::ostream& operator<<(std::ostream& os, Cents c) { return os << c.value << "c"; }
};

namespace literals {
constexpr Cents operator""_c(unsigned long long v) { return Cents{static_cast<std::int64_t>(v)}; }
}  // namespace literals

}  // namespace incentive_lab
