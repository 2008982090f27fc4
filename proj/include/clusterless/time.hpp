#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <string>

namespace clusterless {

// Simulated time (or a duration) in integer microseconds. The maximum
// representable value doubles as +infinity and absorbs arithmetic.
class Time {
public:
    using rep = std::int64_t;

    constexpr Time() = default;

    static constexpr Time micros(rep us) { return Time(us); }
    static constexpr Time infinity() { return Time(std::numeric_limits<rep>::max()); }
    static constexpr Time zero() { return Time(0); }

    // Rounds to the nearest microsecond.
    static Time seconds(double s);
    // Rounds up to the next microsecond; used for durations derived from
    // divisions so that a delay is never under-estimated.
    static Time seconds_ceil(double s);

    constexpr rep count() const { return us_; }
    constexpr bool is_infinite() const { return us_ == std::numeric_limits<rep>::max(); }
    constexpr bool is_finite() const { return !is_infinite(); }
    double to_seconds() const;

    constexpr auto operator<=>(const Time&) const = default;

    constexpr Time operator+(Time o) const {
        if (is_infinite() || o.is_infinite()) return infinity();
        return Time(us_ + o.us_);
    }
    constexpr Time operator-(Time o) const {
        if (is_infinite()) return infinity();
        return Time(us_ - o.us_);
    }
    constexpr Time& operator+=(Time o) { return *this = *this + o; }

private:
    constexpr explicit Time(rep us) : us_(us) {}
    rep us_ = 0;
};

constexpr Time max(Time a, Time b) { return a < b ? b : a; }
constexpr Time min(Time a, Time b) { return a < b ? a : b; }

// Seconds with six decimals, "inf" for infinity. Stable across platforms.
std::string format_seconds(Time t);

} // namespace clusterless
