#pragma once

#include <cmath>

namespace magpic {

/// Pair of real coordinates in the plane orthogonal to the magnetic field.
struct Vec2 {
    double v1 = 0.0;
    double v2 = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) noexcept {
        v1 += o.v1;
        v2 += o.v2;
        return *this;
    }
    constexpr Vec2& operator-=(const Vec2& o) noexcept {
        v1 -= o.v1;
        v2 -= o.v2;
        return *this;
    }
    constexpr Vec2& operator*=(double s) noexcept {
        v1 *= s;
        v2 *= s;
        return *this;
    }

    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr Vec2 operator+(Vec2 a, const Vec2& b) noexcept { return a += b; }
constexpr Vec2 operator-(Vec2 a, const Vec2& b) noexcept { return a -= b; }
constexpr Vec2 operator-(const Vec2& a) noexcept { return {-a.v1, -a.v2}; }
constexpr Vec2 operator*(double s, Vec2 a) noexcept { return a *= s; }
constexpr Vec2 operator*(Vec2 a, double s) noexcept { return a *= s; }
constexpr Vec2 operator/(const Vec2& a, double s) noexcept { return {a.v1 / s, a.v2 / s}; }

constexpr double dot(const Vec2& a, const Vec2& b) noexcept { return a.v1 * b.v1 + a.v2 * b.v2; }
constexpr double norm2(const Vec2& a) noexcept { return dot(a, a); }
inline double norm(const Vec2& a) noexcept { return std::hypot(a.v1, a.v2); }

/// Rotation by +pi/2: perp(v) = (-v2, v1).
constexpr Vec2 perp(const Vec2& v) noexcept { return {-v.v2, v.v1}; }

inline bool is_finite(const Vec2& v) noexcept { return std::isfinite(v.v1) && std::isfinite(v.v2); }

} // namespace magpic
