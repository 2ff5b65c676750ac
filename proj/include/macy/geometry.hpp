#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace macy {

/** Point or tangent vector in the flat rank-space (orthonormal basis e1, e2).
 *  Rank-1 objects use x1 only and keep x2 at zero. */
struct Vec2 {
    double x1 = 0.0;
    double x2 = 0.0;

    Vec2() = default;
    Vec2(double a, double b) : x1(a), x2(b) {}

    Vec2 operator+(const Vec2& o) const { return {x1 + o.x1, x2 + o.x2}; }
    Vec2 operator-(const Vec2& o) const { return {x1 - o.x1, x2 - o.x2}; }
    Vec2 operator-() const { return {-x1, -x2}; }
    Vec2 operator*(double s) const { return {x1 * s, x2 * s}; }
    Vec2& operator+=(const Vec2& o) { x1 += o.x1; x2 += o.x2; return *this; }
    Vec2& operator-=(const Vec2& o) { x1 -= o.x1; x2 -= o.x2; return *this; }

    double dot(const Vec2& o) const { return x1 * o.x1 + x2 * o.x2; }
    double norm2() const { return x1 * x1 + x2 * x2; }
    double norm() const { return std::sqrt(norm2()); }
    double inf_dist(const Vec2& o) const {
        return std::max(std::abs(x1 - o.x1), std::abs(x2 - o.x2));
    }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

/** 2x2 matrix, row major. Doubles as a 1x1 matrix for rank-1 work
 *  (the second row and column stay at identity). */
struct Mat2 {
    double a11 = 1.0, a12 = 0.0;
    double a21 = 0.0, a22 = 1.0;

    static Mat2 identity() { return {}; }
    static Mat2 zero() { return {0.0, 0.0, 0.0, 0.0}; }

    Mat2() = default;
    Mat2(double m11, double m12, double m21, double m22)
        : a11(m11), a12(m12), a21(m21), a22(m22) {}

    Vec2 apply(const Vec2& v) const {
        return {a11 * v.x1 + a12 * v.x2, a21 * v.x1 + a22 * v.x2};
    }

    Mat2 operator*(const Mat2& o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
                a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
    }

    Mat2 operator+(const Mat2& o) const {
        return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
    }

    Mat2 scaled(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }

    Mat2 transpose() const { return {a11, a21, a12, a22}; }

    Mat2 inverse() const {
        const double d = det();
        return {a22 / d, -a12 / d, -a21 / d, a11 / d};
    }

    double inf_dist(const Mat2& o) const {
        double d = std::abs(a11 - o.a11);
        d = std::max(d, std::abs(a12 - o.a12));
        d = std::max(d, std::abs(a21 - o.a21));
        d = std::max(d, std::abs(a22 - o.a22));
        return d;
    }
};

/** Rank-2 reflection across the line through the origin at angle phi. */
inline Mat2 reflection_matrix(double phi) {
    const double c = std::cos(2.0 * phi);
    const double s = std::sin(2.0 * phi);
    return {c, s, s, -c};
}

/** Snap values that are within 1e-15 of 0, +-1/2, +-1 to the exact constant.
 *  Keeps generator matrices exact where the angle is a multiple of pi/4
 *  so that grid-aligned reflections map grid nodes to grid nodes. */
inline double snap_unit(double v) {
    static constexpr double targets[] = {0.0, 0.5, -0.5, 1.0, -1.0};
    for (double t : targets) {
        if (std::abs(v - t) < 1e-15) return t;
    }
    return v;
}

inline Mat2 snap_unit(const Mat2& m) {
    return {snap_unit(m.a11), snap_unit(m.a12), snap_unit(m.a21), snap_unit(m.a22)};
}

}  // namespace macy
