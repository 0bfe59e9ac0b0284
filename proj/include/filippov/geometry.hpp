#pragma once

// =============================================================================
// Base domain: a rectangle in the plane, optionally glued into a torus or a
// Klein bottle. All dynamics run in canonical coordinates inside the
// fundamental rectangle [x0, x0+p) x [y0, y0+q); the deck transforms recorded
// by canonical_chart() let callers move exact points and vectors between the
// covering plane and the quotient.
// =============================================================================

#include <cmath>
#include <string>

namespace filippov {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

using Point = Vec2;

enum class DomainMode { Plane, Torus, KleinBottle };

std::string to_string(DomainMode mode);
DomainMode domain_mode_from_string(const std::string& s);

// Deck transform taking a covering-plane point into the fundamental
// rectangle: x -> x - kx*p, then (Klein, kx odd) y -> 2*y0 + q - y,
// then y -> y - ky*q.
struct DeckTransform {
    long kx = 0;
    long ky = 0;
    bool flip = false;

    bool is_identity() const { return kx == 0 && ky == 0 && !flip; }
};

struct QuotientDomain {
    double x0 = 0.0;
    double y0 = 0.0;
    double p = 1.0;
    double q = 1.0;
    DomainMode mode = DomainMode::Plane;

    QuotientDomain() = default;
    QuotientDomain(DomainMode m, double x0_, double y0_, double p_, double q_);

    double x1() const { return x0 + p; }
    double y1() const { return y0 + q; }
    double area() const { return p * q; }
    bool is_quotient() const { return mode != DomainMode::Plane; }

    // Reflection across the Klein seam in the y coordinate; an involution.
    double seam_reflect_y(double y) const { return (2.0 * y0 + q) - y; }

    bool contains(const Point& pt) const;

    // Canonical representative in [x0,x0+p) x [y0,y0+q). Identity for Plane.
    Point canonicalize(const Point& pt) const;

    // Same reduction, but also reports the deck transform that was applied,
    // so equivalent nearby points can be mapped with the identical isometry.
    DeckTransform canonical_chart(const Point& pt) const;

    Point apply(const DeckTransform& t, const Point& pt) const;
    Vec2 apply_vector(const DeckTransform& t, const Vec2& v) const {
        return t.flip ? Vec2{v.x, -v.y} : v;
    }

    // Minimal-norm representative of b - a over all identifications.
    Vec2 displacement(const Point& a, const Point& b) const;

    double distance(const Point& a, const Point& b) const {
        return displacement(a, b).norm();
    }
};

}  // namespace filippov
