#include "filippov/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "filippov/errors.hpp"

namespace filippov {

std::string to_string(DomainMode mode) {
    switch (mode) {
        case DomainMode::Plane: return "plane";
        case DomainMode::Torus: return "torus";
        case DomainMode::KleinBottle: return "klein";
    }
    return "?";
}

DomainMode domain_mode_from_string(const std::string& s) {
    if (s == "plane") return DomainMode::Plane;
    if (s == "torus") return DomainMode::Torus;
    if (s == "klein" || s == "kleinbottle" || s == "klein_bottle")
        return DomainMode::KleinBottle;
    throw ScenarioError("unknown domain mode '" + s + "' (expected plane|torus|klein)");
}

QuotientDomain::QuotientDomain(DomainMode m, double x0_, double y0_, double p_, double q_)
    : x0(x0_), y0(y0_), p(p_), q(q_), mode(m) {
    if (!(p > 0.0) || !(q > 0.0))
        throw ScenarioError("domain periods must be positive");
    if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(p) || !std::isfinite(q))
        throw ScenarioError("domain parameters must be finite");
}

bool QuotientDomain::contains(const Point& pt) const {
    return pt.x >= x0 && pt.x < x0 + p && pt.y >= y0 && pt.y < y0 + q;
}

namespace {

// Reduce v into [lo, lo+period), returning the integer number of periods
// removed. Guards against rounding placing the result on the far edge.
long reduce(double v, double lo, double period, double& out) {
    long k = 0;
    if (v >= lo && v < lo + period) {
        out = v;
        return 0;
    }
    k = static_cast<long>(std::floor((v - lo) / period));
    out = v - static_cast<double>(k) * period;
    while (out < lo) {
        out += period;
        --k;
    }
    while (out >= lo + period) {
        out -= period;
        ++k;
    }
    return k;
}

}  // namespace

DeckTransform QuotientDomain::canonical_chart(const Point& pt) const {
    DeckTransform t;
    if (mode == DomainMode::Plane) return t;
    double xc = 0.0;
    t.kx = reduce(pt.x, x0, p, xc);
    t.flip = (mode == DomainMode::KleinBottle) && (t.kx % 2 != 0);
    double yy = t.flip ? seam_reflect_y(pt.y) : pt.y;
    double yc = 0.0;
    t.ky = reduce(yy, y0, q, yc);
    return t;
}

Point QuotientDomain::apply(const DeckTransform& t, const Point& pt) const {
    if (mode == DomainMode::Plane || t.is_identity()) return pt;
    double x = pt.x - static_cast<double>(t.kx) * p;
    double y = t.flip ? seam_reflect_y(pt.y) : pt.y;
    y -= static_cast<double>(t.ky) * q;
    return {x, y};
}

Point QuotientDomain::canonicalize(const Point& pt) const {
    if (mode == DomainMode::Plane) return pt;
    return apply(canonical_chart(pt), pt);
}

Vec2 QuotientDomain::displacement(const Point& a, const Point& b) const {
    switch (mode) {
        case DomainMode::Plane:
            return b - a;
        case DomainMode::Torus: {
            double dx = b.x - a.x;
            double dy = b.y - a.y;
            dx -= p * std::round(dx / p);
            dy -= q * std::round(dy / q);
            return {dx, dy};
        }
        case DomainMode::KleinBottle: {
            Vec2 best{std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
            double best_norm = std::numeric_limits<double>::infinity();
            for (long kx = -1; kx <= 1; ++kx) {
                double bx = b.x + static_cast<double>(kx) * p;
                double by = (kx % 2 != 0) ? seam_reflect_y(b.y) : b.y;
                for (long ky = -1; ky <= 1; ++ky) {
                    Vec2 d{bx - a.x, by + static_cast<double>(ky) * q - a.y};
                    double n = d.norm();
                    if (n < best_norm) {
                        best_norm = n;
                        best = d;
                    }
                }
            }
            return best;
        }
    }
    return b - a;
}

}  // namespace filippov
