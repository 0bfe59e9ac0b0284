#pragma once

// =============================================================================
// Classification of switching-surface points into crossing / sliding /
// escaping / tangency from the one-sided normal derivatives F+h and F-h,
// the sliding vector field, the set-valued segment at a point, and whole-
// surface scans that locate tangency points and label the intervals between.
// =============================================================================

#include <utility>
#include <vector>

#include "filippov/system.hpp"

namespace filippov {

inline constexpr double kTangencyTol = 1e-10;  // |F h| below this is tangent

enum class SigmaLabel { Crossing, Sliding, Escaping, Tangency };

std::string to_string(SigmaLabel label);

enum class Visibility { Visible, Invisible };

struct TangencySide {
    int side = +1;  // +1 for the F+ piece, -1 for F-
    int order = 0;  // smallest k with |L^k h| above tolerance
    Visibility visibility = Visibility::Invisible;
};

struct SigmaClass {
    SigmaLabel label = SigmaLabel::Crossing;
    double f_plus_h = 0.0;
    double f_minus_h = 0.0;
    std::vector<TangencySide> tangency;  // populated when label == Tangency

    bool tangent_on(int side) const {
        for (const auto& t : tangency)
            if (t.side == side) return true;
        return false;
    }
    const TangencySide* side_detail(int side) const {
        for (const auto& t : tangency)
            if (t.side == side) return &t;
        return nullptr;
    }
};

// Classifies pt (required to satisfy |h(pt)| <= kOnSigmaTol; OffSurfaceError
// otherwise). Tangency order is found by increasing Lie derivatives; if all
// orders up to PiecewiseSystem::kMaxLieOrder vanish, OrderOverflowError.
SigmaClass classify_point(const PiecewiseSystem& sys, int surface, const Point& pt);

// Sliding vector field Z^s = (F-h F+ - F+h F-)/(F-h - F+h). Defined on
// sliding/escaping points; throws WrongRegionError elsewhere and
// DegenerateSlidingError when |F-h - F+h| < 1e-12.
Vec2 sliding_field(const PiecewiseSystem& sys, int surface, const Point& pt);

// Endpoints (F+(pt), F-(pt)) of the convex segment of admissible velocities.
std::pair<Vec2, Vec2> filippov_segment(const PiecewiseSystem& sys, int surface,
                                       const Point& pt);

// Convex weight of F+ in the sliding combination, lambda = F-h/(F-h - F+h).
double sliding_weight(const SigmaClass& cls);

enum class ParamAxis { X, Y };

struct ScanInterval {
    double param0 = 0.0;
    double param1 = 0.0;
    SigmaLabel label = SigmaLabel::Crossing;
};

struct TangencyPoint {
    double param = 0.0;
    Point pt;
    SigmaClass cls;
};

struct SurfaceScan {
    int surface = 0;
    ParamAxis axis = ParamAxis::X;
    double param0 = 0.0;
    double param1 = 0.0;
    bool closed = false;  // parameter wraps (quotient circle)
    std::vector<ScanInterval> intervals;
    std::vector<TangencyPoint> tangencies;

    Point point_at(double param) const { return points.empty() ? Point{} : interp(param); }
    std::vector<std::pair<double, Point>> points;  // sampled parameterization

private:
    Point interp(double param) const;
};

// Samples the surface at n >= 16 parameter values, locates tangency points by
// bracketing sign changes of F+h / F-h and bisecting to |F h| <= 1e-10, and
// returns maximal labeled intervals between them (sorted by parameter).
SurfaceScan scan_surface(const PiecewiseSystem& sys, int surface, int n);

// Solves the non-parameter coordinate of surface `surface` at the given
// parameter value (Newton + bisection fallback); used by scan_surface.
Point surface_point(const PiecewiseSystem& sys, int surface, ParamAxis axis,
                    double param, double other_seed);

}  // namespace filippov
