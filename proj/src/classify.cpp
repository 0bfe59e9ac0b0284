#include "filippov/classify.hpp"

#include <algorithm>
#include <cmath>

#include "filippov/errors.hpp"

namespace filippov {

std::string to_string(SigmaLabel label) {
    switch (label) {
        case SigmaLabel::Crossing: return "crossing";
        case SigmaLabel::Sliding: return "sliding";
        case SigmaLabel::Escaping: return "escaping";
        case SigmaLabel::Tangency: return "tangency";
    }
    return "?";
}

namespace {

constexpr double kHigherOrderTol = 1e-8;

void require_on_surface(const PiecewiseSystem& sys, int surface, const Point& pt) {
    double h = sys.surfaces[surface].eval(sys.domain.canonicalize(pt));
    if (std::fabs(h) > kOnSigmaTol)
        throw OffSurfaceError("point is off surface " + std::to_string(surface) +
                              " (|h| = " + format_double(std::fabs(h)) + ")");
}

TangencySide tangency_detail(const PiecewiseSystem& sys, int surface, int side,
                             const SideView& view) {
    TangencySide detail;
    detail.side = side;
    // Evaluate in the side's chart so seam-adjacent pieces use their own
    // coordinates.
    for (int k = 2; k <= PiecewiseSystem::kMaxLieOrder; ++k) {
        double lk = sys.lie_derivative_expr(view.piece, surface, k).eval(view.chart_point);
        if (std::fabs(lk) > kHigherOrderTol) {
            detail.order = k;
            bool visible = side > 0 ? lk > 0.0 : lk < 0.0;
            detail.visibility = visible ? Visibility::Visible : Visibility::Invisible;
            return detail;
        }
    }
    throw OrderOverflowError("all Lie derivatives up to order " +
                             std::to_string(PiecewiseSystem::kMaxLieOrder) +
                             " vanish on surface " + std::to_string(surface));
}

}  // namespace

SigmaClass classify_point(const PiecewiseSystem& sys, int surface, const Point& pt) {
    require_on_surface(sys, surface, pt);
    Point c = sys.domain.canonicalize(pt);

    SideView plus = sys.side_view(surface, c, +1);
    SideView minus = sys.side_view(surface, c, -1);

    // F h = <grad h, F>, with the one-sided field read in its own chart.
    auto normal_derivative = [&](const SideView& v) {
        return sys.lie_derivative_expr(v.piece, surface, 1).eval(v.chart_point);
    };

    SigmaClass cls;
    cls.f_plus_h = normal_derivative(plus);
    cls.f_minus_h = normal_derivative(minus);

    bool plus_tangent = std::fabs(cls.f_plus_h) <= kTangencyTol;
    bool minus_tangent = std::fabs(cls.f_minus_h) <= kTangencyTol;

    if (plus_tangent || minus_tangent) {
        cls.label = SigmaLabel::Tangency;
        if (plus_tangent) cls.tangency.push_back(tangency_detail(sys, surface, +1, plus));
        if (minus_tangent) cls.tangency.push_back(tangency_detail(sys, surface, -1, minus));
        return cls;
    }

    if (cls.f_plus_h * cls.f_minus_h > 0.0) {
        cls.label = SigmaLabel::Crossing;
    } else if (cls.f_plus_h < 0.0) {
        cls.label = SigmaLabel::Sliding;
    } else {
        cls.label = SigmaLabel::Escaping;
    }
    return cls;
}

Vec2 sliding_field(const PiecewiseSystem& sys, int surface, const Point& pt) {
    SigmaClass cls = classify_point(sys, surface, pt);
    if (cls.label != SigmaLabel::Sliding && cls.label != SigmaLabel::Escaping)
        throw WrongRegionError("sliding field requested on a " + to_string(cls.label) +
                               " point");
    double denom = cls.f_minus_h - cls.f_plus_h;
    if (std::fabs(denom) < 1e-12)
        throw DegenerateSlidingError("|F-h - F+h| < 1e-12");
    Point c = sys.domain.canonicalize(pt);
    Vec2 fp = sys.sided_field(surface, c, +1);
    Vec2 fm = sys.sided_field(surface, c, -1);
    return (cls.f_minus_h * fp - cls.f_plus_h * fm) * (1.0 / denom);
}

std::pair<Vec2, Vec2> filippov_segment(const PiecewiseSystem& sys, int surface,
                                       const Point& pt) {
    require_on_surface(sys, surface, pt);
    Point c = sys.domain.canonicalize(pt);
    return {sys.sided_field(surface, c, +1), sys.sided_field(surface, c, -1)};
}

double sliding_weight(const SigmaClass& cls) {
    double denom = cls.f_minus_h - cls.f_plus_h;
    return cls.f_minus_h / denom;
}

// -----------------------------------------------------------------------------
// Surface scan
// -----------------------------------------------------------------------------

Point SurfaceScan::interp(double param) const {
    auto it = std::lower_bound(points.begin(), points.end(), param,
                               [](const auto& a, double b) { return a.first < b; });
    if (it == points.begin()) return it->second;
    if (it == points.end()) return points.back().second;
    auto prev = std::prev(it);
    double w = (param - prev->first) / (it->first - prev->first);
    return {prev->second.x + w * (it->second.x - prev->second.x),
            prev->second.y + w * (it->second.y - prev->second.y)};
}

Point surface_point(const PiecewiseSystem& sys, int surface, ParamAxis axis,
                    double param, double other_seed) {
    const SwitchingSurface& s = sys.surfaces[surface];
    const QuotientDomain& d = sys.domain;
    double lo = axis == ParamAxis::X ? d.y0 : d.x0;
    double span = axis == ParamAxis::X ? d.q : d.p;

    auto at = [&](double other) {
        return axis == ParamAxis::X ? Point{param, other} : Point{other, param};
    };
    auto h_of = [&](double other) { return s.eval(at(other)); };
    auto dh_of = [&](double other) {
        Vec2 g = s.gradient(at(other));
        return axis == ParamAxis::X ? g.y : g.x;
    };

    // Newton from the seed, with a bracketing fallback over the cross-section.
    double v = other_seed;
    for (int it = 0; it < 50; ++it) {
        double h = h_of(v);
        if (std::fabs(h) <= 1e-13) return at(v);
        double dh = dh_of(v);
        if (std::fabs(dh) < 1e-12) break;
        double step = h / dh;
        v -= step;
        if (std::fabs(step) < 1e-15) break;
    }
    if (std::fabs(h_of(v)) <= 1e-11) return at(v);

    // Fallback: bracket a sign change along the cross-section and bisect.
    const int n = 512;
    double prev = h_of(lo);
    double prev_v = lo;
    for (int i = 1; i <= n; ++i) {
        double cur_v = lo + span * static_cast<double>(i) / n;
        double cur = h_of(cur_v);
        if (prev == 0.0) return at(prev_v);
        if (prev * cur <= 0.0 && cur != prev) {
            double a = prev_v, b = cur_v, ha = prev;
            for (int k = 0; k < 200; ++k) {
                double m = 0.5 * (a + b);
                double hm = h_of(m);
                if (std::fabs(hm) <= 1e-13 || (b - a) < 1e-15) return at(m);
                if ((ha < 0) != (hm < 0)) {
                    b = m;
                } else {
                    a = m;
                    ha = hm;
                }
            }
            return at(0.5 * (a + b));
        }
        prev = cur;
        prev_v = cur_v;
    }
    throw OffSurfaceError("surface " + std::to_string(surface) +
                          " has no zero at parameter " + format_double(param));
}

namespace {

ParamAxis choose_axis(const PiecewiseSystem& sys, int surface) {
    const QuotientDomain& d = sys.domain;
    const SwitchingSurface& s = sys.surfaces[surface];
    double sx = 0.0, sy = 0.0;
    const int n = 16;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Point pt{d.x0 + (i + 0.5) / n * d.p, d.y0 + (j + 0.5) / n * d.q};
            Vec2 g = s.gradient(pt);
            sx += std::fabs(g.x);
            sy += std::fabs(g.y);
        }
    // Strong dh/dy means the surface is a graph over x.
    return sy >= sx ? ParamAxis::X : ParamAxis::Y;
}

}  // namespace

SurfaceScan scan_surface(const PiecewiseSystem& sys, int surface, int n) {
    if (n < 16) throw Error("scan-error", "scan_surface requires n >= 16");
    const QuotientDomain& d = sys.domain;

    SurfaceScan scan;
    scan.surface = surface;
    scan.axis = choose_axis(sys, surface);
    scan.closed = d.is_quotient();
    scan.param0 = scan.axis == ParamAxis::X ? d.x0 : d.y0;
    double span = scan.axis == ParamAxis::X ? d.p : d.q;
    scan.param1 = scan.param0 + span;

    // Quotient circles use a half-open equispaced grid including param0;
    // plane segments include both endpoints.
    int samples = n;
    auto param_of = [&](int i) {
        if (scan.closed) return scan.param0 + span * static_cast<double>(i) / samples;
        return scan.param0 + span * static_cast<double>(i) / (samples - 1);
    };

    double seed = scan.axis == ParamAxis::X ? d.y0 + 0.5 * d.q : d.x0 + 0.5 * d.p;
    std::vector<double> params;
    std::vector<double> fph, fmh;
    for (int i = 0; i < samples; ++i) {
        double t = param_of(i);
        Point pt = surface_point(sys, surface, scan.axis, t, seed);
        seed = scan.axis == ParamAxis::X ? pt.y : pt.x;
        scan.points.emplace_back(t, pt);
        SideView plus = sys.side_view(surface, pt, +1);
        SideView minus = sys.side_view(surface, pt, -1);
        params.push_back(t);
        fph.push_back(sys.lie_derivative_expr(plus.piece, surface, 1).eval(plus.chart_point));
        fmh.push_back(sys.lie_derivative_expr(minus.piece, surface, 1).eval(minus.chart_point));
    }

    auto normal_at = [&](double t, int side, double seed_other) {
        Point pt = surface_point(sys, surface, scan.axis, t, seed_other);
        SideView view = sys.side_view(surface, pt, side);
        return sys.lie_derivative_expr(view.piece, surface, 1).eval(view.chart_point);
    };

    // Bracket sign changes of each one-sided normal derivative and refine.
    std::vector<double> roots;
    int pairs = scan.closed ? samples : samples - 1;
    for (int i = 0; i < pairs; ++i) {
        int j = (i + 1) % samples;
        double t0 = params[i];
        double t1 = scan.closed && j == 0 ? scan.param1 : params[j];
        double seed_other =
            scan.axis == ParamAxis::X ? scan.points[i].second.y : scan.points[i].second.x;
        for (int side = 0; side < 2; ++side) {
            const std::vector<double>& vals = side == 0 ? fph : fmh;
            double a = vals[i], b = vals[j];
            if (a == 0.0) {
                roots.push_back(t0);
                continue;
            }
            if (a * b < 0.0) {
                double lo = t0, hi = t1, va = a;
                for (int k = 0; k < 80; ++k) {
                    double mid = 0.5 * (lo + hi);
                    double vm = normal_at(mid, side == 0 ? +1 : -1, seed_other);
                    if (std::fabs(vm) <= kTangencyTol) {
                        lo = hi = mid;
                        break;
                    }
                    if ((va < 0) != (vm < 0))
                        hi = mid;
                    else {
                        lo = mid;
                        va = vm;
                    }
                }
                roots.push_back(0.5 * (lo + hi));
            }
        }
    }

    std::sort(roots.begin(), roots.end());
    std::vector<double> merged;
    for (double r : roots) {
        if (merged.empty() || r - merged.back() > 1e-8)
            merged.push_back(r);
        else
            merged.back() = 0.5 * (merged.back() + r);
    }

    for (double r : merged) {
        TangencyPoint tp;
        tp.param = r;
        tp.pt = surface_point(sys, surface, scan.axis, r,
                              scan.axis == ParamAxis::X ? scan.points[0].second.y
                                                        : scan.points[0].second.x);
        tp.cls = classify_point(sys, surface, tp.pt);
        scan.tangencies.push_back(std::move(tp));
    }

    // Label maximal intervals between consecutive tangency parameters.
    std::vector<double> cuts = merged;
    if (!scan.closed) {
        cuts.insert(cuts.begin(), scan.param0);
        cuts.push_back(scan.param1);
    } else if (cuts.empty()) {
        cuts = {scan.param0, scan.param1};
    } else {
        cuts.push_back(cuts.front() + span);  // wrap
    }
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double a = cuts[i], b = cuts[i + 1];
        if (b - a < 1e-9) continue;
        double mid = 0.5 * (a + b);
        Point pt = surface_point(sys, surface, scan.axis, mid,
                                 scan.axis == ParamAxis::X ? scan.points[0].second.y
                                                           : scan.points[0].second.x);
        ScanInterval iv;
        iv.param0 = a;
        iv.param1 = b;
        iv.label = classify_point(sys, surface, pt).label;
        scan.intervals.push_back(iv);
    }
    return scan;
}

}  // namespace filippov
