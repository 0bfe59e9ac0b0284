#pragma once

// =============================================================================
// Data model for a piecewise-smooth planar vector field on a QuotientDomain:
// switching surfaces h_j = 0 (0 a regular value), smooth pieces selected by
// sign signatures over the surfaces, optional per-piece densities. Evaluation
// is equivariant under the domain's deck transforms, so fields and one-sided
// limits are well defined across torus/Klein seams.
// =============================================================================

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "filippov/expr.hpp"
#include "filippov/geometry.hpp"

namespace filippov {

inline constexpr double kSurfaceTol = 1e-12;   // |h| below this is "on the surface"
inline constexpr double kOnSigmaTol = 1e-10;   // classification precondition on |h|

struct SwitchingSurface {
    Expr h;
    Expr hx;  // dh/dx, derived at load time
    Expr hy;  // dh/dy
    std::string source;

    double eval(const Point& pt) const { return h.eval(pt); }
    Vec2 gradient(const Point& pt) const { return {hx.eval(pt), hy.eval(pt)}; }
};

enum class SignReq : char { Plus = '+', Minus = '-', Any = '*' };

struct SmoothPiece {
    Expr fx;
    Expr fy;
    std::vector<SignReq> signature;
    Expr density;  // defaults to 1
    std::string signature_text;

    Vec2 eval(const Point& pt) const { return {fx.eval(pt), fy.eval(pt)}; }

    bool matches(const std::vector<int>& signs) const {
        for (std::size_t j = 0; j < signature.size(); ++j) {
            if (signature[j] == SignReq::Any) continue;
            int want = signature[j] == SignReq::Plus ? 1 : -1;
            if (signs[j] != want) return false;
        }
        return true;
    }
};

// A piece evaluated through a fixed deck transform; used for exact one-sided
// values on a surface (the far side of a seam lives in another chart).
struct SideView {
    int piece = -1;
    DeckTransform chart;
    Point chart_point;  // the query point mapped through `chart`

    Vec2 field(const QuotientDomain& d, const SmoothPiece& pc) const {
        return d.apply_vector(chart, pc.eval(chart_point));
    }
    double density(const SmoothPiece& pc) const { return pc.density.eval(chart_point); }
};

class PiecewiseSystem {
public:
    QuotientDomain domain;
    std::vector<SwitchingSurface> surfaces;
    std::vector<SmoothPiece> pieces;
    std::string name;

    std::size_t surface_count() const { return surfaces.size(); }
    std::size_t piece_count() const { return pieces.size(); }

    // Sign vector of (h_1..h_m) at a canonical point; 0 where |h| <= tol.
    std::vector<int> signs_at(const Point& canonical, double tol = kSurfaceTol) const;

    // Unique active piece at a point off all surfaces. Throws OnSurfaceError
    // when |h_j| <= tol for some j, ScenarioError when coverage fails.
    int active_piece_index(const Point& pt) const;
    const SmoothPiece& active_piece(const Point& pt) const {
        return pieces[active_piece_index(pt)];
    }

    // Like active_piece_index but tolerant of points within `tol` of a
    // surface: ambiguous signs are resolved from `hint` (signs captured at a
    // nearby reference point). Used by the integrator's stage evaluations.
    int active_piece_index_hinted(const Point& canonical,
                                  const std::vector<int>& hint) const;

    // Field of the piecewise system at an arbitrary covering-plane point,
    // evaluated equivariantly (canonicalize, evaluate, pull the vector back).
    Vec2 field_at(const Point& pt) const;
    Vec2 field_at_hinted(const Point& pt, const std::vector<int>& hint) const;

    // One-sided view on surface j at pt (|h_j(pt)| small): side=+1 gives the
    // piece reached along +grad h, side=-1 along -grad h.
    SideView side_view(int surface, const Point& pt, int side) const;

    Vec2 sided_field(int surface, const Point& pt, int side) const;
    double sided_density(int surface, const Point& pt, int side) const;

    // k-th Lie derivative of h_surface along piece's field at pt (k >= 1,
    // capped at kMaxLieOrder); built by iterated structural differentiation.
    double lie_derivative(int piece, int surface, const Point& pt, int k) const;
    const Expr& lie_derivative_expr(int piece, int surface, int k) const;

    PiecewiseSystem reversed() const;  // same pieces with negated fields

    static constexpr int kMaxLieOrder = 4;

private:
    mutable std::mutex lie_mutex_;
    mutable std::map<std::tuple<int, int, int>, Expr> lie_cache_;

public:
    PiecewiseSystem() = default;
    PiecewiseSystem(const PiecewiseSystem& o)
        : domain(o.domain), surfaces(o.surfaces), pieces(o.pieces), name(o.name) {}
    PiecewiseSystem& operator=(const PiecewiseSystem& o) {
        domain = o.domain;
        surfaces = o.surfaces;
        pieces = o.pieces;
        name = o.name;
        std::lock_guard<std::mutex> lk(lie_mutex_);
        lie_cache_.clear();
        return *this;
    }
};

// Parses and validates the scenario text format (see docs/scenarios.md):
// domain block, repeated surface blocks, repeated piece blocks. Throws
// ScenarioError / ParseError on malformed input, signature overlap or
// coverage gaps, and regular-value violations near sampled zeros of h.
PiecewiseSystem load_scenario(const std::string& text);
PiecewiseSystem load_scenario_file(const std::string& path);

}  // namespace filippov
