#include "filippov/flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "filippov/errors.hpp"
#include "filippov/parallel.hpp"

namespace filippov {

std::string to_string(EndEvent e) {
    switch (e) {
        case EndEvent::SurfaceHit: return "surface-hit";
        case EndEvent::SlidingExit: return "sliding-exit";
        case EndEvent::BranchPoint: return "branch-point";
        case EndEvent::TimeLimit: return "time-limit";
        case EndEvent::DomainExit: return "domain-exit";
    }
    return "?";
}

std::vector<int> BranchTree::leaf_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].children.empty()) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<Point> BranchTree::endpoints_at_time_limit() const {
    std::vector<Point> out;
    for (int i : leaf_indices())
        if (nodes[i].arc.end == EndEvent::TimeLimit)
            out.push_back(nodes[i].arc.p_end());
    return out;
}

// -----------------------------------------------------------------------------
// Dormand-Prince 5(4) step
// -----------------------------------------------------------------------------

namespace {

using Field = std::function<Vec2(const Point&)>;

void dopri_step(const Field& f, const Point& y0, double h, Point& y_out, Vec2& err_out) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    Vec2 k1 = f(y0);
    Vec2 k2 = f(y0 + h * (a21 * k1));
    Vec2 k3 = f(y0 + h * (a31 * k1 + a32 * k2));
    Vec2 k4 = f(y0 + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Vec2 k5 = f(y0 + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Vec2 k6 = f(y0 + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y_out = y0 + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Vec2 k7 = f(y_out);
    err_out = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
}

struct StepOutcome {
    double h_used = 0.0;
    double h_next = 0.0;
    Point y_new;
};

StepOutcome adaptive_step(const Field& f, const Point& y, double h_try, double tol,
                          double min_step) {
    double h = h_try;
    for (int attempt = 0; attempt < 64; ++attempt) {
        Point y_new;
        Vec2 err;
        dopri_step(f, y, h, y_new, err);
        double e = err.norm();
        if (e <= tol || h <= 2.0 * min_step) {
            double factor = e > 0.0 ? 0.9 * std::pow(tol / e, 0.2) : 5.0;
            StepOutcome out;
            out.h_used = h;
            out.h_next = h * std::clamp(factor, 0.2, 5.0);
            out.y_new = y_new;
            return out;
        }
        h *= std::clamp(0.9 * std::pow(tol / e, 0.2), 0.1, 0.9);
        if (h < min_step)
            throw FlowError("step-underflow", "adaptive step fell below the minimum step "
                                              "size (stiffness guard)");
    }
    throw FlowError("step-underflow", "adaptive step control failed to converge");
}

// Position within an accepted step, reproduced by one fixed sub-step.
Point probe_position(const Field& f, const Point& y0, double dt) {
    if (dt <= 0.0) return y0;
    Point y;
    Vec2 err;
    dopri_step(f, y0, dt, y, err);
    return y;
}

constexpr double kEventHTol = 1e-10;
constexpr double kEventTimeTol = 1e-12;
constexpr double kDepartOffset = 1e-9;

struct EventCandidate {
    double s = std::numeric_limits<double>::infinity();
    enum class Kind { None, Surface, Boundary } kind = Kind::None;
    int surface = -1;
    int boundary = -1;  // 0:x-,1:x+,2:y-,3:y+
};

// Bisect a scalar sign change g(a)!=g(b) over (ta,tb); returns the root time.
template <typename G>
double bisect_time(const G& g, double ta, double tb, double ga) {
    double lo = ta, hi = tb;
    bool neg = ga < 0.0;
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        double gm = g(mid);
        if ((gm < 0.0) == neg)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= kEventTimeTol) break;
    }
    return hi;
}

struct FreeRunner {
    const PiecewiseSystem& sys;
    const FlowOptions& opt;
    bool record_samples;

    Arc run(int piece0, Point p0, double t0, double t_stop) {
        const QuotientDomain& d = sys.domain;
        Arc arc;
        arc.mode = ArcMode::Free;
        arc.index = piece0;
        arc.samples.push_back({t0, p0});

        // The active piece is pinned between events and evaluated at raw
        // covering coordinates: stages and probes that poke past a surface
        // see the piece's smooth extension (the correct one-sided limit), so
        // event localization runs on a smooth path. The pin is re-resolved at
        // silent seam wraps, where the piece formula may change.
        int piece = piece0;
        Field f = [&](const Point& pt) { return sys.pieces[piece].eval(pt); };

        double t = t0;
        Point p = p0;
        double h_next = std::min(opt.max_step, std::max(t_stop - t, opt.min_step));

        const double rx0 = d.x0, rx1 = d.x0 + d.p, ry0 = d.y0, ry1 = d.y0 + d.q;

        auto push_sample = [&](double ts, const Point& ps) {
            if (record_samples || arc.samples.size() < 2)
                arc.samples.push_back({ts, ps});
            else
                arc.samples.back() = {ts, ps};
        };

        while (true) {
            if (t_stop - t <= 1e-14 * (1.0 + std::fabs(t_stop))) {
                arc.end = EndEvent::TimeLimit;
                if (arc.samples.back().t != t_stop) push_sample(t_stop, p);
                return arc;
            }
            double h_try = std::min({h_next, t_stop - t, opt.max_step});
            StepOutcome step = adaptive_step(f, p, h_try, opt.tol, opt.min_step);
            h_next = step.h_next;
            double s_end = t + step.h_used;

            auto pos = [&](double s) { return probe_position(f, p, s - t); };

            // Earliest surface sign change over the step, evaluated in the
            // chart of the step start.
            EventCandidate ev;
            for (std::size_t j = 0; j < sys.surfaces.size(); ++j) {
                double ha = sys.surfaces[j].eval(p);
                double hb = sys.surfaces[j].eval(step.y_new);
                bool change = (ha < 0.0) != (hb < 0.0) && ha != 0.0;
                if (!change && std::fabs(hb) <= kEventHTol && std::fabs(ha) > 1e-9)
                    change = true;
                if (!change) continue;
                auto g = [&](double s) { return sys.surfaces[j].eval(pos(s)); };
                double root = (std::fabs(hb) <= kEventHTol && (ha < 0.0) == (hb < 0.0))
                                  ? s_end
                                  : bisect_time(g, t, s_end, ha);
                if (root < ev.s) {
                    ev.s = root;
                    ev.kind = EventCandidate::Kind::Surface;
                    ev.surface = static_cast<int>(j);
                }
            }

            // Rectangle boundary crossing (seam wrap on quotients, domain
            // exit on the plane). A start exactly on an edge with outward
            // motion is an immediate event, so tangential wraps cannot slip
            // off the chart undetected.
            const Point& pn = step.y_new;
            if (pn.x < rx0 || pn.x > rx1 || pn.y < ry0 || pn.y > ry1) {
                struct BLine {
                    int id;
                    double level;
                    bool is_x;
                    int outward;  // sign of (coord - level) outside the rect
                } lines[4] = {{0, rx0, true, -1},
                              {1, rx1, true, +1},
                              {2, ry0, false, -1},
                              {3, ry1, false, +1}};
                for (const auto& ln : lines) {
                    double va = ln.is_x ? p.x - ln.level : p.y - ln.level;
                    double vb = ln.is_x ? pn.x - ln.level : pn.y - ln.level;
                    double root;
                    if (va == 0.0) {
                        if (vb * ln.outward <= 0.0) continue;
                        root = t;
                    } else if ((va < 0.0) != (vb < 0.0)) {
                        auto g = [&](double s) {
                            Point q = pos(s);
                            return (ln.is_x ? q.x : q.y) - ln.level;
                        };
                        root = bisect_time(g, t, s_end, va);
                    } else {
                        continue;
                    }
                    if (root < ev.s - kEventTimeTol ||
                        (root < ev.s && ev.kind != EventCandidate::Kind::Surface)) {
                        ev.s = root;
                        ev.kind = EventCandidate::Kind::Boundary;
                        ev.boundary = ln.id;
                    }
                }
            }

            // Approach a localized event with shrinking steps first: a step
            // straddling the field jump at the surface is only first-order
            // accurate (error ~ h * |F+ - F-|), so the final localization
            // must happen across a gap of a few 1e-9.
            if (ev.kind != EventCandidate::Kind::None && ev.s - t > 2e-9) {
                double s_cut = t + 0.9 * (ev.s - t);
                Point p_cut = pos(s_cut);
                push_sample(s_cut, p_cut);
                p = p_cut;
                t = s_cut;
                // next trial step straddles the remaining gap
                h_next = std::max(1.5 * (ev.s - t), 4.0 * opt.min_step);
                continue;
            }

            if (ev.kind == EventCandidate::Kind::Surface) {
                Point hit = pos(ev.s);
                // Newton polish on |h|.
                const SwitchingSurface& sj = sys.surfaces[ev.surface];
                for (int it = 0; it < 3 && std::fabs(sj.eval(hit)) > kEventHTol; ++it) {
                    Vec2 g = sj.gradient(hit);
                    double gg = g.dot(g);
                    if (gg < 1e-18) break;
                    double hv = sj.eval(hit);
                    hit = hit - (hv / gg) * g;
                }
                // The localized point may fall microscopically outside the
                // fundamental rectangle; clamp so canonicalization does not
                // carry it across a period.
                if (d.is_quotient()) {
                    hit.x = std::clamp(hit.x, rx0, rx1);
                    hit.y = std::clamp(hit.y, ry0, ry1);
                }
                push_sample(ev.s, hit);
                arc.end = EndEvent::SurfaceHit;
                arc.end_surface = ev.surface;
                return arc;
            }

            if (ev.kind == EventCandidate::Kind::Boundary) {
                Point b = pos(ev.s);
                switch (ev.boundary) {  // snap exactly onto the line
                    case 0: b.x = rx0; break;
                    case 1: b.x = rx1; break;
                    case 2: b.y = ry0; break;
                    case 3: b.y = ry1; break;
                }
                if (!d.is_quotient()) {
                    push_sample(ev.s, b);
                    arc.end = EndEvent::DomainExit;
                    return arc;
                }
                Point c = d.canonicalize(b);
                for (std::size_t j = 0; j < sys.surfaces.size(); ++j) {
                    if (std::fabs(sys.surfaces[j].eval(c)) <= kEventHTol) {
                        push_sample(ev.s, c);
                        arc.end = EndEvent::SurfaceHit;
                        arc.end_surface = static_cast<int>(j);
                        return arc;
                    }
                }
                // Silent wrap: continue from the trailing-edge representative
                // so outgoing motion re-enters the fundamental rectangle.
                Point cont = b;
                bool flip = d.mode == DomainMode::KleinBottle &&
                            (ev.boundary == 0 || ev.boundary == 1);
                switch (ev.boundary) {
                    case 0: cont.x = rx1; break;
                    case 1: cont.x = rx0; break;
                    case 2: cont.y = ry1; break;
                    case 3: cont.y = ry0; break;
                }
                if (flip) cont.y = d.seam_reflect_y(cont.y);
                if (cont.y < ry0 || cont.y > ry1) {
                    double yy = 0.0;
                    long ky = static_cast<long>(std::floor((cont.y - ry0) / d.q));
                    yy = cont.y - ky * d.q;
                    cont.y = yy;
                }
                push_sample(ev.s, cont);
                p = cont;
                t = ev.s;
                // Re-pin the piece from a point nudged off the edge toward
                // the interior: the edge itself canonicalizes to the opposite
                // side of the rectangle and would select the wrong stripe.
                Point inward = cont;
                switch (ev.boundary) {
                    case 0: inward.x -= 1e-9 * d.p; break;  // placed on x = rx1
                    case 1: inward.x += 1e-9 * d.p; break;
                    case 2: inward.y -= 1e-9 * d.q; break;  // placed on y = ry1
                    case 3: inward.y += 1e-9 * d.q; break;
                }
                piece = sys.active_piece_index_hinted(
                    d.canonicalize(inward), std::vector<int>(sys.surfaces.size(), 1));
                continue;
            }

            p = step.y_new;
            t = s_end;
            push_sample(t, p);
        }
    }
};

struct SlideRunner {
    const PiecewiseSystem& sys;
    const FlowOptions& opt;
    bool record_samples;
    Vec2 last_velocity;

    Point project(int surf, Point p) const {
        const SwitchingSurface& s = sys.surfaces[surf];
        for (int it = 0; it < 2; ++it) {
            Point c = sys.domain.canonicalize(p);
            double hv = s.eval(c);
            Vec2 g = s.gradient(c);
            double gg = g.dot(g);
            if (gg < 1e-18) break;
            p = c - (hv / gg) * g;
        }
        return sys.domain.canonicalize(p);
    }

    double normal_derivative(int surf, const Point& p, int side) const {
        SideView v = sys.side_view(surf, sys.domain.canonicalize(p), side);
        return sys.lie_derivative_expr(v.piece, surf, 1).eval(v.chart_point);
    }

    Vec2 velocity(int surf, const Point& p) const {
        double wp = normal_derivative(surf, p, +1);
        double wm = normal_derivative(surf, p, -1);
        double denom = wm - wp;
        if (std::fabs(denom) < 1e-12)
            throw DegenerateSlidingError("sliding denominator |F-h - F+h| < 1e-12");
        Point c = sys.domain.canonicalize(p);
        Vec2 fp = sys.sided_field(surf, c, +1);
        Vec2 fm = sys.sided_field(surf, c, -1);
        return (wm * fp - wp * fm) * (1.0 / denom);
    }

    Arc run(int surf, Point p0, double t0, double t_stop) {
        const QuotientDomain& d = sys.domain;
        Arc arc;
        arc.mode = ArcMode::Sliding;
        arc.index = surf;
        p0 = project(surf, p0);
        arc.samples.push_back({t0, p0});

        auto push_sample = [&](double ts, const Point& ps) {
            if (record_samples || arc.samples.size() < 2)
                arc.samples.push_back({ts, ps});
            else
                arc.samples.back() = {ts, ps};
        };

        double t = t0;
        Point p = p0;
        int cur_surf = surf;
        double wp_ref = normal_derivative(cur_surf, p, +1);
        double wm_ref = normal_derivative(cur_surf, p, -1);
        double h_next = std::min(opt.max_step, std::max(t_stop - t, opt.min_step));
        const double rx0 = d.x0, rx1 = d.x0 + d.p, ry0 = d.y0, ry1 = d.y0 + d.q;

        Field f = [&](const Point& q) { return velocity(cur_surf, q); };

        while (true) {
            if (t_stop - t <= 1e-14 * (1.0 + std::fabs(t_stop))) {
                arc.end = EndEvent::TimeLimit;
                if (arc.samples.back().t != t_stop) push_sample(t_stop, p);
                return arc;
            }
            Vec2 v = velocity(cur_surf, p);
            last_velocity = v;
            if (v.norm() <= 1e-13) {
                // Stationary sliding (zero sliding field): remain until the
                // time horizon.
                push_sample(t_stop, p);
                arc.end = EndEvent::TimeLimit;
                return arc;
            }

            double h_try = std::min({h_next, t_stop - t, opt.max_step});
            StepOutcome step = adaptive_step(f, p, h_try, opt.tol, opt.min_step);
            h_next = step.h_next;
            double s_end = t + step.h_used;
            Point p_new = project(cur_surf, step.y_new);

            auto pos = [&](double s) {
                return project(cur_surf, probe_position(f, p, s - t));
            };

            // Sliding-region exit: one of the one-sided normal derivatives
            // changes sign (a tangency boundary).
            double wp = normal_derivative(cur_surf, p_new, +1);
            double wm = normal_derivative(cur_surf, p_new, -1);
            bool exit_p = (wp < 0.0) != (wp_ref < 0.0);
            bool exit_m = (wm < 0.0) != (wm_ref < 0.0);
            if (exit_p || exit_m) {
                int side = exit_p ? +1 : -1;
                auto g = [&](double s) { return normal_derivative(cur_surf, pos(s), side); };
                double root = bisect_time(g, t, s_end, side == +1 ? wp_ref : wm_ref);
                Point q = pos(root);
                push_sample(root, q);
                arc.end = EndEvent::SlidingExit;
                arc.end_surface = cur_surf;
                last_velocity = velocity(cur_surf, p);
                return arc;
            }

            // Seam wrap (quotients): re-canonicalize; on Klein flips the
            // circle may map onto a different surface, so re-identify it.
            if (p_new.x < rx0 || p_new.x > rx1 || p_new.y < ry0 || p_new.y > ry1) {
                bool flipped = false;
                if (d.mode == DomainMode::KleinBottle) {
                    DeckTransform tr = d.canonical_chart(p_new);
                    flipped = tr.flip;
                }
                Point c = d.canonicalize(p_new);
                if (flipped) {
                    int found = -1;
                    for (std::size_t j = 0; j < sys.surfaces.size(); ++j)
                        if (std::fabs(sys.surfaces[j].eval(c)) <= 1e-8) {
                            found = static_cast<int>(j);
                            break;
                        }
                    if (found < 0)
                        throw FlowError("sliding-seam-error",
                                        "sliding arc left its surface across a Klein seam");
                    cur_surf = found;
                    wp_ref = normal_derivative(cur_surf, c, +1);
                    wm_ref = normal_derivative(cur_surf, c, -1);
                }
                p_new = project(cur_surf, c);
            }

            if (!d.is_quotient() &&
                (p_new.x < rx0 || p_new.x > rx1 || p_new.y < ry0 || p_new.y > ry1)) {
                push_sample(s_end, p_new);
                arc.end = EndEvent::DomainExit;
                return arc;
            }

            p = p_new;
            t = s_end;
            push_sample(t, p);
        }
    }
};

}  // namespace

// -----------------------------------------------------------------------------
// Transition logic
// -----------------------------------------------------------------------------

namespace {

TransitionDecision transition_forward(const PiecewiseSystem& sys, int surface,
                                      const Point& pt) {
    TransitionDecision dec;
    dec.cls = classify_point(sys, surface, pt);
    const SigmaClass& cls = dec.cls;

    auto enter = [&](int side, const std::string& label) {
        TransitionOption o;
        o.kind = TransitionOption::Kind::EnterPiece;
        o.depart_side = side;
        o.label = label;
        return o;
    };
    auto slide_on = [&](const std::string& label) {
        TransitionOption o;
        o.kind = TransitionOption::Kind::SlideOn;
        o.surface = surface;
        o.label = label;
        return o;
    };

    switch (cls.label) {
        case SigmaLabel::Crossing: {
            dec.kind = TransitionDecision::Kind::Cross;
            dec.options.push_back(enter(cls.f_plus_h > 0.0 ? +1 : -1, "cross"));
            return dec;
        }
        case SigmaLabel::Sliding: {
            dec.kind = TransitionDecision::Kind::Slide;
            dec.options.push_back(slide_on("slide"));
            return dec;
        }
        case SigmaLabel::Escaping: {
            dec.kind = TransitionDecision::Kind::Branch;
            dec.options.push_back(slide_on("stay-slide"));
            dec.options.push_back(enter(+1, "depart+"));
            dec.options.push_back(enter(-1, "depart-"));
            return dec;
        }
        case SigmaLabel::Tangency: {
            // Departures along visible even-order folds.
            for (const auto& ts : cls.tangency) {
                if (ts.order % 2 == 0 && ts.visibility == Visibility::Visible)
                    dec.options.push_back(
                        enter(ts.side, ts.side > 0 ? "depart+" : "depart-"));
                if (ts.order % 2 == 1) {
                    // Odd-order contact: the orbit passes through the surface.
                    bool exits_up = (ts.side == +1) == (ts.visibility == Visibility::Visible);
                    dec.options.push_back(enter(exits_up ? +1 : -1, "roll-through"));
                }
            }
            // Sliding continuation when the point borders a sliding or
            // escaping interval (probe along the surface tangent).
            Point c = sys.domain.canonicalize(pt);
            Vec2 g = sys.surfaces[surface].gradient(c);
            double gn = g.norm();
            if (gn > 1e-12) {
                Vec2 tau{g.y / gn, -g.x / gn};
                double delta = 1e-6 * std::min(sys.domain.p, sys.domain.q);
                for (int dir = -1; dir <= 1; dir += 2) {
                    Point probe = c + (dir * delta) * tau;
                    // pull the probe back onto the surface
                    const SwitchingSurface& s = sys.surfaces[surface];
                    for (int it = 0; it < 2; ++it) {
                        Point cc = sys.domain.canonicalize(probe);
                        Vec2 gg = s.gradient(cc);
                        double g2 = gg.dot(gg);
                        if (g2 < 1e-18) break;
                        probe = cc - (s.eval(cc) / g2) * gg;
                    }
                    try {
                        SigmaClass pc = classify_point(sys, surface, probe);
                        if (pc.label == SigmaLabel::Sliding || pc.label == SigmaLabel::Escaping) {
                            dec.options.push_back(slide_on("slide"));
                            break;
                        }
                    } catch (const Error&) {
                        // probe fell off the surface; skip
                    }
                }
            }
            if (dec.options.empty())
                throw FlowError("no-continuation",
                                "no admissible continuation at tangency point");
            dec.kind = dec.options.size() == 1
                           ? (dec.options[0].kind == TransitionOption::Kind::SlideOn
                                  ? TransitionDecision::Kind::Slide
                                  : TransitionDecision::Kind::Cross)
                           : TransitionDecision::Kind::Branch;
            return dec;
        }
    }
    throw FlowError("transition-error", "unreachable");
}

}  // namespace

TransitionDecision transition(const PiecewiseSystem& sys, int surface, const Point& pt,
                              TimeDirection dir) {
    if (dir == TimeDirection::Forward) return transition_forward(sys, surface, pt);
    PiecewiseSystem rev = sys.reversed();
    return transition_forward(rev, surface, pt);
}

// -----------------------------------------------------------------------------
// Tree engine
// -----------------------------------------------------------------------------

namespace {

struct Engine {
    const PiecewiseSystem& sys;
    FlowOptions opt;
    BranchTree tree;
    bool stop_all = false;
    int leaf_budget_used = 1;  // the root path
    std::size_t max_nodes = 200000;

    struct Work {
        int parent = -1;
        int depth = 0;
        double t = 0.0;
        Point p;
        bool sliding = false;
        int index = -1;  // piece or surface
        std::string label;
        int hits = 0;
    };
    std::deque<Work> queue;

    explicit Engine(const PiecewiseSystem& s, const FlowOptions& o) : sys(s), opt(o) {}

    int add_node(Arc arc, int parent, int depth, const std::string& label) {
        TreeNode node;
        node.arc = std::move(arc);
        node.parent = parent;
        node.depth = depth;
        node.branch_label = label;
        if (parent >= 0) tree.nodes[parent].children.push_back(static_cast<int>(tree.nodes.size()));
        tree.nodes.push_back(std::move(node));
        return static_cast<int>(tree.nodes.size()) - 1;
    }

    Point depart_point(int surface, const Point& pt, int side) const {
        const SwitchingSurface& s = sys.surfaces[surface];
        Point c = sys.domain.canonicalize(pt);
        Vec2 g = s.gradient(c);
        double gn = g.norm();
        if (gn < 1e-12)
            throw FlowError("transition-error", "degenerate gradient at departure");
        Point q = c + (side * kDepartOffset / gn) * g;
        return sys.domain.canonicalize(q);
    }

    int resolve_piece(const Point& p) const {
        return sys.active_piece_index_hinted(sys.domain.canonicalize(p),
                                             std::vector<int>(sys.surfaces.size(), 1));
    }

    void spawn_options(int parent_node, double t, const Point& pt, int surface,
                       const std::vector<TransitionOption>& options, int depth, int hits,
                       const Vec2* slide_dir) {
        bool branching = options.size() > 1;
        if (branching && opt.policy == FlowPolicy::Deterministic)
            throw FlowError("deterministic-policy-hit-branch",
                            "deterministic policy reached a branch point at t=" +
                                format_double(t));
        std::size_t allowed = options.size();
        if (branching) {
            int extra = static_cast<int>(options.size()) - 1;
            int room = opt.branch_cap - leaf_budget_used;
            if (extra > room) {
                tree.truncated = true;
                allowed = static_cast<std::size_t>(std::max(0, room) + 1);
            }
            leaf_budget_used += static_cast<int>(allowed) - 1;
        }
        if (allowed == 0) {
            tree.nodes[parent_node].arc.end = EndEvent::BranchPoint;
            return;
        }
        if (branching) tree.nodes[parent_node].arc.end = EndEvent::BranchPoint;
        for (std::size_t i = 0; i < allowed; ++i) {
            const TransitionOption& o = options[i];
            Work w;
            w.parent = parent_node;
            w.depth = depth + (branching ? 1 : 0);
            w.t = t;
            w.hits = hits;
            w.label = o.label;
            if (o.kind == TransitionOption::Kind::EnterPiece) {
                w.p = depart_point(surface, pt, o.depart_side);
                w.sliding = false;
                w.index = resolve_piece(w.p);
            } else {
                w.sliding = true;
                w.index = o.surface;
                if (o.label == "slide" && slide_dir != nullptr && slide_dir->norm() > 0.0) {
                    // Tangential nudge past the tangency so the slide resumes
                    // inside the adjacent interval.
                    Vec2 dir = *slide_dir;
                    double n = dir.norm();
                    w.p = sys.domain.canonicalize(pt + (kDepartOffset / n) * dir);
                } else {
                    w.p = pt;
                }
            }
            queue.push_back(std::move(w));
        }
    }

    void handle_surface_point(int node, double t, int surface, const Point& pt, int depth,
                              int hits, double duration) {
        SigmaClass cls = classify_point(sys, surface, pt);
        if (opt.monitor && opt.monitor(surface, pt, cls, t)) {
            stop_all = true;
            tree.stopped_by_monitor = true;
            return;
        }
        int new_hits = hits + 1;
        if (opt.max_surface_hits > 0 && new_hits >= opt.max_surface_hits) return;
        if (duration - t <= 1e-14 * (1.0 + duration)) return;

        TransitionDecision dec = transition_forward(sys, surface, pt);
        Vec2 slide_dir{0.0, 0.0};
        spawn_options(node, t, pt, surface, dec.options, depth, new_hits, &slide_dir);
    }

    void run(const Point& p0, double duration) {
        tree.root = p0;
        Point c = sys.domain.canonicalize(p0);

        // Starting on a surface is a transition; otherwise free flight.
        int on_surface = -1;
        for (std::size_t j = 0; j < sys.surfaces.size(); ++j)
            if (std::fabs(sys.surfaces[j].eval(c)) <= kOnSigmaTol) {
                on_surface = static_cast<int>(j);
                break;
            }

        if (on_surface >= 0) {
            Arc seed;
            seed.mode = ArcMode::Free;
            seed.index = -1;
            seed.samples.push_back({0.0, c});
            seed.end = EndEvent::BranchPoint;
            int root_node = add_node(std::move(seed), -1, 0, "start");
            handle_surface_point(root_node, 0.0, on_surface, c, 0, -1, duration);
        } else {
            Work w;
            w.parent = -1;
            w.depth = 0;
            w.t = 0.0;
            w.p = c;
            w.sliding = false;
            w.index = resolve_piece(c);
            w.label = "start";
            queue.push_back(std::move(w));
        }

        while (!queue.empty() && !stop_all) {
            if (tree.nodes.size() > max_nodes)
                throw FlowError("node-overflow", "solution tree exceeded the node limit");
            Work w = queue.front();
            queue.pop_front();

            if (duration - w.t <= 1e-14 * (1.0 + duration)) {
                Arc a;
                a.mode = w.sliding ? ArcMode::Sliding : ArcMode::Free;
                a.index = w.index;
                a.samples.push_back({duration, w.p});
                a.end = EndEvent::TimeLimit;
                add_node(std::move(a), w.parent, w.depth, w.label);
                continue;
            }

            if (!w.sliding) {
                FreeRunner runner{sys, opt, opt.record_samples};
                Arc arc = runner.run(w.index, w.p, w.t, duration);
                EndEvent end = arc.end;
                int surf = arc.end_surface;
                double t_end = arc.t_end();
                Point p_end = arc.p_end();
                int node = add_node(std::move(arc), w.parent, w.depth, w.label);
                if (end == EndEvent::SurfaceHit)
                    handle_surface_point(node, t_end, surf, p_end, w.depth, w.hits, duration);
            } else {
                SlideRunner runner{sys, opt, opt.record_samples, {0.0, 0.0}};
                Arc arc = runner.run(w.index, w.p, w.t, duration);
                EndEvent end = arc.end;
                int surf = arc.end_surface;
                double t_end = arc.t_end();
                Point p_end = arc.p_end();
                Vec2 vlast = runner.last_velocity;
                int node = add_node(std::move(arc), w.parent, w.depth, w.label);
                if (end == EndEvent::SlidingExit)
                    handle_sliding_exit(node, t_end, surf, p_end, vlast, w.depth, w.hits,
                                        duration);
            }
        }
    }

    void handle_sliding_exit(int node, double t, int surface, const Point& pt,
                             const Vec2& v_last, int depth, int hits, double duration) {
        if (duration - t <= 1e-14 * (1.0 + duration)) return;
        SigmaClass cls = classify_point(sys, surface, pt);
        if (opt.monitor && opt.monitor(surface, pt, cls, t)) {
            stop_all = true;
            tree.stopped_by_monitor = true;
            return;
        }

        std::vector<TransitionOption> options;
        // Continue sliding into the adjacent interval when it supports it.
        Vec2 dir = v_last;
        double dn = dir.norm();
        if (dn > 0.0) {
            Point probe = sys.domain.canonicalize(pt + (1e-7 / dn) * dir);
            const SwitchingSurface& s = sys.surfaces[surface];
            for (int it = 0; it < 2; ++it) {
                Point cc = sys.domain.canonicalize(probe);
                Vec2 g = s.gradient(cc);
                double g2 = g.dot(g);
                if (g2 < 1e-18) break;
                probe = cc - (s.eval(cc) / g2) * g;
            }
            try {
                SigmaClass pc = classify_point(sys, surface, probe);
                if (pc.label == SigmaLabel::Sliding || pc.label == SigmaLabel::Escaping) {
                    TransitionOption o;
                    o.kind = TransitionOption::Kind::SlideOn;
                    o.surface = surface;
                    o.label = "slide";
                    options.push_back(o);
                }
            } catch (const Error&) {
            }
        }
        if (cls.label == SigmaLabel::Tangency) {
            for (const auto& ts : cls.tangency) {
                if (ts.order % 2 == 0 && ts.visibility == Visibility::Visible) {
                    TransitionOption o;
                    o.kind = TransitionOption::Kind::EnterPiece;
                    o.depart_side = ts.side;
                    o.label = ts.side > 0 ? "depart+" : "depart-";
                    options.push_back(o);
                }
            }
        } else if (cls.label == SigmaLabel::Crossing) {
            TransitionOption o;
            o.kind = TransitionOption::Kind::EnterPiece;
            o.depart_side = cls.f_plus_h > 0.0 ? +1 : -1;
            o.label = "cross";
            options.push_back(o);
        }
        if (options.empty())
            throw FlowError("no-continuation", "sliding arc has no continuation at t=" +
                                                   format_double(t));
        spawn_options(node, t, pt, surface, options, depth, hits, &dir);
    }

};

}  // namespace

Arc integrate_free(const PiecewiseSystem& sys, int piece, const Point& p0, double tmax,
                   double tol) {
    Point c = sys.domain.canonicalize(p0);
    if (sys.active_piece_index(c) != piece)
        throw WrongRegionError("start point is not inside piece " + std::to_string(piece));
    FlowOptions opt;
    opt.tol = tol;
    FreeRunner runner{sys, opt, true};
    return runner.run(piece, c, 0.0, tmax);
}

BranchTree flow_point(const PiecewiseSystem& sys, const Point& p0, double T,
                      const FlowOptions& opt) {
    if (T == 0.0) {
        BranchTree tree;
        tree.root = p0;
        tree.T = 0.0;
        Arc a;
        a.samples.push_back({0.0, sys.domain.canonicalize(p0)});
        a.end = EndEvent::TimeLimit;
        TreeNode n;
        n.arc = std::move(a);
        tree.nodes.push_back(std::move(n));
        return tree;
    }
    if (T > 0.0) {
        Engine eng(sys, opt);
        eng.run(p0, T);
        eng.tree.T = T;
        return std::move(eng.tree);
    }
    PiecewiseSystem rev = sys.reversed();
    Engine eng(rev, opt);
    eng.run(p0, -T);
    eng.tree.T = T;
    for (auto& node : eng.tree.nodes)
        for (auto& s : node.arc.samples) s.t = -s.t;
    return std::move(eng.tree);
}

// -----------------------------------------------------------------------------
// Set-valued flow cover
// -----------------------------------------------------------------------------

std::vector<Rect> split_rect_canonical(const QuotientDomain& d, const Rect& r) {
    if (!d.is_quotient()) return {r};
    std::vector<Rect> out;
    // x segments split at vertical lattice lines
    struct Seg {
        double lo, hi;
        long k;
    };
    auto segments = [](double lo, double hi, double base, double period) {
        std::vector<Seg> segs;
        long k0 = static_cast<long>(std::floor((lo - base) / period));
        long k1 = static_cast<long>(std::floor((hi - base) / period));
        // hi exactly on a lattice line belongs to the lower segment
        if (hi == base + k1 * period) --k1;
        for (long k = k0; k <= k1; ++k) {
            double a = std::max(lo, base + k * period);
            double b = std::min(hi, base + (k + 1) * period);
            if (b > a) segs.push_back({a, b, k});
        }
        return segs;
    };
    for (const Seg& sx : segments(r.x0, r.x1, d.x0, d.p)) {
        double x_lo = sx.lo - sx.k * d.p;
        double x_hi = sx.hi - sx.k * d.p;
        double y_lo = r.y0, y_hi = r.y1;
        if (d.mode == DomainMode::KleinBottle && (sx.k % 2) != 0) {
            double a = d.seam_reflect_y(r.y1);
            double b = d.seam_reflect_y(r.y0);
            y_lo = a;
            y_hi = b;
        }
        for (const Seg& sy : segments(y_lo, y_hi, d.y0, d.q)) {
            Rect piece;
            piece.x0 = x_lo;
            piece.x1 = x_hi;
            piece.y0 = sy.lo - sy.k * d.q;
            piece.y1 = sy.hi - sy.k * d.q;
            out.push_back(piece);
        }
    }
    return out;
}

double union_area(const std::vector<Rect>& rects) {
    if (rects.empty()) return 0.0;
    std::vector<double> xs;
    xs.reserve(rects.size() * 2);
    for (const auto& r : rects) {
        xs.push_back(r.x0);
        xs.push_back(r.x1);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::vector<std::size_t> order(rects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rects[a].x0 < rects[b].x0;
    });

    double area = 0.0;
    std::size_t next = 0;
    std::vector<std::size_t> active;
    std::vector<std::pair<double, double>> spans;
    for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
        double lo = xs[s], hi = xs[s + 1];
        double mid = 0.5 * (lo + hi);
        while (next < order.size() && rects[order[next]].x0 <= lo) {
            active.push_back(order[next]);
            ++next;
        }
        active.erase(std::remove_if(active.begin(), active.end(),
                                    [&](std::size_t i) { return rects[i].x1 <= lo; }),
                     active.end());
        spans.clear();
        for (std::size_t i : active)
            if (rects[i].x0 <= mid && rects[i].x1 >= mid)
                spans.emplace_back(rects[i].y0, rects[i].y1);
        if (spans.empty()) continue;
        std::sort(spans.begin(), spans.end());
        double covered = 0.0, cur_lo = spans[0].first, cur_hi = spans[0].second;
        for (std::size_t i = 1; i < spans.size(); ++i) {
            if (spans[i].first > cur_hi) {
                covered += cur_hi - cur_lo;
                cur_lo = spans[i].first;
                cur_hi = spans[i].second;
            } else {
                cur_hi = std::max(cur_hi, spans[i].second);
            }
        }
        covered += cur_hi - cur_lo;
        area += covered * (hi - lo);
    }
    return area;
}

FlowSetResult flow_set(const PiecewiseSystem& sys, const std::vector<Rect>& boxes,
                       double t, int resolution, const FlowOptions& opt_in) {
    FlowOptions opt = opt_in;
    opt.policy = FlowPolicy::AllBranches;
    FlowSetResult result;
    for (const Rect& box : boxes) {
        BoxImage img;
        img.box = box;
        img.res = resolution;
        img.pitch_x = box.width() / resolution;
        img.pitch_y = box.height() / resolution;
        img.endpoints.resize(static_cast<std::size_t>(resolution) * resolution);
        img.branched.assign(img.endpoints.size(), 0);

        std::vector<std::vector<Point>> extra(img.endpoints.size());
        std::vector<unsigned char> cap_flags(img.endpoints.size(), 0);
        parallel_for(img.endpoints.size(), [&](std::size_t idx) {
            int i = static_cast<int>(idx) / resolution;
            int j = static_cast<int>(idx) % resolution;
            Point start{box.x0 + (i + 0.5) * img.pitch_x, box.y0 + (j + 0.5) * img.pitch_y};
            BranchTree tree = flow_point(sys, start, t, opt);
            std::vector<Point> ends = tree.endpoints_at_time_limit();
            if (ends.empty()) {
                // domain exits only; keep the exit points as endpoints
                for (int leaf : tree.leaf_indices())
                    ends.push_back(tree.nodes[leaf].arc.p_end());
            }
            img.endpoints[idx] = sys.domain.canonicalize(ends.front());
            img.branched[idx] = ends.size() > 1 ? 1 : 0;
            cap_flags[idx] = tree.truncated ? 1 : 0;
            for (const Point& e : ends) extra[idx].push_back(sys.domain.canonicalize(e));
        });
        for (std::size_t idx = 0; idx < extra.size(); ++idx) {
            if (cap_flags[idx]) result.branch_cap_hit = true;
            for (const Point& e : extra[idx]) img.all_endpoints.push_back(e);
        }

        for (const Point& e : img.all_endpoints) {
            Rect r{e.x - 0.5 * img.pitch_x, e.y - 0.5 * img.pitch_y,
                   e.x + 0.5 * img.pitch_x, e.y + 0.5 * img.pitch_y};
            for (const Rect& piece : split_rect_canonical(sys.domain, r))
                result.cover.push_back(piece);
        }
        result.images.push_back(std::move(img));
    }
    result.cover_area = union_area(result.cover);
    return result;
}

}  // namespace filippov
