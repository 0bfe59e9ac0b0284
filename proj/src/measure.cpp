#include "filippov/measure.hpp"

#include <algorithm>
#include <cmath>

#include "filippov/errors.hpp"
#include "filippov/parallel.hpp"

namespace filippov {

// -----------------------------------------------------------------------------
// Flux checker
// -----------------------------------------------------------------------------

std::vector<FluxProfile> check_flux(const PiecewiseSystem& sys, int n) {
    std::vector<FluxProfile> profiles;
    for (std::size_t j = 0; j < sys.surfaces.size(); ++j) {
        SurfaceScan scan = scan_surface(sys, static_cast<int>(j), std::max(16, n));
        FluxProfile prof;
        prof.surface = static_cast<int>(j);
        for (const auto& [param, pt] : scan.points) {
            SideView plus = sys.side_view(prof.surface, pt, +1);
            SideView minus = sys.side_view(prof.surface, pt, -1);
            double fp = sys.lie_derivative_expr(plus.piece, prof.surface, 1)
                            .eval(plus.chart_point);
            double fm = sys.lie_derivative_expr(minus.piece, prof.surface, 1)
                            .eval(minus.chart_point);
            double ap = plus.density(sys.pieces[plus.piece]);
            double am = minus.density(sys.pieces[minus.piece]);
            FluxSample s;
            s.param = param;
            s.pt = pt;
            s.residual = ap * fp - am * fm;
            prof.max_alpha = std::max({prof.max_alpha, std::fabs(ap), std::fabs(am)});
            if (std::fabs(s.residual) > prof.max_abs_residual) {
                prof.max_abs_residual = std::fabs(s.residual);
                prof.witness = pt;
                prof.witness_param = param;
            }
            prof.samples.push_back(std::move(s));
        }
        double scale = std::max(prof.max_alpha, 1e-300);
        prof.violation = prof.max_abs_residual / scale > kFluxThreshold;
        profiles.push_back(std::move(prof));
    }
    return profiles;
}

// -----------------------------------------------------------------------------
// Divergence checker
// -----------------------------------------------------------------------------

DivergenceReport check_divergence(const PiecewiseSystem& sys, int piece,
                                  const std::optional<Expr>& density, int grid) {
    const SmoothPiece& pc = sys.pieces[piece];
    Expr alpha = density.has_value() ? *density : pc.density;
    Expr div = Expr::add(Expr::mul(alpha, pc.fx).derivative(Var::X),
                         Expr::mul(alpha, pc.fy).derivative(Var::Y));

    DivergenceReport rep;
    rep.piece = piece;
    const QuotientDomain& d = sys.domain;
    for (int i = 0; i < grid; ++i) {
        for (int k = 0; k < grid; ++k) {
            Point pt{d.x0 + (i + 0.5) / grid * d.p, d.y0 + (k + 0.5) / grid * d.q};
            std::vector<int> signs = sys.signs_at(pt, 1e-6);
            bool near_surface = false;
            for (int s : signs)
                if (s == 0) near_surface = true;
            if (near_surface || !pc.matches(signs)) continue;
            double v = div.eval(pt);
            if (std::fabs(v) > rep.max_abs) {
                rep.max_abs = std::fabs(v);
                rep.witness = pt;
            }
        }
    }
    rep.violation = rep.max_abs > kDivergenceThreshold;
    return rep;
}

// -----------------------------------------------------------------------------
// Striped densities
// -----------------------------------------------------------------------------

StripedSpec StripedSpec::equal_heights(DomainMode mode, std::vector<double> a,
                                       std::vector<double> b) {
    StripedSpec spec;
    spec.n = static_cast<int>(b.size());
    spec.a = std::move(a);
    spec.b = std::move(b);
    spec.mode = mode;
    for (int i = 1; i <= spec.n; ++i)
        spec.heights.push_back(static_cast<double>(i) / spec.n);
    return spec;
}

StripedDensitySolution solve_striped_density(const StripedSpec& spec) {
    StripedDensitySolution sol;
    int n = spec.n;
    if (n < 1 || static_cast<int>(spec.b.size()) != n ||
        static_cast<int>(spec.a.size()) != n ||
        static_cast<int>(spec.heights.size()) != n) {
        sol.reason = "spec arrays must all have length n >= 1";
        return sol;
    }
    for (double bi : spec.b)
        if (!(bi > 0.0)) {
            sol.reason = "vertical speeds b_i must be positive";
            return sol;
        }
    double prev = 0.0;
    for (double h : spec.heights) {
        if (!(h > prev)) {
            sol.reason = "stripe heights must be strictly increasing in (0, 1]";
            return sol;
        }
        prev = h;
    }
    if (std::fabs(spec.heights.back() - 1.0) > 1e-12) {
        sol.reason = "the last stripe height must equal 1";
        return sol;
    }

    if (spec.mode == DomainMode::KleinBottle) {
        for (int i = 0; i < n; ++i) {
            double lhs = spec.a[i] / spec.b[i];
            double rhs = spec.a[n - 1 - i] / spec.b[n - 1 - i];
            if (std::fabs(lhs - rhs) > 1e-12) {
                sol.reason = "seam flux balance requires a_i/b_i = a_{n-i+1}/b_{n-i+1} "
                             "(violated at stripe " + std::to_string(i + 1) + ")";
                return sol;
            }
        }
    } else if (spec.mode == DomainMode::Plane) {
        sol.reason = "striped densities are defined on torus or klein domains";
        return sol;
    }

    // Cyclic balance b_i alpha_i = const, so alpha_i = alpha / b_i; pick the
    // probability representative over the unit square.
    std::vector<double> alpha(n);
    for (int i = 0; i < n; ++i) alpha[i] = 1.0 / spec.b[i];
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
        double height = i == n - 1 ? spec.heights[0]
                                   : spec.heights[i + 1] - spec.heights[i];
        // stripe i occupies [h_i, h_{i+1}] for i < n-1 and [0, h_1] for i = n-1
        mass += alpha[i] * height;
    }
    for (double& v : alpha) v /= mass;

    sol.alpha = std::move(alpha);
    sol.feasible = true;
    for (int i = 0; i < n; ++i) {
        int k = (i + 1) % n;
        sol.residual = std::max(sol.residual,
                                std::fabs(spec.b[i] * sol.alpha[i] - spec.b[k] * sol.alpha[k]));
        if (!(sol.alpha[i] * sol.alpha[k] > 0.0)) {
            sol.feasible = false;
            sol.reason = "positivity alpha_i alpha_{i+1} > 0 failed";
        }
    }
    return sol;
}

// -----------------------------------------------------------------------------
// Densities and quadrature
// -----------------------------------------------------------------------------

double measure_density_at(const PiecewiseSystem& sys, const Point& pt) {
    Point c = sys.domain.canonicalize(pt);
    try {
        const SmoothPiece& pc = sys.active_piece(c);
        return pc.density.eval(c);
    } catch (const OnSurfaceError&) {
        // Average of the two one-sided densities; the set has measure zero.
        for (std::size_t j = 0; j < sys.surfaces.size(); ++j) {
            if (std::fabs(sys.surfaces[j].eval(c)) <= kSurfaceTol) {
                double ap = sys.sided_density(static_cast<int>(j), c, +1);
                double am = sys.sided_density(static_cast<int>(j), c, -1);
                return 0.5 * (ap + am);
            }
        }
        return 1.0;
    }
}

double quadrature_nu(const PiecewiseSystem& sys, const Rect& box, int n) {
    double hx = box.width() / n;
    double hy = box.height() / n;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Point pt{box.x0 + (i + 0.5) * hx, box.y0 + (j + 0.5) * hy};
            sum += measure_density_at(sys, pt);
        }
    return sum * hx * hy;
}

double cover_nu_integral(const PiecewiseSystem& sys, const std::vector<Rect>& cover) {
    if (cover.empty()) return 0.0;
    // Slab decomposition of the union, one density sample per covered cell.
    std::vector<double> xs;
    for (const auto& r : cover) {
        xs.push_back(r.x0);
        xs.push_back(r.x1);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    double total = 0.0;
    for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
        double lo = xs[s], hi = xs[s + 1];
        double mid = 0.5 * (lo + hi);
        std::vector<std::pair<double, double>> spans;
        for (const auto& r : cover)
            if (r.x0 <= mid && r.x1 >= mid) spans.emplace_back(r.y0, r.y1);
        if (spans.empty()) continue;
        std::sort(spans.begin(), spans.end());
        double cur_lo = spans[0].first, cur_hi = spans[0].second;
        auto flush = [&]() {
            double ymid = 0.5 * (cur_lo + cur_hi);
            total += (cur_hi - cur_lo) * (hi - lo) *
                     measure_density_at(sys, {mid, ymid});
        };
        for (std::size_t i = 1; i < spans.size(); ++i) {
            if (spans[i].first > cur_hi) {
                flush();
                cur_lo = spans[i].first;
                cur_hi = spans[i].second;
            } else {
                cur_hi = std::max(cur_hi, spans[i].second);
            }
        }
        flush();
    }
    return total;
}

// -----------------------------------------------------------------------------
// Push-forward test
// -----------------------------------------------------------------------------

std::vector<PushforwardEntry> pushforward_test(const PiecewiseSystem& sys,
                                               const std::vector<NamedBox>& sets,
                                               const std::vector<double>& times,
                                               int resolution, const FlowOptions& opt) {
    std::vector<PushforwardEntry> entries;
    for (const NamedBox& nb : sets) {
        double nu_ref = quadrature_nu(sys, nb.box);
        for (double t : times) {
            FlowSetResult fsr = flow_set(sys, {nb.box}, t, resolution, opt);
            const BoxImage& img = fsr.images.front();

            // Transported-cell estimate: the Jacobian of the flow map is
            // approximated from displacement differences of neighboring
            // endpoints, so collapsed directions contribute zero area.
            const int res = img.res;
            auto ep = [&](int i, int j) -> const Point& {
                return img.endpoints[static_cast<std::size_t>(i) * res + j];
            };
            const QuotientDomain& d = sys.domain;
            double nu_image = 0.0;
            bool branched = false;
            for (int i = 0; i < res; ++i) {
                for (int j = 0; j < res; ++j) {
                    Vec2 tx, ty;
                    if (i == 0)
                        tx = d.displacement(ep(0, j), ep(1, j));
                    else if (i == res - 1)
                        tx = d.displacement(ep(res - 2, j), ep(res - 1, j));
                    else
                        tx = d.displacement(ep(i - 1, j), ep(i + 1, j)) * 0.5;
                    if (j == 0)
                        ty = d.displacement(ep(i, 0), ep(i, 1));
                    else if (j == res - 1)
                        ty = d.displacement(ep(i, res - 2), ep(i, res - 1));
                    else
                        ty = d.displacement(ep(i, j - 1), ep(i, j + 1)) * 0.5;
                    double cell_area = std::fabs(tx.cross(ty));
                    if (cell_area > 0.0)
                        nu_image += measure_density_at(sys, ep(i, j)) * cell_area;
                    if (img.branched[static_cast<std::size_t>(i) * res + j]) branched = true;
                }
            }

            PushforwardEntry e;
            e.set_id = nb.id;
            e.time = t;
            e.nu_ref = nu_ref;
            e.nu_image = nu_image;
            e.relative_error = nu_ref > 0.0 ? std::fabs(nu_image - nu_ref) / nu_ref : 0.0;
            e.cover_area = fsr.cover_area;
            e.cover_nu = cover_nu_integral(sys, fsr.cover);
            e.branched = branched;
            e.cap_hit = fsr.branch_cap_hit;
            entries.push_back(std::move(e));
        }
    }
    return entries;
}

// -----------------------------------------------------------------------------
// Closed-orbit measure
// -----------------------------------------------------------------------------

CycleMeasure::CycleMeasure(QuotientDomain domain, std::vector<ArcSample> samples,
                           double period)
    : domain_(std::move(domain)), samples_(std::move(samples)), period_(period) {}

namespace {

// Inside-fraction of a straight covering-space segment against a box,
// Liang-Barsky style; exact for affine segments.
double segment_inside_fraction(const Rect& box, const Point& p, const Vec2& delta) {
    double s0 = 0.0, s1 = 1.0;
    auto clip = [&](double start, double dir, double lo, double hi) {
        if (dir == 0.0) return start >= lo && start <= hi;
        double a = (lo - start) / dir;
        double b = (hi - start) / dir;
        if (a > b) std::swap(a, b);
        s0 = std::max(s0, a);
        s1 = std::min(s1, b);
        return true;
    };
    if (!clip(p.x, delta.x, box.x0, box.x1)) return 0.0;
    if (!clip(p.y, delta.y, box.y0, box.y1)) return 0.0;
    return std::max(0.0, s1 - s0);
}

}  // namespace

double CycleMeasure::nu_box(const Rect& box) const {
    if (samples_.size() < 2 || period_ <= 0.0) return 0.0;
    double inside_time = 0.0;
    for (std::size_t i = 0; i + 1 < samples_.size(); ++i) {
        double dt = samples_[i + 1].t - samples_[i].t;
        if (dt <= 0.0) continue;
        Point p = samples_[i].p;
        Vec2 delta = domain_.displacement(p, samples_[i + 1].p);
        if (!domain_.is_quotient()) {
            inside_time += dt * segment_inside_fraction(box, p, delta);
            continue;
        }
        // The covering segment may straddle identifications: test the box in
        // nearby translates (reflection handled by testing the wrapped start).
        double frac = 0.0;
        for (long kx = -1; kx <= 1 && frac == 0.0; ++kx)
            for (long ky = -1; ky <= 1 && frac == 0.0; ++ky) {
                Point q{p.x + kx * domain_.p, p.y + ky * domain_.q};
                frac = segment_inside_fraction(box, q, delta);
            }
        inside_time += dt * frac;
    }
    return inside_time / period_;
}

Point CycleMeasure::at_time(double t) const {
    double tau = std::fmod(t - samples_.front().t, period_);
    if (tau < 0.0) tau += period_;
    tau += samples_.front().t;
    auto it = std::lower_bound(samples_.begin(), samples_.end(), tau,
                               [](const ArcSample& a, double v) { return a.t < v; });
    if (it == samples_.begin()) return it->p;
    if (it == samples_.end()) return samples_.back().p;
    auto prev = std::prev(it);
    double w = (tau - prev->t) / (it->t - prev->t);
    Vec2 delta = domain_.displacement(prev->p, it->p);
    return domain_.canonicalize(prev->p + w * delta);
}

CycleMeasure cycle_measure(const PiecewiseSystem& sys, const Point& witness,
                           double t_period, double closure_tol, const FlowOptions& opt_in) {
    FlowOptions opt = opt_in;
    opt.policy = FlowPolicy::Deterministic;
    opt.record_samples = true;
    bool met_nz = false;
    opt.monitor = [&](int, const Point&, const SigmaClass& cls, double) {
        if (cls.label == SigmaLabel::Sliding || cls.label == SigmaLabel::Escaping ||
            cls.label == SigmaLabel::Tangency)
            met_nz = true;
        return false;
    };
    BranchTree tree = flow_point(sys, witness, t_period, opt);
    if (met_nz)
        throw FlowError("orbit-meets-nz",
                        "orbit passes through the non-uniqueness set; no flow measure");

    // Concatenate the single root-to-leaf chain.
    std::vector<ArcSample> samples;
    int node = 0;
    while (true) {
        const TreeNode& n = tree.nodes[node];
        if (n.children.size() > 1)
            throw FlowError("orbit-branches", "orbit is not branch-free");
        for (const ArcSample& s : n.arc.samples) {
            if (samples.empty() || s.t > samples.back().t) samples.push_back(s);
        }
        if (n.children.empty()) break;
        node = n.children[0];
    }

    Point start = sys.domain.canonicalize(witness);
    Point end = samples.back().p;
    double gap = sys.domain.distance(start, end);
    if (gap > closure_tol)
        throw FlowError("not-closed", "orbit does not close after the stated period "
                                      "(gap " + format_double(gap) + ")");
    return CycleMeasure(sys.domain, std::move(samples), t_period);
}

// -----------------------------------------------------------------------------
// First-return map
// -----------------------------------------------------------------------------

ReturnMapResult return_map(const PiecewiseSystem& sys, const Point& tangency_pt,
                           const std::vector<double>& offsets, const FlowOptions& opt_in) {
    // Locate the surface the tangency sits on.
    Point c = sys.domain.canonicalize(tangency_pt);
    int surface = -1;
    for (std::size_t j = 0; j < sys.surfaces.size(); ++j)
        if (std::fabs(sys.surfaces[j].eval(c)) <= kOnSigmaTol) {
            surface = static_cast<int>(j);
            break;
        }
    if (surface < 0) throw OffSurfaceError("tangency point is not on any surface");

    SigmaClass cls = classify_point(sys, surface, c);
    if (cls.label != SigmaLabel::Tangency || cls.tangency.size() != 2)
        throw WrongRegionError("point is not a two-sided tangency");
    for (const auto& ts : cls.tangency)
        if (ts.order != 2 || ts.visibility != Visibility::Invisible)
            throw WrongRegionError("return map requires an invisible order-2 tangency "
                                   "on both sides");

    Vec2 g = sys.surfaces[surface].gradient(c);
    double gn = g.norm();
    Vec2 tau{g.y / gn, -g.x / gn};
    Vec2 fp = sys.sided_field(surface, c, +1);
    Vec2 fm = sys.sided_field(surface, c, -1);
    if (!(fp.dot(tau) * fm.dot(tau) < 0.0))
        throw WrongRegionError("tangential directions do not oppose (F+ F- >= 0)");

    ReturnMapResult result;
    result.tangency = c;
    FlowOptions opt = opt_in;
    opt.policy = FlowPolicy::Deterministic;
    opt.max_surface_hits = 2;
    opt.record_samples = false;

    for (double s : offsets) {
        if (s == 0.0)
            throw WrongRegionError("offset 0 is the tangency point itself");
        Point q0 = sys.domain.canonicalize(c + s * tau);
        // pull onto the surface
        const SwitchingSurface& sj = sys.surfaces[surface];
        for (int it = 0; it < 2; ++it) {
            Vec2 gg = sj.gradient(q0);
            double g2 = gg.dot(gg);
            if (g2 < 1e-18) break;
            q0 = sys.domain.canonicalize(q0 - (sj.eval(q0) / g2) * gg);
        }
        SigmaClass qc = classify_point(sys, surface, q0);
        if (qc.label != SigmaLabel::Crossing)
            throw WrongRegionError("offset " + format_double(s) +
                                   " does not start in the crossing region");

        double t_max = 1000.0 * (std::fabs(s) + 1.0);
        BranchTree tree = flow_point(sys, q0, t_max, opt);
        // The last node on the single chain ends with the second surface hit.
        int node = 0;
        while (!tree.nodes[node].children.empty()) node = tree.nodes[node].children[0];
        const Arc& last = tree.nodes[node].arc;
        if (last.end != EndEvent::SurfaceHit)
            throw FlowError("non-returning", "orbit failed to return to the surface "
                                             "within t=" + format_double(t_max));
        Vec2 disp = sys.domain.displacement(c, last.p_end());
        double s_ret = disp.dot(tau);
        result.offsets.push_back(s);
        result.returned.push_back(s_ret);
        result.max_error = std::max(result.max_error, std::fabs(s_ret - s));
    }
    result.center = result.max_error <= 1e-6;
    return result;
}

// -----------------------------------------------------------------------------
// Aggregate report
// -----------------------------------------------------------------------------

MeasureReport check_measure(const PiecewiseSystem& sys, const std::vector<NamedBox>& sets,
                            const std::vector<double>& times, int resolution,
                            int flux_samples) {
    MeasureReport rep;
    rep.flux = check_flux(sys, flux_samples);
    for (std::size_t i = 0; i < sys.pieces.size(); ++i)
        rep.divergence.push_back(check_divergence(sys, static_cast<int>(i), std::nullopt));
    if (!sets.empty() && !times.empty())
        rep.pushforward = pushforward_test(sys, sets, times, resolution);

    for (const auto& f : rep.flux) {
        if (f.violation) {
            rep.verdict = MeasureVerdict::ViolationDetected;
            rep.witness = "flux residual " + format_double(f.max_abs_residual) +
                          " on surface " + std::to_string(f.surface) + " at (" +
                          format_double(f.witness.x) + ", " + format_double(f.witness.y) + ")";
            return rep;
        }
    }
    for (const auto& dv : rep.divergence) {
        if (dv.violation) {
            rep.verdict = MeasureVerdict::ViolationDetected;
            rep.witness = "divergence " + format_double(dv.max_abs) + " in piece " +
                          std::to_string(dv.piece) + " at (" + format_double(dv.witness.x) +
                          ", " + format_double(dv.witness.y) + ")";
            return rep;
        }
    }
    for (const auto& p : rep.pushforward) {
        if (p.relative_error > kPushforwardThreshold) {
            rep.verdict = MeasureVerdict::ViolationDetected;
            rep.witness = "push-forward error " + format_double(p.relative_error) +
                          " for set " + p.set_id + " at t=" + format_double(p.time);
            return rep;
        }
    }
    return rep;
}

}  // namespace filippov
