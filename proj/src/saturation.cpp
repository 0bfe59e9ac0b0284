#include "filippov/saturation.hpp"

#include <atomic>
#include <cmath>

#include "filippov/errors.hpp"
#include "filippov/parallel.hpp"

namespace filippov {

SeedSet seed_set(const PiecewiseSystem& sys, int samples_per_surface) {
    SeedSet seeds;
    for (std::size_t j = 0; j < sys.surfaces.size(); ++j) {
        SurfaceScan scan = scan_surface(sys, static_cast<int>(j), samples_per_surface);
        for (const auto& iv : scan.intervals) {
            if (iv.label == SigmaLabel::Sliding || iv.label == SigmaLabel::Escaping) {
                SeedInterval si;
                si.surface = static_cast<int>(j);
                si.param0 = iv.param0;
                si.param1 = iv.param1;
                si.label = iv.label;
                seeds.intervals.push_back(si);
            }
        }
        // A tangency joins the seed set when a visible departure sits next to
        // a sliding or escaping interval (multiple local continuations).
        for (const auto& tp : scan.tangencies) {
            bool visible = false;
            for (const auto& ts : tp.cls.tangency)
                if (ts.order % 2 == 0 && ts.visibility == Visibility::Visible) visible = true;
            if (!visible) continue;
            bool adjacent = false;
            for (const auto& iv : scan.intervals) {
                if (iv.label != SigmaLabel::Sliding && iv.label != SigmaLabel::Escaping)
                    continue;
                double span = scan.param1 - scan.param0;
                double d0 = std::fabs(tp.param - iv.param0);
                double d1 = std::fabs(tp.param - iv.param1);
                if (scan.closed) {
                    d0 = std::min(d0, span - d0);
                    d1 = std::min(d1, span - d1);
                }
                if (std::min(d0, d1) < 1e-6 * std::max(1.0, span)) adjacent = true;
            }
            if (adjacent) seeds.branching_tangencies.push_back(tp);
        }
        seeds.scans.push_back(std::move(scan));
    }
    return seeds;
}

namespace {

struct ProbeResult {
    bool contact = false;
    bool undecided = false;
    double time = 0.0;
    int surface = -1;
    Point point;
};

// Follows the trajectory in one time direction until it contacts the seed
// set: a hit classified Sliding/Escaping, or a hit near a branching tangency.
ProbeResult probe_direction(const PiecewiseSystem& sys, const SeedSet& seeds,
                            const Point& start, double horizon, int direction,
                            const SaturationOptions& sopt) {
    ProbeResult res;
    FlowOptions opt;
    opt.tol = sopt.tol;
    opt.record_samples = false;
    opt.branch_cap = sopt.branch_cap;
    opt.policy = FlowPolicy::AllBranches;
    opt.monitor = [&](int surface, const Point& pt, const SigmaClass& cls, double t) {
        bool contact = cls.label == SigmaLabel::Sliding || cls.label == SigmaLabel::Escaping;
        if (!contact && cls.label == SigmaLabel::Tangency) {
            for (const auto& tp : seeds.branching_tangencies) {
                if (sys.domain.distance(pt, tp.pt) < 1e-6) {
                    contact = true;
                    break;
                }
            }
        }
        if (contact) {
            res.contact = true;
            res.time = direction * t;
            res.surface = surface;
            res.point = pt;
        }
        return contact;
    };
    try {
        flow_point(sys, start, direction * horizon, opt);
    } catch (const FlowError&) {
        res.undecided = true;
    } catch (const OrderOverflowError&) {
        res.undecided = true;
    } catch (const DegenerateSlidingError&) {
        res.undecided = true;
    }
    return res;
}

}  // namespace

SaturationGrid estimate_saturation(const PiecewiseSystem& sys, int nx, int ny,
                                   double horizon, const SaturationOptions& opt) {
    SeedSet seeds = seed_set(sys, opt.seed_samples);

    SaturationGrid grid;
    grid.nx = nx;
    grid.ny = ny;
    grid.horizon = horizon;
    grid.branch_cap = opt.branch_cap;
    grid.flags.assign(static_cast<std::size_t>(nx) * ny, CellFlag::NotInSat);

    std::vector<SatWitness> witnesses(grid.flags.size());
    std::atomic<int> insat_count{0};
    std::atomic<int> undecided_count{0};

    parallel_for(grid.flags.size(), [&](std::size_t idx) {
        int ix = static_cast<int>(idx) / ny;
        int iy = static_cast<int>(idx) % ny;
        Point center = grid.cell_center(sys.domain, ix, iy);

        ProbeResult fwd = probe_direction(sys, seeds, center, horizon, +1, opt);
        ProbeResult res = fwd;
        if (!fwd.contact) {
            ProbeResult bwd = probe_direction(sys, seeds, center, horizon, -1, opt);
            if (bwd.contact)
                res = bwd;
            else if (fwd.undecided || bwd.undecided)
                res.undecided = true;
        }

        if (res.contact) {
            grid.flags[idx] = CellFlag::InSat;
            SatWitness w;
            w.cell = static_cast<int>(idx);
            w.time = res.time;
            w.surface = res.surface;
            w.contact = res.point;
            witnesses[idx] = w;
            insat_count.fetch_add(1, std::memory_order_relaxed);
        } else if (res.undecided) {
            grid.flags[idx] = CellFlag::Undecided;
            undecided_count.fetch_add(1, std::memory_order_relaxed);
        }
    });

    for (std::size_t idx = 0; idx < grid.flags.size(); ++idx)
        if (grid.flags[idx] == CellFlag::InSat) grid.witnesses.push_back(witnesses[idx]);
    grid.fraction = static_cast<double>(insat_count.load()) /
                    static_cast<double>(grid.flags.size());
    grid.undecided = undecided_count.load();
    return grid;
}

std::optional<Point> replay_witness(const PiecewiseSystem& sys, const SaturationGrid& grid,
                                    const SatWitness& w, const SaturationOptions& opt) {
    SeedSet seeds = seed_set(sys, opt.seed_samples);
    int ix = w.cell / grid.ny;
    int iy = w.cell % grid.ny;
    Point center = grid.cell_center(sys.domain, ix, iy);
    int direction = w.time >= 0.0 ? +1 : -1;
    ProbeResult res =
        probe_direction(sys, seeds, center, grid.horizon, direction, opt);
    if (!res.contact) return std::nullopt;
    return res.point;
}

}  // namespace filippov
