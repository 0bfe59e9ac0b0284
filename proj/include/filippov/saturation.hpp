#pragma once

// =============================================================================
// Non-uniqueness machinery: the seed set N_Z (sliding/escaping intervals plus
// branching tangency points) and a grid estimate of its saturation Sat(N_Z)
// over a finite time horizon, with stored witnesses for every flagged cell.
// =============================================================================

#include <optional>
#include <string>
#include <vector>

#include "filippov/classify.hpp"
#include "filippov/flow.hpp"

namespace filippov {

struct SeedInterval {
    int surface = 0;
    double param0 = 0.0;
    double param1 = 0.0;
    SigmaLabel label = SigmaLabel::Sliding;  // Sliding or Escaping
};

struct SeedSet {
    std::vector<SeedInterval> intervals;
    std::vector<TangencyPoint> branching_tangencies;
    std::vector<SurfaceScan> scans;

    bool empty() const { return intervals.empty() && branching_tangencies.empty(); }
};

// Scans every surface and collects the sliding/escaping intervals plus
// tangency points that admit multiple local solutions (a visible departure
// adjacent to a sliding or escaping interval).
SeedSet seed_set(const PiecewiseSystem& sys, int samples_per_surface);

enum class CellFlag : unsigned char { NotInSat = 0, InSat = 1, Undecided = 2 };

struct SatWitness {
    int cell = -1;
    double time = 0.0;  // signed contact time
    int surface = -1;
    Point contact;
};

struct SaturationGrid {
    int nx = 0, ny = 0;
    double horizon = 0.0;
    int branch_cap = 0;
    std::vector<CellFlag> flags;          // row-major, ix * ny + iy
    std::vector<SatWitness> witnesses;    // one per InSat cell
    double fraction = 0.0;                // #InSat / (nx*ny)
    int undecided = 0;

    Point cell_center(const QuotientDomain& d, int ix, int iy) const {
        return {d.x0 + (ix + 0.5) * d.p / nx, d.y0 + (iy + 0.5) * d.q / ny};
    }
    CellFlag at(int ix, int iy) const { return flags[static_cast<std::size_t>(ix) * ny + iy]; }
};

struct SaturationOptions {
    int seed_samples = 256;
    double tol = 1e-7;  // probe integration tolerance
    int branch_cap = 64;
};

// Flags each cell center whose forward or backward trajectory contacts the
// seed set within |t| <= horizon. Estimates only: NotInSat is horizon-
// qualified, Undecided marks probes that errored out (branch caps, order
// overflow, step underflow).
SaturationGrid estimate_saturation(const PiecewiseSystem& sys, int nx, int ny,
                                   double horizon, const SaturationOptions& opt = {});

// Re-runs the probe for a flagged cell and returns the recontact point;
// used to validate stored witnesses.
std::optional<Point> replay_witness(const PiecewiseSystem& sys, const SaturationGrid& grid,
                                    const SatWitness& w, const SaturationOptions& opt = {});

}  // namespace filippov
