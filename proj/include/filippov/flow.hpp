#pragma once

// =============================================================================
// Event-driven integration of Filippov solutions: adaptive RK5(4) free flight
// inside smooth pieces with bracketed/bisected surface-hit localization,
// sliding-mode motion constrained to a surface with exit detection at
// tangency boundaries, seam handling on quotient domains, and solution trees
// that branch at points with multiple admissible continuations.
// =============================================================================

#include <functional>
#include <string>
#include <vector>

#include "filippov/classify.hpp"
#include "filippov/system.hpp"

namespace filippov {

enum class ArcMode { Free, Sliding };

enum class EndEvent { SurfaceHit, SlidingExit, BranchPoint, TimeLimit, DomainExit };

std::string to_string(EndEvent e);

struct ArcSample {
    double t = 0.0;
    Point p;
};

struct Arc {
    ArcMode mode = ArcMode::Free;
    int index = -1;  // piece id (Free) or surface id (Sliding)
    std::vector<ArcSample> samples;
    EndEvent end = EndEvent::TimeLimit;
    int end_surface = -1;  // SurfaceHit / SlidingExit

    double t_begin() const { return samples.front().t; }
    double t_end() const { return samples.back().t; }
    const Point& p_end() const { return samples.back().p; }
};

enum class FlowPolicy { Deterministic, AllBranches };

enum class TimeDirection { Forward, Backward };

// Stop callback invoked at every localized surface event; returning true
// halts the whole tree expansion (used for seed-contact probes).
using ContactMonitor =
    std::function<bool(int surface, const Point& pt, const SigmaClass& cls, double t)>;

struct FlowOptions {
    double tol = 1e-9;       // local error per step
    double max_step = 0.1;
    double min_step = 1e-13;  // underflow guard (stiffness)
    int branch_cap = 64;
    FlowPolicy policy = FlowPolicy::Deterministic;
    int max_surface_hits = 0;  // stop a path after this many hits (0 = off)
    bool record_samples = true;
    ContactMonitor monitor;
};

struct TreeNode {
    Arc arc;
    int parent = -1;
    std::vector<int> children;
    int depth = 0;
    std::string branch_label;
};

struct BranchTree {
    Point root;
    double T = 0.0;  // signed requested duration
    std::vector<TreeNode> nodes;
    bool truncated = false;          // branch cap reached somewhere
    bool stopped_by_monitor = false;

    std::vector<int> leaf_indices() const;
    std::vector<Point> endpoints_at_time_limit() const;
};

// Transition decision at a surface point per the classification table.
struct TransitionOption {
    enum class Kind { EnterPiece, SlideOn } kind = Kind::EnterPiece;
    int depart_side = 0;  // EnterPiece: +1 / -1 (0 means "continue through")
    int surface = -1;     // SlideOn
    std::string label;
};

struct TransitionDecision {
    enum class Kind { Cross, Slide, Branch } kind = Kind::Cross;
    std::vector<TransitionOption> options;
    SigmaClass cls;
};

TransitionDecision transition(const PiecewiseSystem& sys, int surface, const Point& pt,
                              TimeDirection dir);

// Free flight of `piece` from p0 (strictly inside its region) until tmax,
// domain exit, or a localized surface hit (|h| <= 1e-10, time bracket 1e-12).
Arc integrate_free(const PiecewiseSystem& sys, int piece, const Point& p0, double tmax,
                   double tol);

// Filippov solution tree from p0 over signed time T.
BranchTree flow_point(const PiecewiseSystem& sys, const Point& p0, double T,
                      const FlowOptions& opt = {});

struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool contains(const Point& p) const {
        return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
    }
};

// Sample-grid image of one input box: endpoints[i*res+j] is the (first-leaf)
// image of the cell center (i,j); `branched` marks samples whose trees had
// more than one leaf, `all_endpoints` collects every leaf endpoint.
struct BoxImage {
    Rect box;
    int res = 0;
    double pitch_x = 0.0, pitch_y = 0.0;
    std::vector<Point> endpoints;
    std::vector<unsigned char> branched;
    std::vector<Point> all_endpoints;
};

struct FlowSetResult {
    std::vector<BoxImage> images;
    std::vector<Rect> cover;  // canonical epsilon-inflated boxes (seam-split)
    double cover_area = 0.0;
    bool branch_cap_hit = false;
};

// Outer box-cover approximation of Z_t(A) for a union of boxes A.
FlowSetResult flow_set(const PiecewiseSystem& sys, const std::vector<Rect>& boxes,
                       double t, int resolution, const FlowOptions& opt = {});

// Area of a union of axis-aligned rectangles (coordinate-compression sweep).
double union_area(const std::vector<Rect>& rects);

// Splits a covering-plane rectangle into canonical pieces under the domain's
// identifications (<= 4 pieces for spans smaller than the periods).
std::vector<Rect> split_rect_canonical(const QuotientDomain& d, const Rect& r);

}  // namespace filippov
