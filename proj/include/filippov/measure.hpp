#pragma once

// =============================================================================
// Invariant-measure machinery: the normal-flux balance checker across each
// switching surface, per-piece divergence checks of density-weighted fields,
// the cyclic linear solver for piecewise-constant stripe densities on the
// torus / Klein bottle, quadrature-based push-forward invariance tests, the
// uniform measure carried by a closed orbit, and the first-return map at an
// invisible fold-fold point.
// =============================================================================

#include <optional>
#include <string>
#include <vector>

#include "filippov/classify.hpp"
#include "filippov/flow.hpp"

namespace filippov {

inline constexpr double kFluxThreshold = 1e-9;
inline constexpr double kDivergenceThreshold = 1e-9;
inline constexpr double kPushforwardThreshold = 0.02;

struct FluxSample {
    double param = 0.0;
    Point pt;
    double residual = 0.0;  // alpha+ F+h - alpha- F-h
};

struct FluxProfile {
    int surface = 0;
    double max_abs_residual = 0.0;
    double max_alpha = 0.0;
    double witness_param = 0.0;
    Point witness;
    bool violation = false;  // scale-invariant: |r|/max(alpha) over threshold
    std::vector<FluxSample> samples;
};

// Samples alpha+ F+h - alpha- F-h along every surface; densities come from
// the pieces (default 1, the refractive test).
std::vector<FluxProfile> check_flux(const PiecewiseSystem& sys, int samples_per_surface);

struct DivergenceReport {
    int piece = 0;
    double max_abs = 0.0;
    Point witness;
    bool violation = false;
};

// max |div(alpha F)| over interior samples of the piece's region, computed by
// structural differentiation. Pass an empty optional to use the piece's own
// density.
DivergenceReport check_divergence(const PiecewiseSystem& sys, int piece,
                                  const std::optional<Expr>& density, int grid = 64);

// -----------------------------------------------------------------------------
// Piecewise-constant stripe densities (torus / Klein bottle)
// -----------------------------------------------------------------------------

struct StripedSpec {
    int n = 0;
    std::vector<double> a;        // horizontal drift per stripe
    std::vector<double> b;        // vertical speed per stripe, b_i > 0
    std::vector<double> heights;  // 0 < h_1 < ... < h_n = 1 (stripe tops)
    DomainMode mode = DomainMode::Torus;

    static StripedSpec equal_heights(DomainMode mode, std::vector<double> a,
                                     std::vector<double> b);
};

struct StripedDensitySolution {
    bool feasible = false;
    std::string reason;
    std::vector<double> alpha;  // probability-normalized densities
    double residual = 0.0;      // max cyclic |b_i a_i - b_{i+1} a_{i+1}|
};

// Solves the cyclic balance b_i alpha_i = b_{i+1} alpha_{i+1}; on the Klein
// bottle additionally requires a_i/b_i = a_{n-i+1}/b_{n-i+1} (within 1e-12)
// for the seam flux to balance.
StripedDensitySolution solve_striped_density(const StripedSpec& spec);

// -----------------------------------------------------------------------------
// Push-forward invariance test
// -----------------------------------------------------------------------------

struct PushforwardEntry {
    std::string set_id;
    double time = 0.0;
    double nu_ref = 0.0;        // nu(A) by grid quadrature
    double nu_image = 0.0;      // transported-cell estimate of nu(Z_t(A))
    double relative_error = 0.0;
    double cover_area = 0.0;    // outer box-cover area of Z_t(A)
    double cover_nu = 0.0;      // nu integrated over the outer cover
    bool branched = false;
    bool cap_hit = false;
};

struct NamedBox {
    std::string id;
    Rect box;
};

// nu(A) by midpoint quadrature of the piecewise density; nu(Z_t(A)) by
// transporting each sample cell with a Jacobian estimated from neighboring
// endpoints (collapsing flows transport to zero area), plus the outer box
// cover for upper-bound reporting.
std::vector<PushforwardEntry> pushforward_test(const PiecewiseSystem& sys,
                                               const std::vector<NamedBox>& sets,
                                               const std::vector<double>& times,
                                               int resolution,
                                               const FlowOptions& opt = {});

double measure_density_at(const PiecewiseSystem& sys, const Point& pt);
double quadrature_nu(const PiecewiseSystem& sys, const Rect& box, int n = 256);
double cover_nu_integral(const PiecewiseSystem& sys, const std::vector<Rect>& cover);

// -----------------------------------------------------------------------------
// Closed-orbit measure (invariant flows on compact sets)
// -----------------------------------------------------------------------------

class CycleMeasure {
public:
    CycleMeasure(QuotientDomain domain, std::vector<ArcSample> samples, double period);

    double period() const { return period_; }
    const std::vector<ArcSample>& samples() const { return samples_; }

    // Fraction of orbit time spent inside the box (time-uniform measure).
    double nu_box(const Rect& box) const;

    Point at_time(double t) const;  // periodic interpolation along the orbit

private:
    QuotientDomain domain_;
    std::vector<ArcSample> samples_;
    double period_;
};

// Flows the witness for one period and requires closure within `closure_tol`
// (quotient metric) along a branch-free path that never meets the
// non-uniqueness set; returns the uniform measure on the orbit.
CycleMeasure cycle_measure(const PiecewiseSystem& sys, const Point& witness,
                           double t_period, double closure_tol = 1e-6,
                           const FlowOptions& opt = {});

// -----------------------------------------------------------------------------
// First-return map at an invisible fold-fold
// -----------------------------------------------------------------------------

struct ReturnMapResult {
    Point tangency;
    std::vector<double> offsets;
    std::vector<double> returned;
    double max_error = 0.0;
    bool center = false;  // identity within 1e-6 over the offset list
};

ReturnMapResult return_map(const PiecewiseSystem& sys, const Point& tangency_pt,
                           const std::vector<double>& offsets,
                           const FlowOptions& opt = {});

// -----------------------------------------------------------------------------
// Aggregate report
// -----------------------------------------------------------------------------

enum class MeasureVerdict { ConsistentWithInvariance, ViolationDetected };

struct MeasureReport {
    std::vector<FluxProfile> flux;
    std::vector<DivergenceReport> divergence;
    std::vector<PushforwardEntry> pushforward;
    MeasureVerdict verdict = MeasureVerdict::ConsistentWithInvariance;
    std::string witness;  // human-readable description of the first violation
};

MeasureReport check_measure(const PiecewiseSystem& sys, const std::vector<NamedBox>& sets,
                            const std::vector<double>& times, int resolution,
                            int flux_samples = 256);

}  // namespace filippov
