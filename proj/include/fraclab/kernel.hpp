#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "fraclab/domain.hpp"
#include "fraclab/fields.hpp"

namespace fraclab {

/// The pair (p, s) of the operator (-Delta)^s_p.
struct OperatorParams {
    double p = 2.0;
    double s = 0.5;

    /// Validates p > 1 and 0 < s < 1.
    static OperatorParams make(double p, double s);

    double ps() const { return p * s; }
    double pm1() const { return p - 1.0; }
    /// The principal value exists for smooth fields: p >= 2 or s < 2(p-1)/p.
    bool pointwise_valid() const { return p >= 2.0 || s < 2.0 * (p - 1.0) / p; }
    double singular_threshold() const { return 2.0 * (p - 1.0) / p; }
};

/// |a|^q sign(a); with q = p - 1 this is the signed power a^{p-1} = |a|^{p-2} a.
inline double signed_power(double a, double q) {
    const double m = std::abs(a);
    double r;
    if (q == 1.0) {
        r = m;
    } else if (q == 2.0) {
        r = m * m;
    } else if (q == 0.5) {
        r = std::sqrt(m);
    } else if (q == 1.5) {
        r = m * std::sqrt(m);
    } else {
        r = std::pow(m, q);
    }
    return a < 0.0 ? -r : r;
}

/// Geometric schedule eps_k = eps0 * 2^-k, k = 0..levels.
struct EpsilonSchedule {
    double eps0 = 1.0;
    int levels = 40;

    std::vector<double> values() const;
};

/// Controls of the principal-value and tail quadratures.
struct QuadratureOptions {
    EpsilonSchedule schedule{};
    /// Integration stops at this distance from x; +inf integrates until the growth bound is negligible.
    double far_cutoff = 1.0e3;
    /// Geometric refinement levels toward every break point of the field.
    int break_levels = 30;
    /// Every panel is split into this many equal pieces.
    int panel_split = 1;
    /// Gauss panels over the half circle of directions (two dimensions only).
    int angular_panels = 24;
    /// Skip the singular-case guard.
    bool override_singular = false;
    /// Tolerance on the last increments of the epsilon series.
    double series_tolerance = 1.0e-5;

    /// One level deeper: more geometric levels and every panel halved.
    QuadratureOptions refined() const;
};

enum class BoundaryTreatment {
    /// Exterior weights are the cell integrals of the kernel over the complement.
    Exact,
    /// Exterior weights corrected so the discrete operator annihilates (x_N)_+^s on the half-line.
    HalfSpaceCalibrated,
};

/// Pair weights W_ij = int_{cell i} int_{cell j} |x-y|^{-N-ps} and exterior weights
/// E_i = int_{cell i} int_{complement} |x-y|^{-N-ps}; the discrete Dirichlet form.
struct KernelWeights {
    Grid grid;
    OperatorParams params;
    BoundaryTreatment treatment = BoundaryTreatment::Exact;
    std::size_t n = 0;
    std::vector<double> pair;  ///< dense row-major n x n, zero diagonal
    std::vector<double> exterior;

    double W(std::size_t i, std::size_t j) const { return pair[i * n + j]; }
    const double* row(std::size_t i) const { return pair.data() + i * n; }
    /// Rows of a one-dimensional uniform grid are Toeplitz; residual sums pair j = i-k with j = i+k.
    bool distance_paired() const { return grid.dim() == 1; }
};

/// Double integral of the kernel over two disjoint or adjacent cells. Adjacent cells
/// with ps >= 1 exclude the region |x - y| <= h/2, h the cell length.
double cell_pair_weight(const Cell& a, const Cell& b, const OperatorParams& params, int dim);

/// Same, with both cells clipped to the domain (disc cells).
double cell_pair_weight(const Cell& a, const Cell& b, const OperatorParams& params,
                        const DomainSpec& domain);

/// int_{complement} |x - y|^{-N-ps} dy at an interior point.
double exterior_weight(const Point& x, const DomainSpec& domain, const OperatorParams& params);

KernelWeights assemble_weights(const Grid& grid, const OperatorParams& params,
                               BoundaryTreatment treatment = BoundaryTreatment::HalfSpaceCalibrated);

/// Exterior-weight corrections Delta_k (unit spacing) for the half-line grid nodes k + 1/2,
/// chosen so that the sampled (x)_+^s has zero discrete residual at nodes 0..count-1.
std::vector<double> half_line_calibration(const OperatorParams& params, std::size_t count);

/// Tail(u; x, R) = (R^{ps} int_{|y-x|>R} |u|^{p-1} |x-y|^{-N-ps} dy)^{1/(p-1)}.
double tail(const AnalyticField& field, const Point& x, double radius, const OperatorParams& params,
            const QuadratureOptions& opts = {});

/// Tail of a grid function; only cells of the domain outside B_R(x) contribute.
double tail(const GridFunction& u, const Grid& grid, const Point& x, double radius,
            const OperatorParams& params);

struct PointwiseResult {
    double value = 0.0;
    double error_bar = 0.0;
    /// Bound on the part beyond far_cutoff (already included in error_bar).
    double tail_bound = 0.0;
    std::vector<double> eps;
    /// Partial integrals over |x - y| > eps_k.
    std::vector<double> series;
    double cauchy_tail = 0.0;
    bool series_converged = false;
};

/// 2 PV int sign-power(u(x) - u(y)) |x-y|^{-N-ps} dy by symmetric pairing of y with its
/// reflection about x, graded geometric panels toward x and toward every break point.
PointwiseResult eval_pointwise(const AnalyticField& field, const Point& x, const OperatorParams& params,
                               const QuadratureOptions& opts = {});

/// The truncated integrals over |x - y| > eps_k; divergence shows up in the returned series.
PointwiseResult eps_limit_series(const AnalyticField& field, const Point& x, const OperatorParams& params,
                                 const QuadratureOptions& opts = {});

struct PerturbationResult {
    double value = 0.0;
    double error_bar = 0.0;
};

/// h(x) = 2 int_{supp v} [(u(x)-u(y)-v(y))^{p-1} - (u(x)-u(y))^{p-1}] |x-y|^{-N-ps} dy.
PerturbationResult perturbation_rhs(const AnalyticField& u, const AnalyticField& v, const Point& x,
                                    const OperatorParams& params, const DomainSpec& domain);

/// Grid-function variant: u(x) = u_node, u = 0 on supp v.
PerturbationResult perturbation_rhs(const GridFunction& u, const Grid& grid, std::size_t node,
                                    const AnalyticField& v, const OperatorParams& params);

}  // namespace fraclab
