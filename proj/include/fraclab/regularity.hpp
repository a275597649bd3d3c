#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fraclab/domain.hpp"
#include "fraclab/energy.hpp"
#include "fraclab/kernel.hpp"

namespace fraclab {

struct ComparisonReport {
    bool passed = false;
    /// max_i (u1_i - u2_i); nonpositive when the ordering holds.
    double max_violation = 0.0;
    double threshold = 0.0;
    Solution lower;
    Solution upper;
};

/// Solves with f1 <= f2 and checks u1 <= u2 at every node up to 10x the solver tolerance.
ComparisonReport comparison_check(const GridFunction& f1, const GridFunction& f2, const KernelWeights& w,
                                  const SolveOptions& opts = {});

struct AprioriReport {
    std::vector<double> K;
    std::vector<double> sup_norm;
    /// Least-squares slope of log ||u||_inf against log K; 1/(p-1) by homogeneity.
    double slope = 0.0;
    /// max_K ||u||_inf^{p-1} / K.
    double C_d = 0.0;
    /// (max - min) / max of ||u||^{p-1}/K over the list.
    double C_d_spread = 0.0;
};

AprioriReport apriori_check(const KernelWeights& w, const std::vector<double>& K_list,
                            const SolveOptions& opts = {});
AprioriReport apriori_check(const DomainSpec& domain, const OperatorParams& params,
                            const std::vector<double>& K_list, int n, const SolveOptions& opts = {});

struct BoundaryReport {
    double sup_ratio = 0.0;
    std::size_t argsup = 0;
    double rho = 0.0;
    /// (delta, |u|/delta^s) over the collar delta < rho, sorted by delta.
    std::vector<std::pair<double, double>> profile;
};

/// sup |u_i| / delta_i^s; rho <= 0 selects diam/8.
BoundaryReport boundary_ratio(const GridFunction& u, const Grid& grid, const OperatorParams& params,
                              double rho = 0.0);

struct OscillationRow {
    double radius = 0.0;
    double oscillation = 0.0;
    std::size_t nodes = 0;
};

/// osc over the closed ball B_r(center) of the zero-extended grid function: nodes of the ball
/// plus the value 0 whenever the ball reaches the complement.
std::vector<OscillationRow> oscillation_decay(const GridFunction& u, const Grid& grid, const Point& center,
                                              const std::vector<double>& radii);

/// Dyadic radii r_max, r_max/2, ... down to at least r_min.
std::vector<double> dyadic_radii(double r_min, double r_max);

struct HolderFit {
    Point center{};
    double delta = 0.0;
    double alpha = 0.0;
    double lambda = 0.0;
    double r_squared = 0.0;
    bool constant = false;
    std::vector<OscillationRow> table;
};

struct HolderReport {
    std::vector<HolderFit> fits;
    /// Minimum fitted exponent; +inf when every oscillation vanishes.
    double alpha = std::numeric_limits<double>::infinity();
    std::size_t worst = 0;
    double r_min = 0.0;
    double r_max = 0.0;
    /// lambda * R^alpha / ((K R^{ps})^{1/(p-1)} + sup|u| + Tail(u; center, R)) at the worst center.
    double C = 0.0;
    bool constant = false;
};

/// Log-log least squares of oscillation against radius at every center.
HolderReport holder_fit(const GridFunction& u, const Grid& grid, const OperatorParams& params,
                        const std::vector<Point>& centers, const std::vector<double>& radii, double K = 0.0);

/// Fit range [4h, r_max] at the node nearest each boundary point.
HolderReport boundary_holder_fit(const GridFunction& u, const Grid& grid, const OperatorParams& params,
                                 double r_max, double K = 0.0);

struct HarnackReport {
    double inf_inner = 0.0;
    double annulus_average = 0.0;
    double penalty = 0.0;
    double sup_ball = 0.0;
    double negative_tail = 0.0;
    /// (inf + C penalty + eps sup + C_eps tail) / average; reported even when > 1.
    double sigma = 0.0;
    std::size_t inner_nodes = 0;
    std::size_t annulus_nodes = 0;
};

struct HarnackConstants {
    double C = 1.0;
    double C_eps = 1.0;
    double eps = 0.0;
};

/// Weak Harnack terms on B_{R/4}, B_R \ B_{R/2} around center for a supersolution with
/// (-Delta)^s_p u >= -K.
HarnackReport harnack_check(const GridFunction& u, const Grid& grid, const OperatorParams& params, double K,
                            const Point& center, double R, const HarnackConstants& constants = {});

struct DeltaSReport {
    std::vector<Point> probes;
    std::vector<double> delta;
    std::vector<PointwiseResult> values;
    std::vector<PointwiseResult> refined;
    double sup = 0.0;
    double sup_refined = 0.0;
    double drift = 0.0;
    bool passed = false;
};

/// Evaluates (-Delta)^s_p delta^s at probe points of the collar and one quadrature level deeper.
DeltaSReport delta_s_rhs_check(const DomainSpec& domain, const OperatorParams& params, double rho,
                               const std::vector<Point>& probes, const QuadratureOptions& opts = {});

}  // namespace fraclab
