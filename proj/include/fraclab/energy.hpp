#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fraclab/domain.hpp"
#include "fraclab/kernel.hpp"

namespace fraclab {

enum class StepStrategy {
    Fixed,
    AdaptiveTwoPoint,
    /// Damped Newton steps on a regularized Hessian, started from the rescaled p = 2 solution.
    RegularizedNewton,
    /// AdaptiveTwoPoint for p >= 2, RegularizedNewton for p < 2.
    Auto,
};

struct SolveOptions {
    /// Converged when sup|residual| <= tolerance * max|f|.
    double tolerance = 1.0e-10;
    int max_iterations = 50000;
    StepStrategy step = StepStrategy::Auto;
    /// Zero when unset.
    std::optional<GridFunction> initial_guess;
    bool record_trajectory = true;
};

struct SolveReport {
    int iterations = 0;
    double energy = 0.0;
    double residual_norm = 0.0;
    /// Absolute residual threshold that was applied.
    double threshold = 0.0;
    /// Energy after every accepted step, starting with the initial guess.
    std::vector<double> trajectory;
    bool converged = false;
    std::string message;
};

struct Solution {
    GridFunction u;
    SolveReport report;
};

/// J(u) = (1/p)[sum_{i<j} 2 W_ij |u_i-u_j|^p + sum_i 2 E_i |u_i|^p] - sum_i f_i u_i vol_i.
double discrete_energy(const GridFunction& u, const KernelWeights& w, const GridFunction& f);

/// Discrete (-Delta)^s_p u at every node: [2 sum_j W_ij (u_i-u_j)^{p-1} + 2 E_i u_i^{p-1}] / vol_i.
GridFunction apply_operator(const GridFunction& u, const KernelWeights& w);

/// apply_operator(u) - f; zero exactly at the discrete weak solution.
GridFunction residual(const GridFunction& u, const KernelWeights& w, const GridFunction& f);

/// Minimizes the discrete energy with monotone backtracking on every step.
Solution solve(const KernelWeights& w, const GridFunction& f, const SolveOptions& opts = {});

/// Solution of (-Delta)^s_p psi = 1 in the domain, psi = 0 outside.
Solution torsion(const KernelWeights& w, const SolveOptions& opts = {});
Solution torsion(const DomainSpec& domain, const OperatorParams& params, int n, const SolveOptions& opts = {});

}  // namespace fraclab
