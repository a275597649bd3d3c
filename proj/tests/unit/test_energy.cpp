#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fraclab/energy.hpp"
#include "fraclab/errors.hpp"

using namespace fraclab;

namespace {

GridFunction random_function(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    GridFunction u(n);
    for (double& v : u.values) {
        v = d(rng);
    }
    return u;
}

// Plain Gaussian elimination with partial pivoting; the matrix is small and dense.
std::vector<double> dense_solve(std::vector<double> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(A[r * n + c]) > std::abs(A[piv * n + c])) {
                piv = r;
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            std::swap(A[c * n + k], A[piv * n + k]);
        }
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double m = A[r * n + c] / A[c * n + c];
            for (std::size_t k = c; k < n; ++k) {
                A[r * n + k] -= m * A[c * n + k];
            }
            b[r] -= m * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t k = r + 1; k < n; ++k) {
            acc -= A[r * n + k] * x[k];
        }
        x[r] = acc / A[r * n + r];
    }
    return x;
}

}  // namespace

TEST(Energy, SpikeEnergyFromTheWeights) {
    const KernelWeights w = assemble_weights(build_grid(DomainSpec::interval(-1.0, 1.0), 20), OperatorParams::make(3.0, 0.4));
    const GridFunction f(w.n, 2.0);
    for (std::size_t k : {0u, 7u, 19u}) {
        GridFunction u(w.n, 0.0);
        u[k] = 1.0;
        double expect = 2.0 * w.exterior[k];
        for (std::size_t j = 0; j < w.n; ++j) {
            expect += 2.0 * w.W(k, j);
        }
        expect = expect / 3.0 - 2.0 * w.grid.volumes[k];
        EXPECT_NEAR(discrete_energy(u, w, f), expect, 1e-13 * std::abs(expect));
    }
    EXPECT_EQ(discrete_energy(GridFunction(w.n, 0.0), w, f), 0.0);
}

TEST(Energy, ResidualIsTheEnergyGradient) {
    for (double p : {1.5, 2.0, 3.5}) {
        const KernelWeights w =
            assemble_weights(build_grid(DomainSpec::interval(0.0, 1.0), 16), OperatorParams::make(p, 0.6));
        const GridFunction u = random_function(w.n, 3);
        const GridFunction f = random_function(w.n, 4);
        const GridFunction r = residual(u, w, f);
        for (std::size_t i = 0; i < w.n; i += 5) {
            const double step = 1e-5;
            GridFunction up = u;
            GridFunction dn = u;
            up[i] += step;
            dn[i] -= step;
            const double fd = (discrete_energy(up, w, f) - discrete_energy(dn, w, f)) / (2.0 * step);
            EXPECT_NEAR(fd, r[i] * w.grid.volumes[i], 1e-6 * (1.0 + std::abs(fd))) << "p " << p << " i " << i;
        }
    }
}

TEST(Energy, MidpointConvexity) {
    const KernelWeights w =
        assemble_weights(build_grid(DomainSpec::disc(1.0), 10), OperatorParams::make(1.7, 0.3));
    const GridFunction f(w.n, 1.0);
    for (unsigned seed = 0; seed < 10; ++seed) {
        const GridFunction a = random_function(w.n, seed);
        const GridFunction b = random_function(w.n, seed + 100);
        GridFunction m(w.n);
        for (std::size_t i = 0; i < w.n; ++i) {
            m[i] = 0.5 * (a[i] + b[i]);
        }
        const double ja = discrete_energy(a, w, f);
        const double jb = discrete_energy(b, w, f);
        EXPECT_LE(discrete_energy(m, w, f), 0.5 * (ja + jb) + 1e-13 * (std::abs(ja) + std::abs(jb)));
    }
}

TEST(Energy, OperatorIsHomogeneousOfDegreePMinusOne) {
    const KernelWeights w =
        assemble_weights(build_grid(DomainSpec::interval(-1.0, 1.0), 24), OperatorParams::make(2.5, 0.5));
    const GridFunction u = random_function(w.n, 11);
    GridFunction v = u;
    for (double& x : v.values) {
        x *= -3.0;
    }
    const GridFunction a = apply_operator(u, w);
    const GridFunction b = apply_operator(v, w);
    for (std::size_t i = 0; i < w.n; ++i) {
        EXPECT_NEAR(b[i], -std::pow(3.0, 1.5) * a[i], 1e-12 * std::abs(b[i]) + 1e-12);
    }
}

TEST(Energy, LinearCaseMatchesDenseElimination) {
    const KernelWeights w =
        assemble_weights(build_grid(DomainSpec::interval(-1.0, 1.0), 64), OperatorParams::make(2.0, 0.5));
    const std::size_t n = w.n;
    std::vector<double> A(n * n, 0.0);
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
        double diag = 2.0 * w.exterior[i];
        for (std::size_t j = 0; j < n; ++j) {
            diag += 2.0 * w.W(i, j);
            A[i * n + j] -= 2.0 * w.W(i, j);
        }
        A[i * n + i] += diag;
        b[i] = w.grid.volumes[i];
    }
    const std::vector<double> ref = dense_solve(A, b);
    SolveOptions o;
    o.tolerance = 1e-12;
    const Solution s = torsion(w, o);
    ASSERT_TRUE(s.report.converged) << s.report.message;
    double sup = 0.0;
    for (double v : ref) {
        sup = std::max(sup, std::abs(v));
    }
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(s.u[i], ref[i], 1e-9 * sup);
    }
    // The continuum torsion function is sqrt(1 - x^2) / (2 pi); the discrete one approaches it.
    const std::size_t mid = n / 2;
    const double x = w.grid.nodes[mid][0];
    EXPECT_NEAR(s.u[mid], std::sqrt(1.0 - x * x) / (2.0 * M_PI), 0.02 / (2.0 * M_PI));
}

TEST(Energy, SolveScalesWithTheSource) {
    for (double p : {1.6, 2.0, 3.0}) {
        const KernelWeights w =
            assemble_weights(build_grid(DomainSpec::interval(0.0, 2.0), 32), OperatorParams::make(p, 0.5));
        SolveOptions o;
        o.tolerance = 1e-11;
        const Solution a = solve(w, GridFunction(w.n, 1.0), o);
        const Solution b = solve(w, GridFunction(w.n, 8.0), o);
        ASSERT_TRUE(a.report.converged && b.report.converged);
        const double factor = std::pow(8.0, 1.0 / (p - 1.0));
        for (std::size_t i = 0; i < w.n; ++i) {
            EXPECT_NEAR(b.u[i], factor * a.u[i], 1e-8 * factor * a.u.sup_norm()) << "p " << p;
        }
    }
}

TEST(Energy, SymmetricDataGiveSymmetricSolutions) {
    const KernelWeights w =
        assemble_weights(build_grid(DomainSpec::interval(-1.0, 1.0), 40), OperatorParams::make(3.0, 0.3));
    const Solution s = torsion(w);
    ASSERT_TRUE(s.report.converged);
    for (std::size_t i = 0; i < w.n; ++i) {
        EXPECT_NEAR(s.u[i], s.u[w.n - 1 - i], 1e-9 * s.u.sup_norm());
        EXPECT_GT(s.u[i], 0.0);
    }
}

TEST(Energy, TrajectoryIsNonincreasing) {
    for (StepStrategy step : {StepStrategy::AdaptiveTwoPoint, StepStrategy::RegularizedNewton, StepStrategy::Fixed}) {
        const KernelWeights w =
            assemble_weights(build_grid(DomainSpec::interval(-1.0, 1.0), 32), OperatorParams::make(1.8, 0.4));
        SolveOptions o;
        o.step = step;
        o.max_iterations = 300;
        const Solution s = solve(w, GridFunction(w.n, 1.0), o);
        ASSERT_GE(s.report.trajectory.size(), 2u);
        for (std::size_t k = 1; k < s.report.trajectory.size(); ++k) {
            const double prev = s.report.trajectory[k - 1];
            EXPECT_LE(s.report.trajectory[k], prev + 1e-14 * std::abs(prev)) << "step " << k;
        }
        EXPECT_DOUBLE_EQ(s.report.trajectory.back(), s.report.energy);
    }
}

TEST(Energy, ZeroSourceGivesZero) {
    const KernelWeights w =
        assemble_weights(build_grid(DomainSpec::interval(-1.0, 1.0), 16), OperatorParams::make(2.5, 0.5));
    const Solution s = solve(w, GridFunction(w.n, 0.0));
    EXPECT_TRUE(s.report.converged);
    EXPECT_EQ(s.u.sup_norm(), 0.0);
}

TEST(Energy, SizeMismatchIsAGeometryError) {
    const KernelWeights w =
        assemble_weights(build_grid(DomainSpec::interval(-1.0, 1.0), 16), OperatorParams::make(2.0, 0.5));
    EXPECT_THROW(discrete_energy(GridFunction(15), w, GridFunction(16)), GeometryError);
    EXPECT_THROW(apply_operator(GridFunction(17), w), GeometryError);
    EXPECT_THROW(solve(w, GridFunction(3)), GeometryError);
}
