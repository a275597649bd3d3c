#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/quadrature/trapezoidal.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "fraclab/errors.hpp"
#include "fraclab/fields.hpp"
#include "fraclab/kernel.hpp"

using namespace fraclab;
namespace bq = boost::math::quadrature;

namespace {

Cell segment(double lo, double hi) { return Cell{Point{lo, 0.0}, Point{hi, 0.0}}; }

// Two cells [0,h] and [g, g+h]: the difference y - x has density min(t - g + h, g + h - t) on
// [g - h, g + h], so the double integral collapses to one dimension.
double pair_by_difference(double h, double gap_start, double ps, double exclude) {
    const double lo = gap_start - h;
    double total = 0.0;
    // Rising part, density tau on [lo, lo + h].
    const double start = std::max(0.0, exclude - lo);
    if (start < h) {
        auto rise = [&](double tau) { return tau / (lo + tau) * std::pow(lo + tau, -ps); };
        total += bq::tanh_sinh<double>().integrate(rise, start, h);
    }
    // Falling part, density h - tau on [gap_start, gap_start + h].
    auto fall = [&](double tau) { return (h - tau) * std::pow(gap_start + tau, -1.0 - ps); };
    const double fstart = std::max(0.0, exclude - gap_start);
    total += bq::gauss_kronrod<double, 61>::integrate(fall, fstart, h, 15, 1e-14);
    return total;
}

}  // namespace

TEST(Kernel, SignedPower) {
    EXPECT_DOUBLE_EQ(signed_power(-8.0, 1.0 / 3.0), -2.0);
    EXPECT_DOUBLE_EQ(signed_power(9.0, 0.5), 3.0);
    EXPECT_EQ(signed_power(0.0, 0.5), 0.0);
    EXPECT_EQ(signed_power(-2.5, 1.0), -2.5);
    EXPECT_DOUBLE_EQ(signed_power(-3.0, 2.0), -9.0);
}

TEST(Kernel, ParamsAreValidated) {
    try {
        OperatorParams::make(0.5, 0.5);
        FAIL() << "p = 0.5 accepted";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("p must exceed 1"), std::string::npos);
    }
    EXPECT_THROW(OperatorParams::make(1.0, 0.5), ConfigError);
    EXPECT_THROW(OperatorParams::make(2.0, 0.0), ConfigError);
    EXPECT_THROW(OperatorParams::make(2.0, 1.0), ConfigError);
    EXPECT_FALSE(OperatorParams::make(1.5, 0.9).pointwise_valid());
    EXPECT_TRUE(OperatorParams::make(1.5, 0.6).pointwise_valid());
}

TEST(Kernel, SeparatedCellsLogOfFourThirds) {
    // ps = 1: int_0^1 int_2^3 (y - x)^-2 = ln(4/3).
    const double w = cell_pair_weight(segment(0.0, 1.0), segment(2.0, 3.0), OperatorParams::make(2.0, 0.5), 1);
    EXPECT_NEAR(w, std::log(4.0 / 3.0), 1e-14);
}

TEST(Kernel, PairWeightsAgainstDifferenceIntegral) {
    for (double ps : {0.3, 0.5, 0.9, 1.0, 1.4, 2.1}) {
        const OperatorParams P = OperatorParams::make(ps < 1.0 ? 2.0 : 3.0, ps < 1.0 ? ps / 2.0 : ps / 3.0);
        for (double h : {1.0, 0.125}) {
            for (int k : {2, 3, 7, 40}) {
                const double w = cell_pair_weight(segment(0.0, h), segment(k * h, (k + 1) * h), P, 1);
                const double ref = pair_by_difference(h, k * h, ps, 0.0);
                EXPECT_NEAR(w / ref, 1.0, 1e-11) << "ps " << ps << " h " << h << " k " << k;
            }
            // Adjacent cells; ps >= 1 drops |x - y| <= h/2.
            const double w = cell_pair_weight(segment(0.0, h), segment(h, 2.0 * h), P, 1);
            const double ref = pair_by_difference(h, h, ps, ps >= 1.0 ? h / 2.0 : 0.0);
            EXPECT_NEAR(w / ref, 1.0, 1e-9) << "adjacent, ps " << ps << " h " << h;
        }
    }
}

TEST(Kernel, AdjacentClosedForm) {
    // int_0^1 int_1^2 (y - x)^{-1-ps} = (2^a - 2) / (a (a - 1)), a = 1 - ps.
    const double ps = 0.5;
    const double a = 1.0 - ps;
    const double w = cell_pair_weight(segment(0.0, 1.0), segment(1.0, 2.0), OperatorParams::make(2.0, 0.25), 1);
    EXPECT_NEAR(w, (std::pow(2.0, a) - 2.0) / (a * (a - 1.0)), 1e-13);
    const double h = 0.01;
    const double wh = cell_pair_weight(segment(0.0, h), segment(h, 2.0 * h), OperatorParams::make(2.0, 0.25), 1);
    EXPECT_NEAR(wh / w, std::pow(h, a), 1e-12);
}

TEST(Kernel, SquarePairAgainstTensorGauss) {
    const OperatorParams P = OperatorParams::make(2.0, 0.5);
    const double h = 0.1;
    const Cell a{Point{0.0, 0.0}, Point{h, h}};
    for (const Point& off : {Point{3 * h, 0.0}, Point{2 * h, 2 * h}, Point{5 * h, -h}}) {
        const Cell b{Point{off[0], off[1]}, Point{off[0] + h, off[1] + h}};
        using G = bq::gauss<double, 20>;
        const double ref = G::integrate(
            [&](double x1) {
                return G::integrate(
                    [&](double x2) {
                        return G::integrate(
                            [&](double y1) {
                                return G::integrate(
                                    [&](double y2) {
                                        const double r2 = (x1 - y1) * (x1 - y1) + (x2 - y2) * (x2 - y2);
                                        return std::pow(r2, -0.5 * (2.0 + P.ps()));
                                    },
                                    b.lo[1], b.hi[1]);
                            },
                            b.lo[0], b.hi[0]);
                    },
                    0.0, h);
            },
            0.0, h);
        const double w = cell_pair_weight(a, b, P, 2);
        EXPECT_NEAR(w / ref, 1.0, 5e-3) << off[0] << "," << off[1];
    }
}

TEST(Kernel, ExteriorWeightInterval) {
    const OperatorParams P = OperatorParams::make(2.0, 0.25);
    const DomainSpec I = DomainSpec::interval(-1.0, 1.0);
    EXPECT_NEAR(exterior_weight(Point{0.0, 0.0}, I, P), 4.0, 1e-14);
    const double x = 0.3;
    EXPECT_NEAR(exterior_weight(Point{x, 0.0}, I, P), (std::pow(1.0 - x, -0.5) + std::pow(1.0 + x, -0.5)) / 0.5,
                1e-13);
}

TEST(Kernel, ExteriorWeightDisc) {
    const OperatorParams P = OperatorParams::make(2.0, 0.5);
    const DomainSpec D = DomainSpec::disc(1.0);
    EXPECT_NEAR(exterior_weight(Point{0.0, 0.0}, D, P), 2.0 * M_PI, 1e-10);
    // Off center: int over directions of rho(phi)^{-ps} / ps, rho the distance to the circle.
    for (double r : {0.5, 0.9}) {
        auto g = [&](double phi) {
            const double c = r * std::cos(phi);
            const double rho = -c + std::sqrt(c * c + 1.0 - r * r);
            return std::pow(rho, -P.ps()) / P.ps();
        };
        const double ref = bq::trapezoidal(g, 0.0, 2.0 * M_PI, 1e-15, 30);
        EXPECT_NEAR(exterior_weight(Point{r, 0.0}, D, P) / ref, 1.0, 1e-9) << r;
    }
}

TEST(Kernel, ExactWeightsAddUpToTheWholeLine) {
    // With ps < 1: sum_j W_ij + E_i = int_cell int_{R \ cell} |x-y|^{-1-ps} = 2 h^a / (ps a).
    const OperatorParams P = OperatorParams::make(2.0, 0.3);
    const Grid g = build_grid(DomainSpec::interval(0.0, 1.0), 32);
    const KernelWeights w = assemble_weights(g, P, BoundaryTreatment::Exact);
    const double a = 1.0 - P.ps();
    const double expect = 2.0 * std::pow(g.h, a) / (P.ps() * a);
    for (std::size_t i = 0; i < w.n; ++i) {
        double row = w.exterior[i];
        for (std::size_t j = 0; j < w.n; ++j) {
            row += w.W(i, j);
        }
        EXPECT_NEAR(row / expect, 1.0, 1e-9) << i;
        EXPECT_EQ(w.W(i, i), 0.0);
    }
}

TEST(Kernel, WeightsAreSymmetricAndPositive) {
    for (const DomainSpec& d : {DomainSpec::interval(-1.0, 2.0), DomainSpec::disc(1.0)}) {
        const Grid g = build_grid(d, 12);
        const KernelWeights w = assemble_weights(g, OperatorParams::make(3.0, 0.4));
        for (std::size_t i = 0; i < w.n; ++i) {
            EXPECT_GT(w.exterior[i], 0.0);
            for (std::size_t j = 0; j < w.n; ++j) {
                EXPECT_EQ(w.W(i, j), w.W(j, i));
                if (i != j) {
                    EXPECT_GT(w.W(i, j), 0.0);
                }
            }
        }
    }
}

TEST(Kernel, TailClosedForms) {
    const OperatorParams P2 = OperatorParams::make(2.0, 0.5);
    EXPECT_NEAR(tail(fields::constant(1.0), Point{0.0, 0.0}, 1.0, P2), 2.0, 1e-10);
    EXPECT_NEAR(tail(fields::indicator(2.0, 3.0), Point{0.0, 0.0}, 1.0, P2), 1.0 / 6.0, 1e-12);
    const OperatorParams P3 = OperatorParams::make(3.0, 0.5);
    const double ref = std::sqrt((std::pow(2.0, -1.5) - std::pow(3.0, -1.5)) / 1.5);
    EXPECT_NEAR(tail(fields::indicator(2.0, 3.0), Point{0.0, 0.0}, 1.0, P3), ref, 1e-12);

    const Grid g = build_grid(DomainSpec::interval(-1.0, 1.0), 8);
    EXPECT_NEAR(tail(GridFunction(g.size(), 1.0), g, Point{0.0, 0.0}, 0.5, P2), 1.0, 1e-13);
    EXPECT_THROW(tail(fields::constant(1.0), Point{0.0, 0.0}, 0.0, P2), PreconditionError);
}

TEST(Kernel, PointwiseOperatorOfTheBallProfile) {
    // (1 - x^2)_+^s is mapped to 2 pi / sin(pi s) by 2 PV int (u(x) - u(y)) |x - y|^{-1-2s} dy.
    for (double s : {0.3, 0.5, 0.7}) {
        const OperatorParams P = OperatorParams::make(2.0, s);
        const double ref = 2.0 * M_PI / std::sin(M_PI * s);
        for (double x : {0.0, 0.3, -0.6}) {
            const PointwiseResult r = eval_pointwise(fields::ball_power(1.0, s), Point{x, 0.0}, P);
            EXPECT_NEAR(r.value, ref, std::max(1e-7 * ref, r.error_bar)) << "s " << s << " x " << x;
            EXPECT_LT(std::abs(r.value - ref), 1e-6 * ref);
        }
    }
}

TEST(Kernel, ConstantsAreAnnihilated) {
    const PointwiseResult r = eval_pointwise(fields::constant(3.0), Point{0.2, 0.0}, OperatorParams::make(2.5, 0.4));
    EXPECT_EQ(r.value, 0.0);
}

TEST(Kernel, PointwiseHomogeneityAndDilation) {
    const AnalyticField u = fields::bump(Point{0.0, 0.0}, 1.0);
    for (double p : {1.5, 2.0, 3.0}) {
        const OperatorParams P = OperatorParams::make(p, 0.4);
        const Point x{0.35, 0.0};
        const double base = eval_pointwise(u, x, P).value;
        const double twice = eval_pointwise(fields::scaled(u, 2.0), x, P).value;
        EXPECT_NEAR(twice, std::pow(2.0, p - 1.0) * base, 1e-13 * std::abs(twice));
        const double neg = eval_pointwise(fields::scaled(u, -1.0), x, P).value;
        EXPECT_NEAR(neg, -base, 1e-14 * std::abs(base));
        // u(./lam) at lam x equals lam^{-ps} times the operator of u at x.
        const double lam = 2.0;
        const double dil = eval_pointwise(fields::dilated(u, lam), Point{lam * x[0], 0.0}, P).value;
        EXPECT_NEAR(dil, std::pow(lam, -P.ps()) * base, 1e-9 * std::abs(base));
    }
}

TEST(Kernel, PointwiseErrors) {
    const AnalyticField b = fields::bump(Point{0.0, 0.0}, 1.0);
    EXPECT_THROW(eval_pointwise(b, Point{0.1, 0.0}, OperatorParams::make(1.5, 0.9)), SingularCaseError);
    EXPECT_THROW(eval_pointwise(fields::half_space_power(0.5), Point{0.0, 0.0}, OperatorParams::make(2.0, 0.5)),
                 PreconditionError);
    QuadratureOptions inf;
    inf.far_cutoff = std::numeric_limits<double>::infinity();
    EXPECT_THROW(eval_pointwise(fields::coordinate(), Point{0.1, 0.0}, OperatorParams::make(2.0, 0.5), inf),
                 DivergenceError);
}

TEST(Kernel, EpsilonSeries) {
    const PointwiseResult ok =
        eps_limit_series(fields::half_space_power(0.5), Point{0.5, 0.0}, OperatorParams::make(3.0, 0.5));
    EXPECT_TRUE(ok.series_converged);
    EXPECT_LT(ok.cauchy_tail, 1e-5);
    ASSERT_EQ(ok.series.size(), ok.eps.size());
    for (std::size_t k = 1; k < ok.eps.size(); ++k) {
        EXPECT_DOUBLE_EQ(ok.eps[k], ok.eps[k - 1] / 2.0);
    }
    const PointwiseResult bad =
        eps_limit_series(fields::bump(Point{0.0, 0.0}, 1.0), Point{0.0, 0.0}, OperatorParams::make(1.5, 0.9));
    EXPECT_FALSE(bad.series_converged);
}

TEST(Kernel, PerturbationIndicatorCase) {
    // u = (x)_+^{1/2}, v = 1 on [2,3], x = 0, p = 2: h = -2 int_2^3 y^-2 dy = -1/3.
    const PerturbationResult h = perturbation_rhs(fields::half_space_power(0.5), fields::indicator(2.0, 3.0),
                                                  Point{0.0, 0.0}, OperatorParams::make(2.0, 0.5),
                                                  DomainSpec::interval(-1.0, 1.0));
    EXPECT_NEAR(h.value, -1.0 / 3.0, 1e-12);
    EXPECT_THROW(perturbation_rhs(fields::half_space_power(0.5), fields::indicator(0.5, 3.0), Point{0.0, 0.0},
                                  OperatorParams::make(2.0, 0.5), DomainSpec::interval(-1.0, 1.0)),
                 PreconditionError);
}

TEST(Kernel, PerturbationMatchesOperatorDifference) {
    const OperatorParams P = OperatorParams::make(2.5, 0.4);
    const AnalyticField u = fields::half_space_power(0.4);
    const AnalyticField v = fields::bump(Point{2.0, 0.0}, 0.4, 1.5);
    QuadratureOptions o;
    o.far_cutoff = std::numeric_limits<double>::infinity();
    const Point x{0.5, 0.0};
    const PointwiseResult a = eval_pointwise(fields::sum(u, v), x, P, o);
    const PointwiseResult b = eval_pointwise(u, x, P, o);
    const PerturbationResult h = perturbation_rhs(u, v, x, P, DomainSpec::interval(0.0, 1.0));
    EXPECT_NEAR(a.value - b.value, h.value, a.error_bar + b.error_bar + h.error_bar + 1e-12);
}
