#include "fraclab/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fraclab/errors.hpp"
#include "fraclab/fields.hpp"

namespace fraclab {

namespace {

double sup_abs(const GridFunction& u) { return u.sup_norm(); }

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

// Measure of {r_in < |y - c| <= r_out} outside the domain.
double annulus_outside(const DomainSpec& domain, const Point& c, double r_in, double r_out) {
    if (domain.kind == DomainKind::Interval) {
        auto outside = [&](double lo, double hi) {
            const double inside = std::max(0.0, std::min(hi, domain.b) - std::max(lo, domain.a));
            return (hi - lo) - inside;
        };
        return outside(c[0] - r_out, c[0] - r_in) + outside(c[0] + r_in, c[0] + r_out);
    }
    constexpr int nr = 256;
    constexpr int nt = 512;
    double m = 0.0;
    for (int i = 0; i < nr; ++i) {
        const double r = r_in + (i + 0.5) * (r_out - r_in) / nr;
        for (int j = 0; j < nt; ++j) {
            const double th = (j + 0.5) * 2.0 * M_PI / nt;
            if (!domain.contains(Point{c[0] + r * std::cos(th), c[1] + r * std::sin(th)})) {
                m += r;
            }
        }
    }
    return m * (r_out - r_in) / nr * 2.0 * M_PI / nt;
}

void check_grid(const GridFunction& u, const Grid& grid, const char* what) {
    if (u.size() != grid.size()) {
        std::ostringstream os;
        os << what << ": grid function does not match the grid";
        throw GeometryError(os.str());
    }
}

}  // namespace

ComparisonReport comparison_check(const GridFunction& f1, const GridFunction& f2, const KernelWeights& w,
                                  const SolveOptions& opts) {
    if (f1.size() != w.n || f2.size() != w.n) {
        throw GeometryError("comparison_check: data do not match the weights");
    }
    for (std::size_t i = 0; i < w.n; ++i) {
        if (f1[i] > f2[i]) {
            throw PreconditionError("comparison_check: needs f1 <= f2 at every node");
        }
    }
    ComparisonReport rep;
    rep.lower = solve(w, f1, opts);
    rep.upper = solve(w, f2, opts);
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.n; ++i) {
        rep.max_violation = std::max(rep.max_violation, rep.lower.u[i] - rep.upper.u[i]);
    }
    rep.threshold = 10.0 * opts.tolerance * std::max({sup_abs(rep.lower.u), sup_abs(rep.upper.u), 1.0});
    rep.passed = rep.lower.report.converged && rep.upper.report.converged && rep.max_violation <= rep.threshold;
    return rep;
}

AprioriReport apriori_check(const KernelWeights& w, const std::vector<double>& K_list, const SolveOptions& opts) {
    if (K_list.size() < 3) {
        throw PreconditionError("apriori_check: needs at least 3 values of K");
    }
    const auto [kmin, kmax] = std::minmax_element(K_list.begin(), K_list.end());
    if (!(*kmin > 0.0) || *kmax / *kmin < 100.0 * (1.0 - 1e-12)) {
        throw PreconditionError("apriori_check: K values must be positive and span at least two decades");
    }
    const double q = w.params.pm1();
    AprioriReport rep;
    rep.K = K_list;
    std::vector<double> lx;
    std::vector<double> ly;
    std::vector<double> ratio;
    for (double K : K_list) {
        const Solution sol = solve(w, GridFunction(w.n, K), opts);
        if (!sol.report.converged) {
            std::ostringstream os;
            os << "apriori_check: solver failed for K = " << K << " (" << sol.report.message << ")";
            throw ConvergenceError(os.str());
        }
        const double m = sup_abs(sol.u);
        rep.sup_norm.push_back(m);
        lx.push_back(std::log(K));
        ly.push_back(std::log(m));
        ratio.push_back(std::pow(m, q) / K);
    }
    rep.slope = least_squares(lx, ly).slope;
    const auto [rmin, rmax] = std::minmax_element(ratio.begin(), ratio.end());
    rep.C_d = *rmax;
    rep.C_d_spread = (*rmax - *rmin) / *rmax;
    return rep;
}

AprioriReport apriori_check(const DomainSpec& domain, const OperatorParams& params, const std::vector<double>& K_list,
                            int n, const SolveOptions& opts) {
    const KernelWeights w = assemble_weights(build_grid(domain, n), params);
    return apriori_check(w, K_list, opts);
}

BoundaryReport boundary_ratio(const GridFunction& u, const Grid& grid, const OperatorParams& params, double rho) {
    check_grid(u, grid, "boundary_ratio");
    BoundaryReport rep;
    rep.rho = rho > 0.0 ? rho : grid.domain.diameter() / 8.0;
    const GridFunction delta = distance_to_complement(grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double ratio = std::abs(u[i]) / std::pow(delta[i], params.s);
        if (ratio > rep.sup_ratio) {
            rep.sup_ratio = ratio;
            rep.argsup = i;
        }
        if (delta[i] < rep.rho) {
            rep.profile.emplace_back(delta[i], ratio);
        }
    }
    std::sort(rep.profile.begin(), rep.profile.end());
    return rep;
}

std::vector<OscillationRow> oscillation_decay(const GridFunction& u, const Grid& grid, const Point& center,
                                              const std::vector<double>& radii) {
    check_grid(u, grid, "oscillation_decay");
    const int dim = grid.dim();
    const double reach = grid.domain.signed_distance(center);
    std::vector<OscillationRow> rows;
    for (double r : radii) {
        const double rr = r * (1.0 + 1e-12);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        std::size_t count = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (distance(grid.nodes[i], center, dim) <= rr) {
                lo = std::min(lo, u[i]);
                hi = std::max(hi, u[i]);
                ++count;
            }
        }
        if (count < 3) {
            std::ostringstream os;
            os << "oscillation_decay: radius " << r << " is too small, the ball holds " << count << " nodes";
            throw PreconditionError(os.str());
        }
        if (r > reach) {
            lo = std::min(lo, 0.0);
            hi = std::max(hi, 0.0);
        }
        rows.push_back(OscillationRow{r, hi - lo, count});
    }
    return rows;
}

std::vector<double> dyadic_radii(double r_min, double r_max) {
    if (!(r_min > 0.0) || !(r_max >= r_min)) {
        throw PreconditionError("dyadic_radii: needs 0 < r_min <= r_max");
    }
    std::vector<double> r;
    for (double v = r_max; v >= r_min * (1.0 - 1e-12); v *= 0.5) {
        r.push_back(v);
    }
    return r;
}

HolderReport holder_fit(const GridFunction& u, const Grid& grid, const OperatorParams& params,
                        const std::vector<Point>& centers, const std::vector<double>& radii, double K) {
    check_grid(u, grid, "holder_fit");
    if (centers.empty() || radii.size() < 2) {
        throw PreconditionError("holder_fit: needs a center and at least two radii");
    }
    HolderReport rep;
    rep.r_min = *std::min_element(radii.begin(), radii.end());
    rep.r_max = *std::max_element(radii.begin(), radii.end());
    rep.constant = true;
    for (const Point& c : centers) {
        HolderFit fit;
        fit.center = c;
        fit.delta = grid.domain.signed_distance(c);
        fit.table = oscillation_decay(u, grid, c, radii);
        std::vector<double> lx;
        std::vector<double> ly;
        for (const OscillationRow& row : fit.table) {
            if (row.oscillation > 0.0) {
                lx.push_back(std::log(row.radius));
                ly.push_back(std::log(row.oscillation));
            }
        }
        if (lx.size() < 2) {
            fit.constant = true;
            fit.alpha = std::numeric_limits<double>::infinity();
        } else {
            const LineFit lf = least_squares(lx, ly);
            fit.alpha = lf.slope;
            fit.lambda = std::exp(lf.intercept);
            fit.r_squared = lf.r_squared;
            rep.constant = false;
        }
        rep.fits.push_back(std::move(fit));
    }
    if (rep.constant) {
        return rep;
    }
    std::size_t worst = rep.fits.size();
    for (std::size_t i = 0; i < rep.fits.size(); ++i) {
        const HolderFit& f = rep.fits[i];
        if (f.constant) {
            continue;
        }
        if (worst == rep.fits.size() || f.alpha < rep.fits[worst].alpha - 1e-3 ||
            (std::abs(f.alpha - rep.fits[worst].alpha) <= 1e-3 && f.delta < rep.fits[worst].delta)) {
            worst = i;
        }
    }
    rep.worst = worst;
    rep.alpha = rep.fits[worst].alpha;
    const HolderFit& wf = rep.fits[worst];
    const double R = rep.r_max;
    const double q = params.pm1();
    const double bracket = std::pow(K * std::pow(R, params.ps()), 1.0 / q) + sup_abs(u) +
                           tail(u, grid, wf.center, R, params);
    rep.C = bracket > 0.0 ? wf.lambda * std::pow(R, wf.alpha) / bracket : 0.0;
    return rep;
}

HolderReport boundary_holder_fit(const GridFunction& u, const Grid& grid, const OperatorParams& params, double r_max,
                                 double K) {
    check_grid(u, grid, "boundary_holder_fit");
    std::vector<Point> targets;
    if (grid.domain.kind == DomainKind::Interval) {
        targets = {Point{grid.domain.a, 0.0}, Point{grid.domain.b, 0.0}};
    } else {
        for (int k = 0; k < 8; ++k) {
            const double th = k * M_PI / 4.0;
            targets.push_back(Point{grid.domain.radius * std::cos(th), grid.domain.radius * std::sin(th)});
        }
    }
    std::vector<Point> centers;
    for (const Point& t : targets) {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double d = distance(grid.nodes[i], t, grid.dim());
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        centers.push_back(grid.nodes[best]);
    }
    return holder_fit(u, grid, params, centers, dyadic_radii(4.0 * grid.h, r_max), K);
}

HarnackReport harnack_check(const GridFunction& u, const Grid& grid, const OperatorParams& params, double K,
                            const Point& center, double R, const HarnackConstants& constants) {
    check_grid(u, grid, "harnack_check");
    if (!(R > 0.0) || K < 0.0) {
        throw PreconditionError("harnack_check: needs R > 0 and K >= 0");
    }
    const int dim = grid.dim();
    const double q = params.pm1();
    HarnackReport rep;
    rep.inf_inner = std::numeric_limits<double>::infinity();
    double mass = 0.0;
    double measure = 0.0;
    const double scale = std::max(sup_abs(u), std::numeric_limits<double>::min());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = distance(grid.nodes[i], center, dim);
        if (r > R) {
            continue;
        }
        if (u[i] < -1e-14 * scale) {
            throw PreconditionError("harnack_check: u is negative inside B_R");
        }
        const double v = std::max(u[i], 0.0);
        rep.sup_ball = std::max(rep.sup_ball, v);
        if (r <= R / 4.0) {
            rep.inf_inner = std::min(rep.inf_inner, v);
            ++rep.inner_nodes;
        }
        if (r > R / 2.0) {
            mass += std::pow(v, q) * grid.volumes[i];
            measure += grid.volumes[i];
            ++rep.annulus_nodes;
        }
    }
    if (rep.inner_nodes == 0) {
        throw PreconditionError("harnack_check: B_{R/4} holds no nodes");
    }
    measure += annulus_outside(grid.domain, center, R / 2.0, R);
    if (!(measure > 0.0) || !(mass > 0.0)) {
        throw PreconditionError("harnack_check: the annulus average vanishes");
    }
    rep.annulus_average = std::pow(mass / measure, 1.0 / q);
    rep.penalty = std::pow(K * std::pow(R, params.ps()), 1.0 / q);
    GridFunction negative(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        negative[i] = std::max(-u[i], 0.0);
    }
    rep.negative_tail = tail(negative, grid, center, R, params);
    rep.sigma = (rep.inf_inner + constants.C * rep.penalty + constants.eps * rep.sup_ball +
                 constants.C_eps * rep.negative_tail) /
                rep.annulus_average;
    return rep;
}

DeltaSReport delta_s_rhs_check(const DomainSpec& domain, const OperatorParams& params, double rho,
                               const std::vector<Point>& probes, const QuadratureOptions& opts) {
    if (probes.empty()) {
        throw PreconditionError("delta_s_rhs_check: no probe points");
    }
    const AnalyticField field = fields::distance_power(domain, params.s);
    DeltaSReport rep;
    rep.probes = probes;
    const QuadratureOptions deeper = opts.refined();
    for (const Point& x : probes) {
        const double d = domain.signed_distance(x);
        if (!(d > 0.0) || !(d < rho)) {
            throw PreconditionError("delta_s_rhs_check: probe points must lie in the collar 0 < delta < rho");
        }
        rep.delta.push_back(d);
        rep.values.push_back(eval_pointwise(field, x, params, opts));
        rep.refined.push_back(eval_pointwise(field, x, params, deeper));
        rep.sup = std::max(rep.sup, std::abs(rep.values.back().value));
        rep.sup_refined = std::max(rep.sup_refined, std::abs(rep.refined.back().value));
    }
    const double ref = std::max(rep.sup, std::numeric_limits<double>::min());
    rep.drift = std::abs(rep.sup_refined - rep.sup) / ref;
    rep.passed = std::isfinite(rep.sup) && std::isfinite(rep.sup_refined) && rep.drift < 0.2;
    return rep;
}

}  // namespace fraclab
