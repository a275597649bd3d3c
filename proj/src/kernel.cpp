#include "fraclab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fraclab/errors.hpp"
#include "quadrature.hpp"

namespace fraclab {

namespace {

constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon() / 2.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double norm(const Point& x, int dim) {
    return dim == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
}

// Second antiderivative of t^{-1-ps}, normalized to vanish at t = 1.
struct Potential {
    double alpha;  // 1 - ps

    explicit Potential(double ps) : alpha(1.0 - ps) {}

    double G(double t) const {
        if (t == 0.0) {
            return alpha > 0.0 ? -1.0 / (alpha * (alpha - 1.0)) : kInf;
        }
        if (alpha == 0.0) {
            return -std::log(t);
        }
        return std::expm1(alpha * std::log(t)) / (alpha * (alpha - 1.0));
    }

    double dG(double t) const { return std::pow(t, alpha - 1.0) / (alpha - 1.0); }

    // G(k+1) - 2G(k) + G(k-1) for real k > 1, free of cancellation for large k.
    double second_difference(double k) const {
        const double up = std::log1p(1.0 / k);
        const double dn = std::log1p(-1.0 / k);
        if (std::abs(alpha) < 1e-6) {
            const double lin = std::log1p(-1.0 / (k * k));
            return std::pow(k, alpha) / (alpha - 1.0) * (lin + 0.5 * alpha * (up * up + dn * dn));
        }
        return std::pow(k, alpha) * (std::expm1(alpha * up) + std::expm1(alpha * dn)) /
               (alpha * (alpha - 1.0));
    }

    // Two adjacent unit cells; for ps >= 1 the strip |x - y| <= 1/2 is left out.
    double adjacent() const {
        if (alpha > 0.0) {
            return (std::exp2(alpha) - 2.0) / (alpha * (alpha - 1.0));
        }
        return G(2.0) - 2.0 * G(1.0) + G(0.5) - 0.5 * dG(0.5);
    }

    // Unit cell at gap m from a half-line of the complement.
    double exterior_side(double m) const {
        if (m == 0.0) {
            return G(1.0) - G(2.0) + adjacent();
        }
        return G(m) - G(m + 1.0);
    }
};

double pair_weight_1d(const Cell& first, const Cell& second, const OperatorParams& params) {
    const Cell& a = first.lo[0] <= second.lo[0] ? first : second;
    const Cell& b = first.lo[0] <= second.lo[0] ? second : first;
    const double la = a.hi[0] - a.lo[0];
    const double lb = b.hi[0] - b.lo[0];
    if (!(la > 0.0) || !(lb > 0.0)) {
        throw GeometryError("cell_pair_weight: degenerate cell");
    }
    const double tol = 1e-12 * std::max(la, lb);
    if (std::abs(a.lo[0] - b.lo[0]) <= tol && std::abs(la - lb) <= tol) {
        return 0.0;
    }
    const double gap = b.lo[0] - a.hi[0];
    if (gap < -tol) {
        throw GeometryError("cell_pair_weight: overlapping cells");
    }
    const Potential pot(params.ps());
    const bool equal = std::abs(la - lb) <= tol;
    if (gap <= tol) {
        if (equal) {
            return std::pow(la, pot.alpha) * pot.adjacent();
        }
        const double outer = pot.G(la + lb);
        if (pot.alpha > 0.0) {
            return outer - pot.G(la) - pot.G(lb) + pot.G(0.0);
        }
        const double c = 0.5 * std::min(la, lb);
        return outer - pot.G(la) - pot.G(lb) + pot.G(c) - c * pot.dG(c);
    }
    if (equal) {
        const double k = (gap + la) / la;
        return std::pow(la, pot.alpha) * pot.second_difference(k);
    }
    return pot.G(b.hi[0] - a.lo[0]) - pot.G(b.lo[0] - a.lo[0]) - pot.G(b.hi[0] - a.hi[0]) +
           pot.G(gap);
}

struct Rule {
    std::vector<double> x;  // nodes on [0, 1]
    std::vector<double> w;
};

template <std::size_t N>
Rule make_rule() {
    using g = boost::math::quadrature::gauss<double, N>;
    Rule r;
    const auto& ab = g::abscissa();
    const auto& wt = g::weights();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        if (ab[i] == 0.0) {
            r.x.push_back(0.5);
            r.w.push_back(0.5 * wt[i]);
            continue;
        }
        r.x.push_back(0.5 - 0.5 * ab[i]);
        r.w.push_back(0.5 * wt[i]);
        r.x.push_back(0.5 + 0.5 * ab[i]);
        r.w.push_back(0.5 * wt[i]);
    }
    return r;
}

const Rule& rule(int order) {
    static const Rule r2 = make_rule<2>();
    static const Rule r4 = make_rule<4>();
    return order == 2 ? r2 : r4;
}

struct CellPoints {
    std::vector<Point> pts;
    std::vector<double> w;
};

CellPoints cell_points(const Cell& c, int order, const DomainSpec* clip) {
    const Rule& r = rule(order);
    const double dx = c.hi[0] - c.lo[0];
    const double dy = c.hi[1] - c.lo[1];
    CellPoints out;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        for (std::size_t j = 0; j < r.x.size(); ++j) {
            const Point y{c.lo[0] + dx * r.x[i], c.lo[1] + dy * r.x[j]};
            if (clip && !clip->contains(y)) {
                continue;
            }
            out.pts.push_back(y);
            out.w.push_back(dx * dy * r.w[i] * r.w[j]);
        }
    }
    return out;
}

double box_gap(const Cell& a, const Cell& b) {
    const double dx = std::max({0.0, a.lo[0] - b.hi[0], b.lo[0] - a.hi[0]});
    const double dy = std::max({0.0, a.lo[1] - b.hi[1], b.lo[1] - a.hi[1]});
    return std::hypot(dx, dy);
}

double gauss_pair(const Cell& a, const Cell& b, int order, double exponent, double excluded,
                  const DomainSpec* clip) {
    const CellPoints pa = cell_points(a, order, clip);
    const CellPoints pb = cell_points(b, order, clip);
    detail::CompensatedSum acc;
    for (std::size_t i = 0; i < pa.pts.size(); ++i) {
        for (std::size_t j = 0; j < pb.pts.size(); ++j) {
            const double r = std::hypot(pa.pts[i][0] - pb.pts[j][0], pa.pts[i][1] - pb.pts[j][1]);
            if (r <= excluded) {
                continue;
            }
            acc.add(pa.w[i] * pb.w[j] * std::pow(r, -exponent));
        }
    }
    return acc.value();
}

Cell subcell(const Cell& c, int m, int i, int j) {
    const double dx = (c.hi[0] - c.lo[0]) / m;
    const double dy = (c.hi[1] - c.lo[1]) / m;
    return Cell{{c.lo[0] + i * dx, c.lo[1] + j * dy}, {c.lo[0] + (i + 1) * dx, c.lo[1] + (j + 1) * dy}};
}

double pair_weight_2d(const Cell& a, const Cell& b, const OperatorParams& params, const DomainSpec* clip) {
    const double h = std::max({a.hi[0] - a.lo[0], a.hi[1] - a.lo[1], b.hi[0] - b.lo[0], b.hi[1] - b.lo[1]});
    if (!(h > 0.0)) {
        throw GeometryError("cell_pair_weight: degenerate cell");
    }
    const double tol = 1e-12 * h;
    const double ox = std::min(a.hi[0], b.hi[0]) - std::max(a.lo[0], b.lo[0]);
    const double oy = std::min(a.hi[1], b.hi[1]) - std::max(a.lo[1], b.lo[1]);
    if (ox > tol && oy > tol) {
        const bool same = std::abs(a.lo[0] - b.lo[0]) <= tol && std::abs(a.lo[1] - b.lo[1]) <= tol &&
                          std::abs(a.hi[0] - b.hi[0]) <= tol && std::abs(a.hi[1] - b.hi[1]) <= tol;
        if (same) {
            return 0.0;
        }
        throw GeometryError("cell_pair_weight: overlapping cells");
    }
    const double exponent = 2.0 + params.ps();
    const double excluded = params.ps() >= 1.0 ? 0.5 * h : 0.0;
    const double gap = box_gap(a, b);
    if (gap >= 2.0 * h) {
        return gauss_pair(a, b, 2, exponent, excluded, clip);
    }
    if (gap > tol) {
        return gauss_pair(a, b, 4, exponent, excluded, clip);
    }
    constexpr int m = 4;
    const double hs = h / m;
    detail::CompensatedSum acc;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const Cell sa = subcell(a, m, i, j);
            for (int k = 0; k < m; ++k) {
                for (int l = 0; l < m; ++l) {
                    const Cell sb = subcell(b, m, k, l);
                    const double g = box_gap(sa, sb);
                    const int order = g >= 2.0 * hs ? 2 : 4;
                    acc.add(gauss_pair(sa, sb, order, exponent, excluded, clip));
                }
            }
        }
    }
    return acc.value();
}

}  // namespace

OperatorParams OperatorParams::make(double p, double s) {
    if (!std::isfinite(p) || !(p > 1.0)) {
        std::ostringstream os;
        os << "p must exceed 1 (got " << p << ")";
        throw ConfigError(os.str());
    }
    if (!std::isfinite(s) || !(s > 0.0) || !(s < 1.0)) {
        std::ostringstream os;
        os << "s must lie in (0, 1) (got " << s << ")";
        throw ConfigError(os.str());
    }
    return OperatorParams{p, s};
}

std::vector<double> EpsilonSchedule::values() const {
    if (!(eps0 > 0.0) || !std::isfinite(eps0) || levels < 1) {
        throw PreconditionError("epsilon schedule needs eps0 > 0 and at least one level");
    }
    std::vector<double> e(static_cast<std::size_t>(levels) + 1);
    for (int k = 0; k <= levels; ++k) {
        e[k] = std::ldexp(eps0, -k);
    }
    return e;
}

QuadratureOptions QuadratureOptions::refined() const {
    QuadratureOptions o = *this;
    o.break_levels += 4;
    o.panel_split *= 2;
    o.angular_panels *= 2;
    return o;
}

namespace detail {

std::vector<Direction> half_circle_directions(int dim, int panels) {
    if (dim == 1) {
        return {Direction{Point{1.0, 0.0}, 1.0}};
    }
    using g8 = boost::math::quadrature::gauss<double, 8>;
    const auto& ab = g8::abscissa();
    const auto& wt = g8::weights();
    std::vector<Direction> dirs;
    const double width = M_PI / panels;
    for (int k = 0; k < panels; ++k) {
        const double mid = (k + 0.5) * width;
        for (std::size_t i = 0; i < ab.size(); ++i) {
            for (double sgn : {-1.0, 1.0}) {
                const double th = mid + sgn * 0.5 * width * ab[i];
                dirs.push_back(Direction{Point{std::cos(th), std::sin(th)}, 0.5 * width * wt[i]});
            }
        }
    }
    return dirs;
}

}  // namespace detail

double cell_pair_weight(const Cell& a, const Cell& b, const OperatorParams& params, int dim) {
    if (dim == 1) {
        return pair_weight_1d(a, b, params);
    }
    if (dim == 2) {
        return pair_weight_2d(a, b, params, nullptr);
    }
    throw PreconditionError("cell_pair_weight: dimension must be 1 or 2");
}

double cell_pair_weight(const Cell& a, const Cell& b, const OperatorParams& params, const DomainSpec& domain) {
    if (domain.dim() == 1) {
        return pair_weight_1d(a, b, params);
    }
    return pair_weight_2d(a, b, params, &domain);
}

double exterior_weight(const Point& x, const DomainSpec& domain, const OperatorParams& params) {
    const double ps = params.ps();
    const double delta = domain.signed_distance(x);
    if (!(delta > 0.0)) {
        throw GeometryError("exterior_weight: point is not interior to the domain");
    }
    if (domain.kind == DomainKind::Interval) {
        return (std::pow(x[0] - domain.a, -ps) + std::pow(domain.b - x[0], -ps)) / ps;
    }
    const double R = domain.radius;
    const double r = std::hypot(x[0], x[1]);
    if (r == 0.0) {
        return 2.0 * M_PI * std::pow(R, -ps) / ps;
    }
    // Angle phi measured from the direction of x; rho is the exit distance of the ray.
    auto g = [&](double phi) {
        const double c = std::cos(phi);
        const double sn = std::sin(phi);
        const double rho = -r * c + std::sqrt(R * R - r * r * sn * sn);
        return std::pow(rho, -ps);
    };
    QuadratureOptions o;
    o.break_levels = 40;
    o.panel_split = 2;
    const detail::PanelTotals acc = detail::integrate_segment(g, 0.0, M_PI, {}, o, true);
    return 2.0 * acc.value / ps;
}

std::vector<double> half_line_calibration(const OperatorParams& params, std::size_t count) {
    static std::mutex mu;
    static std::map<std::tuple<double, double, std::size_t>, std::vector<double>> cache;
    const auto key = std::make_tuple(params.p, params.s, count);
    {
        std::lock_guard<std::mutex> lock(mu);
        if (auto it = cache.find(key); it != cache.end()) {
            return it->second;
        }
    }
    const double s = params.s;
    const double q = params.pm1();
    const double ps = params.ps();
    const Potential pot(ps);
    const std::size_t M = std::max<std::size_t>(32 * count, 16384);

    std::vector<double> w(M + count + 1, 0.0);
    w[1] = pot.adjacent();
    for (std::size_t k = 2; k < w.size(); ++k) {
        w[k] = pot.second_difference(static_cast<double>(k));
    }
    std::vector<double> u(M);
    for (std::size_t j = 0; j < M; ++j) {
        u[j] = std::pow(j + 0.5, s);
    }

    QuadratureOptions o;
    std::vector<double> delta(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double uk = u[k];
        const double xk = k + 0.5;
        detail::CompensatedSum acc;
        for (std::size_t jj = M; jj-- > 0;) {
            if (jj == k) {
                continue;
            }
            const std::size_t d = jj > k ? jj - k : k - jj;
            acc.add(w[d] * signed_power(uk - u[jj], q));
        }
        // Cells beyond M: continuum integral against the point kernel.
        auto g = [&](double y) { return signed_power(uk - std::pow(y, s), q) * std::pow(y - xk, -1.0 - ps); };
        double a = static_cast<double>(M);
        while (a < 1e300) {
            const detail::PanelTotals seg = detail::integrate_segment(g, a, 2.0 * a, {}, o);
            acc.add(seg.value);
            a *= 2.0;
            const double rest = 2.0 * std::pow(a - xk, s * q - ps) / (ps - s * q);
            if (rest <= 1e-18 * std::abs(acc.value()) + 1e-300) {
                break;
            }
        }
        const double side = pot.exterior_side(static_cast<double>(k));
        acc.add(side * signed_power(uk, q));
        delta[k] = -acc.value() / signed_power(uk, q);
        if (!std::isfinite(delta[k]) || side + delta[k] < 0.0) {
            throw NumericalError("half-line calibration produced a negative exterior weight");
        }
    }
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key, delta);
    return delta;
}

KernelWeights assemble_weights(const Grid& grid, const OperatorParams& params, BoundaryTreatment treatment) {
    KernelWeights kw;
    kw.grid = grid;
    kw.params = params;
    kw.treatment = treatment;
    kw.n = grid.size();
    const std::size_t n = kw.n;
    if (n == 0) {
        throw GeometryError("assemble_weights: empty grid");
    }
    kw.pair.assign(n * n, 0.0);
    kw.exterior.assign(n, 0.0);

    if (grid.dim() == 1) {
        const Potential pot(params.ps());
        const double scale = std::pow(grid.h, pot.alpha);
        std::vector<double> w(n, 0.0);
        if (n > 1) {
            w[1] = scale * pot.adjacent();
        }
        for (std::size_t k = 2; k < n; ++k) {
            w[k] = scale * pot.second_difference(static_cast<double>(k));
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                kw.pair[i * n + j] = w[i > j ? i - j : j - i];
            }
        }
        std::vector<double> side(n);
        for (std::size_t m = 0; m < n; ++m) {
            side[m] = pot.exterior_side(static_cast<double>(m));
        }
        if (treatment == BoundaryTreatment::HalfSpaceCalibrated) {
            const std::vector<double> corr = half_line_calibration(params, n);
            for (std::size_t m = 0; m < n; ++m) {
                side[m] += corr[m];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            kw.exterior[i] = scale * (side[i] + side[n - 1 - i]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = cell_pair_weight(grid.cells[i], grid.cells[j], params, grid.domain);
                kw.pair[i * n + j] = v;
                kw.pair[j * n + i] = v;
            }
            kw.exterior[i] = grid.volumes[i] * exterior_weight(grid.nodes[i], grid.domain, params);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(kw.exterior[i]) || kw.exterior[i] < 0.0) {
            throw NumericalError("assemble_weights: invalid exterior weight");
        }
    }
    return kw;
}

namespace {

struct Ray {
    Point e{};
    double weight = 0.0;
    std::vector<double> breaks;  // union of break distances along +e and -e
};

std::vector<Ray> make_rays(const AnalyticField& field, const Point& x, const QuadratureOptions& o,
                           bool reject_on_break) {
    std::vector<Ray> rays;
    for (const detail::Direction& d : detail::half_circle_directions(field.dim, o.angular_panels)) {
        Ray r{d.e, d.weight, {}};
        for (double sgn : {1.0, -1.0}) {
            const Point dir{sgn * d.e[0], sgn * d.e[1]};
            if (field.ray_breaks) {
                for (double t : field.ray_breaks(x, dir)) {
                    if (reject_on_break && std::abs(t) <= 1e-12 * std::max(1.0, norm(x, field.dim))) {
                        throw PreconditionError("x is not a smoothness point of field '" + field.name + "'");
                    }
                    if (t > 0.0 && std::isfinite(t)) {
                        r.breaks.push_back(t);
                    }
                }
            }
        }
        std::sort(r.breaks.begin(), r.breaks.end());
        r.breaks.erase(std::unique(r.breaks.begin(), r.breaks.end()), r.breaks.end());
        rays.push_back(std::move(r));
    }
    return rays;
}

double direction_measure(int dim) { return dim == 1 ? 1.0 : M_PI; }

void check_field(const AnalyticField& field) {
    if (field.dim != 1 && field.dim != 2) {
        throw PreconditionError("field dimension must be 1 or 2");
    }
    if (!field.value) {
        throw PreconditionError("field has no evaluator");
    }
}

void check_growth(const AnalyticField& field, const OperatorParams& params, const char* what) {
    if (field.support_radius) {
        return;
    }
    if (field.growth_exponent * params.pm1() >= params.ps()) {
        std::ostringstream os;
        os << what << ": field '" << field.name << "' grows like |x|^" << field.growth_exponent
           << " and the integral diverges (needs growth * (p-1) < ps)";
        throw DivergenceError(os.str());
    }
}

// Bound on 2 * int_{|t| > T} |u(x) - u(x + t e)|^{p-1} |t|^{-1-ps} summed over the direction set.
double far_bound(const AnalyticField& f, const Point& x, double fx, double T, const OperatorParams& params,
                 bool include_center) {
    const double q = params.pm1();
    const double ps = params.ps();
    const double gq = f.growth_exponent * q;
    const double kappa = 1.0 + (1.0 + norm(x, f.dim)) / T;
    const double c = std::pow(2.0, std::max(q - 1.0, 0.0));
    double b = std::pow(f.growth_constant, q) * std::pow(kappa, gq) * std::pow(T, gq - ps) / (ps - gq);
    if (include_center) {
        b = c * (b + std::pow(std::abs(fx), q) * std::pow(T, -ps) / ps);
    }
    return 2.0 * 2.0 * direction_measure(f.dim) * b;
}

struct SeriesOutcome {
    PointwiseResult result;
    std::vector<double> shells;
    std::string diagnostics;
};

double aitken(double a, double b, double c) {
    const double d1 = b - a;
    const double d2 = c - b;
    const double den = d2 - d1;
    return den == 0.0 ? c : c - d2 * d2 / den;
}

// Aitken applied twice to the partial sums ending at index end - 1 (needs five of them).
double twice_accelerated(const std::vector<double>& sums, std::size_t end) {
    double once[3];
    for (std::size_t j = 0; j < 3; ++j) {
        const std::size_t c = end - 3 + j;
        once[j] = aitken(sums[c - 2], sums[c - 1], sums[c]);
    }
    return aitken(once[0], once[1], once[2]);
}

// balanced: stop once the extrapolated remainder is known better than the accumulated rounding noise.
SeriesOutcome pv_series(const AnalyticField& field, const Point& x, const OperatorParams& params,
                        const QuadratureOptions& o, bool balanced) {
    check_field(field);
    check_growth(field, params, "principal value");
    const int dim = field.dim;
    const double q = params.pm1();
    const double ps = params.ps();
    const double fx = field(x);
    if (!std::isfinite(fx)) {
        throw NumericalError("field value at x is not finite");
    }
    const std::vector<double> eps = o.schedule.values();
    const std::vector<Ray> rays = make_rays(field, x, o, true);
    const double wsum = direction_measure(dim);

    detail::PanelTotals quad;
    double fscale = std::abs(fx);
    double dmax = 0.0;
    double dmin = kInf;
    auto ray_integrand = [&](const Ray& r) {
        return [&, e = r.e](double t) {
            const double fp = field(Point{x[0] + t * e[0], x[1] + t * e[1]});
            const double fm = field(Point{x[0] - t * e[0], x[1] - t * e[1]});
            const double dp = fx - fp;
            const double dm = fx - fm;
            fscale = std::max({fscale, std::abs(fp), std::abs(fm)});
            dmax = std::max({dmax, std::abs(dp), std::abs(dm)});
            dmin = std::min({dmin, std::abs(dp), std::abs(dm)});
            return (signed_power(dp, q) + signed_power(dm, q)) * std::pow(t, -1.0 - ps);
        };
    };

    // Far region [eps0, T_end].
    const double eps0 = eps.front();
    const bool compact = field.support_radius.has_value();
    const double t_support = compact ? std::max(eps0, norm(x, dim) + *field.support_radius) : kInf;
    const double t_end = std::min(o.far_cutoff, t_support);
    double exact_remainder = 0.0;
    double bound = 0.0;
    double far_value = 0.0;
    {
        detail::PanelTotals far;
        for (const Ray& r : rays) {
            auto g = ray_integrand(r);
            detail::PanelTotals ray_acc;
            double a = eps0;
            while (a < t_end) {
                const double b = std::min(2.0 * a, t_end);
                ray_acc.merge(detail::integrate_segment(g, a, b, r.breaks, o));
                a = b;
                if (!std::isfinite(t_end) && a > 1e300) {
                    break;
                }
                if (!std::isfinite(t_end) &&
                    far_bound(field, x, fx, a, params, true) <= 1e-17 * std::max(1.0, ray_acc.magnitude)) {
                    break;
                }
            }
            far.merge(ray_acc, r.weight);
        }
        far_value = 2.0 * far.value;
        quad.error += 2.0 * far.error;
        quad.magnitude += 2.0 * far.magnitude;
        if (compact && t_end >= t_support) {
            exact_remainder = 2.0 * wsum * 2.0 * signed_power(fx, q) * std::pow(t_support, -ps) / ps;
        } else if (std::isfinite(t_end)) {
            bound = far_bound(field, x, fx, t_end, params, true);
        }
    }

    // Shells [eps_{k+1}, eps_k], stopped where rounding noise takes over.
    const double unit_shell = (std::exp2(ps) - 1.0) / ps;
    constexpr int kMinLevels = 12;
    constexpr int kMinAccelerated = 8;
    std::vector<double> series{far_value + exact_remainder};
    std::vector<double> shells;
    std::vector<double> used_eps{eps0};
    double noise_total = 0.0;
    bool accelerated = false;
    double accelerated_value = 0.0;
    double accelerated_err = 0.0;
    const int levels = static_cast<int>(eps.size()) - 1;
    for (int k = 0; k < levels; ++k) {
        fscale = std::abs(fx);
        dmax = 0.0;
        dmin = kInf;
        detail::PanelTotals shell;
        for (const Ray& r : rays) {
            auto g = ray_integrand(r);
            shell.merge(detail::integrate_segment(g, eps[k + 1], eps[k], r.breaks, o), r.weight);
        }
        const double e = 4.0 * kUnitRoundoff * fscale;
        // Rounding of sign-power(d) is about q |d|^{q-1} e, largest at the extreme |d| of the shell.
        double nu = 0.0;
        if (q >= 1.0) {
            nu = q * std::pow(std::max(dmax, e), q - 1.0) * e;
        } else {
            nu = dmin > e ? q * std::pow(dmin, q - 1.0) * e : std::pow(e, q);
        }
        const double noise = 2.0 * 2.0 * wsum * nu * std::pow(eps[k + 1], -ps) * unit_shell;
        shells.push_back(2.0 * shell.value);
        quad.error += 2.0 * shell.error;
        quad.magnitude += 2.0 * shell.magnitude;
        noise_total += noise;
        series.push_back(series.back() + 2.0 * shell.value);
        used_eps.push_back(eps[k + 1]);
        if (k + 1 >= kMinLevels && noise > 1e-3 * std::abs(2.0 * shell.value)) {
            break;
        }
        if (balanced && k + 1 >= kMinAccelerated) {
            const std::size_t m = shells.size();
            const double r1 = shells[m - 2] / shells[m - 3];
            const double r2 = shells[m - 1] / shells[m - 2];
            if (r1 > 0.0 && r1 < 0.95 && r2 > 0.0 && r2 < 0.95) {
                const double cur = twice_accelerated(series, series.size());
                const double prev = twice_accelerated(series, series.size() - 1);
                const double err = std::abs(cur - prev);
                if (std::isfinite(cur) && err <= std::max(noise_total, 16.0 * kUnitRoundoff * std::abs(cur))) {
                    accelerated = true;
                    accelerated_value = cur;
                    accelerated_err = err;
                    break;
                }
            }
        }
    }

    // Innermost ball |t| < eps_K: geometric extrapolation of the shell sequence.
    double inner = 0.0;
    double inner_err = 0.0;
    const std::size_t K = shells.size();
    bool geometric = accelerated;
    if (accelerated) {
        inner = accelerated_value - series.back();
        inner_err = accelerated_err;
    } else if (K >= 3 && shells[K - 1] != 0.0 && shells[K - 2] != 0.0 && shells[K - 3] != 0.0) {
        const double r1 = shells[K - 2] / shells[K - 3];
        const double r2 = shells[K - 1] / shells[K - 2];
        if (r1 > 0.0 && r1 < 0.95 && r2 > 0.0 && r2 < 0.95) {
            geometric = true;
            inner = shells[K - 1] * r2 / (1.0 - r2);
            inner_err = std::abs(inner - shells[K - 1] * r1 / (1.0 - r1));
        }
    }
    if (!geometric) {
        const bool all_zero = std::all_of(shells.end() - std::min<std::size_t>(3, K), shells.end(),
                                    [](double v) { return v == 0.0; });
        if (!all_zero) {
            detail::PanelTotals in;
            for (const Ray& r : rays) {
                auto g = ray_integrand(r);
                in.merge(detail::integrate_segment(g, 0.0, used_eps.back(), r.breaks, o, true), r.weight);
            }
            inner = 2.0 * in.value;
            inner_err = std::abs(inner) + 2.0 * in.error;
        }
    }

    SeriesOutcome out;
    PointwiseResult& res = out.result;
    res.eps = used_eps;
    res.series = series;
    res.value = series.back() + inner;
    res.tail_bound = bound;
    res.error_bar = quad.error + noise_total + inner_err + bound +
                    16.0 * kUnitRoundoff * (quad.magnitude + std::abs(exact_remainder));

    const std::size_t tail_n = std::min<std::size_t>(3, K);
    double cauchy = 0.0;
    for (std::size_t i = K - tail_n; i < K; ++i) {
        cauchy = std::max(cauchy, std::abs(shells[i]));
    }
    res.cauchy_tail = cauchy;
    const bool shrinking = K < 3 || std::abs(shells[K - 1]) <= std::abs(shells[K - 3]) || cauchy == 0.0;
    const double tol = o.series_tolerance * std::max(1.0, std::abs(res.value));
    res.series_converged = (shrinking && cauchy <= tol) || (geometric && inner_err <= tol);
    out.shells = shells;
    std::ostringstream diag;
    diag << "last increments:";
    for (std::size_t i = K - tail_n; i < K; ++i) {
        diag << " " << shells[i];
    }
    diag << " at eps = " << used_eps.back();
    out.diagnostics = diag.str();
    return out;
}

}  // namespace

PointwiseResult eval_pointwise(const AnalyticField& field, const Point& x, const OperatorParams& params,
                               const QuadratureOptions& opts) {
    if (!params.pointwise_valid() && !opts.override_singular) {
        std::ostringstream os;
        os << "pointwise evaluation is undefined for p = " << params.p << ", s = " << params.s
           << ": the principal value converges only for s < 2(p-1)/p = " << params.singular_threshold()
           << " (override to inspect the epsilon series)";
        throw SingularCaseError(os.str());
    }
    SeriesOutcome out = pv_series(field, x, params, opts, true);
    if (!out.result.series_converged) {
        throw ConvergenceError("epsilon series did not converge; " + out.diagnostics);
    }
    return out.result;
}

PointwiseResult eps_limit_series(const AnalyticField& field, const Point& x, const OperatorParams& params,
                                 const QuadratureOptions& opts) {
    return pv_series(field, x, params, opts, false).result;
}

double tail(const AnalyticField& field, const Point& x, double radius, const OperatorParams& params,
            const QuadratureOptions& opts) {
    check_field(field);
    if (!(radius > 0.0)) {
        throw PreconditionError("tail: radius must be positive");
    }
    check_growth(field, params, "tail");
    const double q = params.pm1();
    const double ps = params.ps();
    const int dim = field.dim;
    const std::vector<Ray> rays = make_rays(field, x, opts, false);
    const bool compact = field.support_radius.has_value();
    const double t_end = compact ? norm(x, dim) + *field.support_radius : kInf;

    detail::PanelTotals total;
    for (const Ray& r : rays) {
        auto g = [&, e = r.e](double t) {
            const double fp = field(Point{x[0] + t * e[0], x[1] + t * e[1]});
            const double fm = field(Point{x[0] - t * e[0], x[1] - t * e[1]});
            return (std::pow(std::abs(fp), q) + std::pow(std::abs(fm), q)) * std::pow(t, -1.0 - ps);
        };
        detail::PanelTotals acc;
        double a = radius;
        while (a < t_end && a < 1e300) {
            const double b = std::min(2.0 * a, t_end);
            acc.merge(detail::integrate_segment(g, a, b, r.breaks, opts));
            a = b;
            if (!compact && far_bound(field, x, 0.0, a, params, false) <= 1e-17 * std::max(acc.magnitude, 1e-300)) {
                break;
            }
        }
        total.merge(acc, r.weight);
    }
    const double integral = std::max(total.value, 0.0);
    return std::pow(std::pow(radius, ps) * integral, 1.0 / q);
}

double tail(const GridFunction& u, const Grid& grid, const Point& x, double radius, const OperatorParams& params) {
    if (u.size() != grid.size()) {
        throw GeometryError("tail: grid function does not match the grid");
    }
    if (!(radius > 0.0)) {
        throw PreconditionError("tail: radius must be positive");
    }
    const double q = params.pm1();
    const double ps = params.ps();
    detail::CompensatedSum acc;
    if (grid.dim() == 1) {
        auto piece = [&](double d1, double d2) {
            return d2 > d1 ? (std::pow(d1, -ps) - std::pow(d2, -ps)) / ps : 0.0;
        };
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double lo = grid.cells[i].lo[0] - x[0];
            const double hi = grid.cells[i].hi[0] - x[0];
            double mass = 0.0;
            if (hi > radius) {
                mass += piece(std::max(lo, radius), hi);
            }
            if (lo < -radius) {
                mass += piece(std::max(-hi, radius), -lo);
            }
            if (mass > 0.0) {
                acc.add(std::pow(std::abs(u[i]), q) * mass);
            }
        }
    } else {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const CellPoints pts = cell_points(grid.cells[i], 2, &grid.domain);
            double mass = 0.0;
            for (std::size_t k = 0; k < pts.pts.size(); ++k) {
                const double r = std::hypot(pts.pts[k][0] - x[0], pts.pts[k][1] - x[1]);
                if (r > radius) {
                    mass += pts.w[k] * std::pow(r, -2.0 - ps);
                }
            }
            if (mass > 0.0) {
                acc.add(std::pow(std::abs(u[i]), q) * mass);
            }
        }
    }
    return std::pow(std::pow(radius, ps) * std::max(acc.value(), 0.0), 1.0 / q);
}

namespace {

double box_distance_to_domain(const Box& box, const DomainSpec& domain) {
    if (domain.kind == DomainKind::Interval) {
        return std::max({0.0, domain.a - box.hi[0], box.lo[0] - domain.b});
    }
    const double cx = std::clamp(0.0, box.lo[0], box.hi[0]);
    const double cy = std::clamp(0.0, box.lo[1], box.hi[1]);
    return std::max(0.0, std::hypot(cx, cy) - domain.radius);
}

template <class F>
PerturbationResult perturbation_integral(F&& integrand, const AnalyticField& v, const Point& x,
                                         const OperatorParams& params, const DomainSpec& domain) {
    if (!v.support_box) {
        throw PreconditionError("perturbation_rhs: v needs a declared support box");
    }
    const Box& box = *v.support_box;
    if (!(box_distance_to_domain(box, domain) > 0.0)) {
        throw PreconditionError("perturbation_rhs: supp(v) must be at positive distance from the domain");
    }
    if (!domain.contains(x)) {
        throw PreconditionError("perturbation_rhs: x must lie in the domain");
    }
    (void)params;
    using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
    PerturbationResult res;
    double magnitude = 0.0;
    if (domain.dim() == 1) {
        std::vector<double> cuts{box.lo[0], box.hi[0]};
        for (double sgn : {1.0, -1.0}) {
            for (double t : v.breaks_along(x, Point{sgn, 0.0})) {
                const double y = x[0] + sgn * t;
                if (y > box.lo[0] && y < box.hi[0]) {
                    cuts.push_back(y);
                }
            }
        }
        std::sort(cuts.begin(), cuts.end());
        auto f = [&](double y) { return integrand(Point{y, 0.0}); };
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            if (!(cuts[i + 1] > cuts[i])) {
                continue;
            }
            double err = 0.0;
            double l1 = 0.0;
            res.value += gk::integrate(f, cuts[i], cuts[i + 1], 15, 1e-14, &err, &l1);
            res.error_bar += err;
            magnitude += l1;
        }
    } else {
        double inner_err = 0.0;
        auto outer = [&](double y0) {
            auto g = [&](double y1) { return integrand(Point{y0, y1}); };
            double err = 0.0;
            double l1 = 0.0;
            const double v0 = gk::integrate(g, box.lo[1], box.hi[1], 10, 1e-12, &err, &l1);
            inner_err = std::max(inner_err, err);
            return v0;
        };
        double err = 0.0;
        res.value = gk::integrate(outer, box.lo[0], box.hi[0], 10, 1e-12, &err, &magnitude);
        res.error_bar = err + inner_err * (box.hi[0] - box.lo[0]);
    }
    res.value *= 2.0;
    res.error_bar = 2.0 * res.error_bar + 32.0 * kUnitRoundoff * magnitude;
    return res;
}

}  // namespace

PerturbationResult perturbation_rhs(const AnalyticField& u, const AnalyticField& v, const Point& x,
                                    const OperatorParams& params, const DomainSpec& domain) {
    check_field(u);
    check_field(v);
    if (u.dim != domain.dim() || v.dim != domain.dim()) {
        throw PreconditionError("perturbation_rhs: field and domain dimensions differ");
    }
    const double q = params.pm1();
    const double ps = params.ps();
    const int dim = domain.dim();
    const double ux = u(x);
    auto integrand = [&](const Point& y) {
        const double uy = u(y);
        const double vy = v(y);
        const double r = distance(x, y, dim);
        return (signed_power(ux - uy - vy, q) - signed_power(ux - uy, q)) * std::pow(r, -static_cast<double>(dim) - ps);
    };
    return perturbation_integral(integrand, v, x, params, domain);
}

PerturbationResult perturbation_rhs(const GridFunction& u, const Grid& grid, std::size_t node,
                                    const AnalyticField& v, const OperatorParams& params) {
    if (u.size() != grid.size() || node >= grid.size()) {
        throw GeometryError("perturbation_rhs: node or grid function does not match the grid");
    }
    check_field(v);
    const double q = params.pm1();
    const double ps = params.ps();
    const int dim = grid.dim();
    const Point x = grid.nodes[node];
    const double ux = u[node];
    auto integrand = [&](const Point& y) {
        const double r = distance(x, y, dim);
        return (signed_power(ux - v(y), q) - signed_power(ux, q)) * std::pow(r, -static_cast<double>(dim) - ps);
    };
    return perturbation_integral(integrand, v, x, params, grid.domain);
}

}  // namespace fraclab
