#include "fraclab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "fraclab/errors.hpp"

namespace fraclab {

DomainSpec DomainSpec::interval(double a, double b) {
    if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
        throw ConfigError("interval requires finite a < b");
    }
    DomainSpec d;
    d.kind = DomainKind::Interval;
    d.a = a;
    d.b = b;
    return d;
}

DomainSpec DomainSpec::disc(double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw ConfigError("disc radius must be positive");
    }
    DomainSpec d;
    d.kind = DomainKind::Disc;
    d.radius = radius;
    return d;
}

double DomainSpec::diameter() const {
    return kind == DomainKind::Interval ? b - a : 2.0 * radius;
}

double DomainSpec::measure() const {
    return kind == DomainKind::Interval ? b - a : M_PI * radius * radius;
}

bool DomainSpec::contains(const Point& x) const {
    return signed_distance(x) > 0.0;
}

double DomainSpec::signed_distance(const Point& x) const {
    if (kind == DomainKind::Interval) {
        return std::min(x[0] - a, b - x[0]);
    }
    return radius - std::hypot(x[0], x[1]);
}

double distance(const Point& x, const Point& y, int dim) {
    return dim == 1 ? std::abs(x[0] - y[0]) : std::hypot(x[0] - y[0], x[1] - y[1]);
}

double GridFunction::sup_norm() const {
    double m = 0.0;
    for (double v : values) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

namespace {

// Area of the square cell inside the disc, 16 x 16 Gauss points on the indicator.
double clipped_area(const Cell& c, double radius) {
    using rule = boost::math::quadrature::gauss<double, 16>;
    const double hx = 0.5 * (c.hi[0] - c.lo[0]);
    const double hy = 0.5 * (c.hi[1] - c.lo[1]);
    const double mx = 0.5 * (c.hi[0] + c.lo[0]);
    const double my = 0.5 * (c.hi[1] + c.lo[1]);
    return rule::integrate(
               [&](double u) {
                   return rule::integrate(
                       [&](double v) {
                           const double x = mx + hx * u;
                           const double y = my + hy * v;
                           return x * x + y * y < radius * radius ? 1.0 : 0.0;
                       },
                       -1.0, 1.0);
               },
               -1.0, 1.0) *
           hx * hy;
}

}  // namespace

Grid build_grid(const DomainSpec& domain, int n) {
    if (n < 2) {
        throw ConfigError("grid needs at least 2 cells per axis, got n = " + std::to_string(n));
    }
    Grid g;
    g.domain = domain;
    g.n = n;
    if (domain.kind == DomainKind::Interval) {
        g.h = (domain.b - domain.a) / n;
        g.nodes.reserve(n);
        for (int i = 0; i < n; ++i) {
            const double lo = domain.a + i * g.h;
            const double hi = i + 1 == n ? domain.b : domain.a + (i + 1) * g.h;
            g.cells.push_back(Cell{{lo, 0.0}, {hi, 0.0}});
            g.nodes.push_back(Point{domain.a + (i + 0.5) * g.h, 0.0});
            g.volumes.push_back(g.h);
            g.lattice.push_back({i, 0});
        }
        return g;
    }

    const double R = domain.radius;
    g.h = 2.0 * R / n;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const Point x{-R + (i + 0.5) * g.h, -R + (j + 0.5) * g.h};
            if (!domain.contains(x)) {
                continue;
            }
            Cell c{{-R + i * g.h, -R + j * g.h}, {-R + (i + 1) * g.h, -R + (j + 1) * g.h}};
            g.nodes.push_back(x);
            g.cells.push_back(c);
            g.volumes.push_back(clipped_area(c, R));
            g.lattice.push_back({i, j});
        }
    }
    return g;
}

GridFunction distance_to_complement(const Grid& grid) {
    GridFunction d(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        d[i] = grid.domain.signed_distance(grid.nodes[i]);
    }
    return d;
}

}  // namespace fraclab
