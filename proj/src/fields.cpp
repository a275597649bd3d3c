#include "fraclab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fraclab/errors.hpp"

namespace fraclab {

namespace {

double dot(const Point& a, const Point& b, int dim) {
    return dim == 1 ? a[0] * b[0] : a[0] * b[0] + a[1] * b[1];
}

double norm(const Point& a, int dim) {
    return std::sqrt(dot(a, a, dim));
}

// Positive parameters t where |x + t dir - c| = r.
void sphere_crossings(const Point& x, const Point& dir, const Point& c, double r, int dim,
                      std::vector<double>& out) {
    const Point d0{x[0] - c[0], x[1] - c[1]};
    const double A = dot(dir, dir, dim);
    const double B = dot(d0, dir, dim);
    const double C = dot(d0, d0, dim) - r * r;
    const double disc = B * B - A * C;
    if (disc < 0.0 || A == 0.0) {
        return;
    }
    const double sq = std::sqrt(disc);
    for (double t : {(-B - sq) / A, (-B + sq) / A}) {
        if (t > 0.0) {
            out.push_back(t);
        }
    }
}

}  // namespace

std::vector<double> AnalyticField::breaks_along(const Point& x, const Point& dir) const {
    std::vector<double> t;
    if (ray_breaks) {
        for (double v : ray_breaks(x, dir)) {
            if (v > 0.0 && std::isfinite(v)) {
                t.push_back(v);
            }
        }
    }
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

GridFunction sample(const AnalyticField& field, const Grid& grid) {
    GridFunction u(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = field(grid.nodes[i]);
        if (!std::isfinite(v)) {
            throw NumericalError("field '" + field.name + "' is not finite at node " + std::to_string(i));
        }
        u[i] = v;
    }
    return u;
}

namespace fields {

AnalyticField zero(int dim) {
    AnalyticField f;
    f.name = "zero";
    f.dim = dim;
    f.value = [](const Point&) { return 0.0; };
    f.support_radius = 0.0;
    f.growth_constant = 0.0;
    return f;
}

AnalyticField constant(double c, int dim) {
    AnalyticField f;
    f.name = "constant";
    f.dim = dim;
    f.value = [c](const Point&) { return c; };
    f.growth_constant = std::abs(c);
    return f;
}

AnalyticField coordinate(int dim, int axis) {
    AnalyticField f;
    f.name = "coordinate";
    f.dim = dim;
    f.value = [axis](const Point& x) { return x[axis]; };
    f.growth_exponent = 1.0;
    return f;
}

AnalyticField half_space_power(double s, int dim) {
    AnalyticField f;
    f.name = "half_space";
    f.dim = dim;
    const int last = dim - 1;
    f.value = [s, last](const Point& x) { return x[last] > 0.0 ? std::pow(x[last], s) : 0.0; };
    f.ray_breaks = [last](const Point& x, const Point& dir) {
        std::vector<double> t;
        if (dir[last] != 0.0) {
            t.push_back(-x[last] / dir[last]);
        }
        return t;
    };
    f.growth_exponent = s;
    f.smoothness = Smoothness::Holder;
    return f;
}

AnalyticField ball_power(double radius, double exponent, int dim) {
    AnalyticField f;
    f.name = "ball";
    f.dim = dim;
    f.value = [radius, exponent, dim](const Point& x) {
        const double r2 = radius * radius - dot(x, x, dim);
        return r2 > 0.0 ? std::pow(r2, exponent) : 0.0;
    };
    f.ray_breaks = [radius, dim](const Point& x, const Point& dir) {
        std::vector<double> t;
        sphere_crossings(x, dir, Point{0.0, 0.0}, radius, dim, t);
        return t;
    };
    f.support_radius = radius;
    f.support_box = Box{{-radius, dim == 2 ? -radius : 0.0}, {radius, dim == 2 ? radius : 0.0}};
    f.growth_constant = std::pow(radius * radius, exponent);
    f.smoothness = Smoothness::Holder;
    return f;
}

AnalyticField bump(const Point& center, double radius, double amplitude, int dim) {
    AnalyticField f;
    f.name = "bump";
    f.dim = dim;
    f.value = [center, radius, amplitude, dim](const Point& x) {
        const Point d{x[0] - center[0], x[1] - center[1]};
        const double q = dot(d, d, dim) / (radius * radius);
        return q < 1.0 ? amplitude * std::exp(1.0 - 1.0 / (1.0 - q)) : 0.0;
    };
    f.ray_breaks = [center, radius, dim](const Point& x, const Point& dir) {
        std::vector<double> t;
        sphere_crossings(x, dir, center, radius, dim, t);
        return t;
    };
    f.support_radius = norm(center, dim) + radius;
    f.support_box = Box{{center[0] - radius, dim == 2 ? center[1] - radius : 0.0},
                        {center[0] + radius, dim == 2 ? center[1] + radius : 0.0}};
    f.growth_constant = std::abs(amplitude);
    return f;
}

AnalyticField indicator(double lo, double hi) {
    if (!(lo < hi)) {
        throw ConfigError("indicator needs lo < hi");
    }
    AnalyticField f;
    f.name = "indicator";
    f.dim = 1;
    f.value = [lo, hi](const Point& x) { return x[0] >= lo && x[0] <= hi ? 1.0 : 0.0; };
    f.ray_breaks = [lo, hi](const Point& x, const Point& dir) {
        std::vector<double> t;
        if (dir[0] != 0.0) {
            t.push_back((lo - x[0]) / dir[0]);
            t.push_back((hi - x[0]) / dir[0]);
        }
        return t;
    };
    f.support_radius = std::max(std::abs(lo), std::abs(hi));
    f.support_box = Box{{lo, 0.0}, {hi, 0.0}};
    f.smoothness = Smoothness::Discontinuous;
    return f;
}

AnalyticField distance_power(const DomainSpec& domain, double s) {
    AnalyticField f;
    f.name = "delta_s";
    f.dim = domain.dim();
    f.value = [domain, s](const Point& x) {
        const double d = domain.signed_distance(x);
        return d > 0.0 ? std::pow(d, s) : 0.0;
    };
    if (domain.kind == DomainKind::Interval) {
        const double a = domain.a;
        const double b = domain.b;
        f.ray_breaks = [a, b](const Point& x, const Point& dir) {
            std::vector<double> t;
            if (dir[0] != 0.0) {
                for (double c : {a, b, 0.5 * (a + b)}) {
                    t.push_back((c - x[0]) / dir[0]);
                }
            }
            return t;
        };
        f.support_radius = std::max(std::abs(a), std::abs(b));
        f.support_box = Box{{a, 0.0}, {b, 0.0}};
    } else {
        const double R = domain.radius;
        f.ray_breaks = [R](const Point& x, const Point& dir) {
            std::vector<double> t;
            sphere_crossings(x, dir, Point{0.0, 0.0}, R, 2, t);
            // closest approach to the apex of the cone R - |y|
            t.push_back(-dot(x, dir, 2) / dot(dir, dir, 2));
            return t;
        };
        f.support_radius = R;
        f.support_box = Box{{-R, -R}, {R, R}};
    }
    f.growth_constant = std::pow(0.5 * domain.diameter(), s);
    f.smoothness = Smoothness::Holder;
    return f;
}

AnalyticField scaled(AnalyticField f, double factor) {
    AnalyticField g = f;
    g.name = f.name + "*" + std::to_string(factor);
    g.value = [v = f.value, factor](const Point& x) { return factor * v(x); };
    g.growth_constant = std::abs(factor) * f.growth_constant;
    return g;
}

AnalyticField sum(AnalyticField f, AnalyticField g) {
    if (f.dim != g.dim) {
        throw ConfigError("cannot add fields of different dimension");
    }
    AnalyticField h;
    h.name = f.name + "+" + g.name;
    h.dim = f.dim;
    h.value = [a = f.value, b = g.value](const Point& x) { return a(x) + b(x); };
    h.ray_breaks = [a = f, b = g](const Point& x, const Point& dir) {
        std::vector<double> t = a.breaks_along(x, dir);
        const std::vector<double> u = b.breaks_along(x, dir);
        t.insert(t.end(), u.begin(), u.end());
        return t;
    };
    if (f.support_radius && g.support_radius) {
        h.support_radius = std::max(*f.support_radius, *g.support_radius);
    }
    if (f.support_box && g.support_box) {
        h.support_box = Box{{std::min(f.support_box->lo[0], g.support_box->lo[0]),
                             std::min(f.support_box->lo[1], g.support_box->lo[1])},
                            {std::max(f.support_box->hi[0], g.support_box->hi[0]),
                             std::max(f.support_box->hi[1], g.support_box->hi[1])}};
    }
    h.growth_exponent = std::max(f.growth_exponent, g.growth_exponent);
    h.growth_constant = f.growth_constant + g.growth_constant;
    h.smoothness = std::max(f.smoothness, g.smoothness);
    return h;
}

AnalyticField dilated(AnalyticField f, double lambda) {
    if (!(lambda > 0.0)) {
        throw ConfigError("dilation factor must be positive");
    }
    AnalyticField g = f;
    g.name = f.name + "(x/" + std::to_string(lambda) + ")";
    g.value = [v = f.value, lambda](const Point& x) { return v(Point{x[0] / lambda, x[1] / lambda}); };
    g.ray_breaks = [f, lambda](const Point& x, const Point& dir) {
        std::vector<double> t = f.breaks_along(Point{x[0] / lambda, x[1] / lambda}, dir);
        for (double& v : t) {
            v *= lambda;
        }
        return t;
    };
    if (f.support_radius) {
        g.support_radius = lambda * *f.support_radius;
    }
    if (f.support_box) {
        g.support_box = Box{{lambda * f.support_box->lo[0], lambda * f.support_box->lo[1]},
                            {lambda * f.support_box->hi[0], lambda * f.support_box->hi[1]}};
    }
    g.growth_constant = f.growth_constant * std::pow(std::max(1.0, 1.0 / lambda), f.growth_exponent);
    return g;
}

std::vector<std::string> names() {
    return {"zero", "constant", "coordinate", "half_space", "ball", "bump", "delta_s"};
}

AnalyticField by_name(const std::string& name, const DomainSpec& domain, double s, double amplitude) {
    const int dim = domain.dim();
    const double half = 0.5 * domain.diameter();
    const Point mid = domain.kind == DomainKind::Interval ? Point{0.5 * (domain.a + domain.b), 0.0}
                                                          : Point{0.0, 0.0};
    if (name == "zero") {
        return zero(dim);
    }
    if (name == "constant") {
        return constant(amplitude, dim);
    }
    if (name == "coordinate") {
        return scaled(coordinate(dim, 0), amplitude);
    }
    if (name == "half_space") {
        return scaled(half_space_power(s, dim), amplitude);
    }
    if (name == "ball") {
        return scaled(ball_power(half, s, dim), amplitude);
    }
    if (name == "bump") {
        return bump(mid, half, amplitude, dim);
    }
    if (name == "delta_s") {
        return scaled(distance_power(domain, s), amplitude);
    }
    throw ConfigError("unknown field '" + name + "'");
}

}  // namespace fields

}  // namespace fraclab
