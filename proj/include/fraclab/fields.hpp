#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fraclab/domain.hpp"

namespace fraclab {

enum class Smoothness { Smooth, Holder, Discontinuous };

/// Axis-aligned box; one-dimensional boxes use the first coordinate only.
struct Box {
    Point lo{};
    Point hi{};
};

/// Closed-form function on all of R^N together with the metadata the singular
/// integrals need: where it is non-smooth, where it is supported, how fast it grows.
struct AnalyticField {
    std::string name;
    int dim = 1;
    std::function<double(const Point&)> value;
    /// Distances t > 0 along the ray x + t*dir at which the field is not smooth.
    std::function<std::vector<double>(const Point& x, const Point& dir)> ray_breaks;
    /// Field vanishes outside the closed ball of this radius about the origin.
    std::optional<double> support_radius;
    /// Field vanishes outside this box (used by the perturbation integral).
    std::optional<Box> support_box;
    /// |field(x)| <= growth_constant * (1 + |x|)^growth_exponent.
    double growth_exponent = 0.0;
    double growth_constant = 1.0;
    Smoothness smoothness = Smoothness::Smooth;

    double operator()(const Point& x) const { return value(x); }
    double operator()(double x) const { return value(Point{x, 0.0}); }
    std::vector<double> breaks_along(const Point& x, const Point& dir) const;
};

GridFunction sample(const AnalyticField& field, const Grid& grid);

namespace fields {

AnalyticField zero(int dim = 1);
AnalyticField constant(double c, int dim = 1);
/// x -> x[axis].
AnalyticField coordinate(int dim = 1, int axis = 0);
/// (x_N)_+^s, the half-space solution.
AnalyticField half_space_power(double s, int dim = 1);
/// (R^2 - |x|^2)_+^e.
AnalyticField ball_power(double radius, double exponent, int dim = 1);
/// amplitude * exp(1 - 1/(1 - |x-c|^2/r^2)) inside B_r(c); C-infinity, compact support.
AnalyticField bump(const Point& center, double radius, double amplitude = 1.0, int dim = 1);
/// Indicator of [lo, hi] in one dimension.
AnalyticField indicator(double lo, double hi);
/// dist(x, complement)^s inside the domain, zero outside.
AnalyticField distance_power(const DomainSpec& domain, double s);

AnalyticField scaled(AnalyticField f, double factor);
AnalyticField sum(AnalyticField f, AnalyticField g);
/// x -> f(x / lambda).
AnalyticField dilated(AnalyticField f, double lambda);

/// Names accepted by `by_name`: zero, constant, coordinate, half_space, ball, bump, delta_s.
AnalyticField by_name(const std::string& name, const DomainSpec& domain, double s, double amplitude = 1.0);
std::vector<std::string> names();

}  // namespace fields

}  // namespace fraclab
