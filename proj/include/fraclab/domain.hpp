#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace fraclab {

/// A point of R^N, N in {1, 2}. One-dimensional points only use the first slot.
using Point = std::array<double, 2>;

enum class DomainKind { Interval, Disc };

/// Bounded domain: an interval (a, b) or the disc of radius R0 centered at the origin.
struct DomainSpec {
    DomainKind kind = DomainKind::Interval;
    double a = -1.0;
    double b = 1.0;
    double radius = 1.0;

    static DomainSpec interval(double a, double b);
    static DomainSpec disc(double radius);

    int dim() const { return kind == DomainKind::Interval ? 1 : 2; }
    double diameter() const;
    /// Lebesgue measure of the domain.
    double measure() const;
    bool contains(const Point& x) const;
    /// dist(x, complement); negative outside the domain.
    double signed_distance(const Point& x) const;
};

/// Axis-aligned cell [lo, hi]; unused coordinates of 1D cells are zero.
struct Cell {
    Point lo{};
    Point hi{};
};

/// Uniform cell-centered grid. Nodes are cell midpoints and lie strictly inside the domain.
struct Grid {
    DomainSpec domain;
    int n = 0;       ///< cells per axis of the bounding box
    double h = 0.0;  ///< uniform spacing
    std::vector<Point> nodes;
    std::vector<Cell> cells;
    std::vector<double> volumes;  ///< clipped cell volumes (disc) or h (interval)
    std::vector<std::array<int, 2>> lattice;  ///< bounding-box lattice index of each node

    int dim() const { return domain.dim(); }
    std::size_t size() const { return nodes.size(); }
};

/// Nodal values on interior nodes. The function is implicitly zero on the complement.
struct GridFunction {
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(std::size_t size, double fill = 0.0) : values(size, fill) {}
    explicit GridFunction(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::span<const double> view() const { return values; }
    double sup_norm() const;
};

Grid build_grid(const DomainSpec& domain, int n);

/// delta_i = dist(x_i, complement) at every node.
GridFunction distance_to_complement(const Grid& grid);

double distance(const Point& x, const Point& y, int dim);

}  // namespace fraclab
