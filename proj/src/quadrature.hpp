// Panel quadrature shared by the singular-integral routines.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "fraclab/kernel.hpp"

namespace fraclab::detail {

/// Neumaier compensated sum; order-dependent but deterministic.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            c_ += (sum_ - t) + x;
        } else {
            c_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + c_; }

private:
    double sum_ = 0.0;
    double c_ = 0.0;
};

struct PanelTotals {
    double value = 0.0;
    double error = 0.0;
    double magnitude = 0.0;

    void merge(const PanelTotals& o, double weight = 1.0) {
        value += weight * o.value;
        error += std::abs(weight) * o.error;
        magnitude += std::abs(weight) * o.magnitude;
    }
};

/// Gauss-16 value with |G16 - G8| as the error estimate, over `split` equal pieces.
template <class F>
void gauss_panel(F& g, double a, double b, int split, PanelTotals& acc) {
    using g16 = boost::math::quadrature::gauss<double, 16>;
    using g8 = boost::math::quadrature::gauss<double, 8>;
    const double step = (b - a) / split;
    for (int i = 0; i < split; ++i) {
        const double lo = a + i * step;
        const double hi = i + 1 == split ? b : a + (i + 1) * step;
        const double v16 = g16::integrate(g, lo, hi);
        const double v8 = g8::integrate(g, lo, hi);
        acc.value += v16;
        acc.error += std::abs(v16 - v8);
        acc.magnitude += std::abs(v16);
    }
}

/// Panels of [c, d] refined geometrically toward c (toward_lo) or toward d.
template <class F>
void graded_panels(F& g, double c, double d, bool toward_lo, int levels, int split, PanelTotals& acc) {
    const double len = d - c;
    for (int l = 0; l < levels; ++l) {
        const double far = std::ldexp(len, -l);
        const double near = std::ldexp(len, -l - 1);
        if (toward_lo) {
            gauss_panel(g, c + near, c + far, split, acc);
        } else {
            gauss_panel(g, d - far, d - near, split, acc);
        }
    }
    const double last = std::ldexp(len, -levels);
    if (toward_lo) {
        gauss_panel(g, c, c + last, split, acc);
    } else {
        gauss_panel(g, d - last, d, split, acc);
    }
}

inline bool near_point(double a, double b) {
    return std::abs(a - b) <= 1e-13 * std::max(1.0, std::abs(b));
}

/// Integrates g over [lo, hi]; `breaks` (sorted) are points where g is not smooth and get
/// geometric refinement from both sides.
template <class F>
PanelTotals integrate_segment(F& g, double lo, double hi, std::span<const double> breaks,
                              const QuadratureOptions& o, bool lo_singular = false) {
    PanelTotals acc;
    if (!(hi > lo)) {
        return acc;
    }
    std::vector<double> pts{lo};
    std::vector<char> sing{static_cast<char>(lo_singular)};
    for (double b : breaks) {
        if (near_point(b, lo)) {
            sing.front() = 1;
        } else if (b > lo && b < hi && !near_point(b, hi)) {
            pts.push_back(b);
            sing.push_back(1);
        }
    }
    bool hi_sing = false;
    for (double b : breaks) {
        hi_sing = hi_sing || near_point(b, hi);
    }
    pts.push_back(hi);
    sing.push_back(static_cast<char>(hi_sing));

    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double c = pts[i];
        const double d = pts[i + 1];
        const bool sc = sing[i] != 0;
        const bool sd = sing[i + 1] != 0;
        if (sc && sd) {
            const double m = 0.5 * (c + d);
            graded_panels(g, c, m, true, o.break_levels, o.panel_split, acc);
            graded_panels(g, m, d, false, o.break_levels, o.panel_split, acc);
        } else if (sc) {
            graded_panels(g, c, d, true, o.break_levels, o.panel_split, acc);
        } else if (sd) {
            graded_panels(g, c, d, false, o.break_levels, o.panel_split, acc);
        } else {
            gauss_panel(g, c, d, o.panel_split, acc);
        }
    }
    return acc;
}

/// Gauss-Legendre directions on the half circle [0, pi); weights sum to pi.
struct Direction {
    Point e{};
    double weight = 0.0;
};

std::vector<Direction> half_circle_directions(int dim, int panels);

}  // namespace fraclab::detail
