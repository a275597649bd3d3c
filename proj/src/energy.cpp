#include "fraclab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fraclab/errors.hpp"
#include "quadrature.hpp"

namespace fraclab {

namespace {

constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon() / 2.0;

void check_sizes(const GridFunction& u, const KernelWeights& w, const char* what) {
    if (u.size() != w.n) {
        std::ostringstream os;
        os << what << ": grid function has " << u.size() << " values, weights expect " << w.n;
        throw GeometryError(os.str());
    }
}

struct Evaluation {
    double energy = 0.0;
    double scale = 0.0;              ///< sum of absolute energy terms
    std::vector<double> operator_;   ///< 2 sum W sp(u_i - u_j) + 2 E sp(u_i), not divided by vol
};

// One pass over all pairs: the energy and the unscaled operator at every node.
class Evaluator {
public:
    explicit Evaluator(const KernelWeights& w) : w_(w), q_(w.params.pm1()), p_(w.params.p) {}

    Evaluation run(const std::vector<double>& u, bool want_energy) {
        const std::size_t n = w_.n;
        Evaluation ev;
        ev.operator_.assign(n, 0.0);
        detail::CompensatedSum pair_energy;
        double scale = 0.0;
        if (w_.distance_paired()) {
            // Toeplitz rows: S[i*n + k] = sp(u_i - u_{i+k}); rows summed in order of distance.
            diff_.resize(n * n);
            for (std::size_t i = 0; i < n; ++i) {
                double* row = diff_.data() + i * n;
                double e_row = 0.0;
                for (std::size_t k = 1; i + k < n; ++k) {
                    const double d = u[i] - u[i + k];
                    const double sp = signed_power(d, q_);
                    row[k] = sp;
                    if (want_energy) {
                        e_row += w_.pair[k] * std::abs(d) * std::abs(sp);
                    }
                }
                pair_energy.add(e_row);
                scale += std::abs(e_row);
            }
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                const std::size_t reach = std::max(i, n - 1 - i);
                for (std::size_t k = 1; k <= reach; ++k) {
                    double t = 0.0;
                    if (k <= i) {
                        t -= diff_[(i - k) * n + k];
                    }
                    if (i + k < n) {
                        t += diff_[i * n + k];
                    }
                    acc += w_.pair[k] * t;
                }
                ev.operator_[i] = 2.0 * acc;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = w_.row(i);
                double e_row = 0.0;
                for (std::size_t j = i + 1; j < n; ++j) {
                    const double d = u[i] - u[j];
                    const double sp = signed_power(d, q_);
                    const double t = row[j] * sp;
                    ev.operator_[i] += t;
                    ev.operator_[j] -= t;
                    if (want_energy) {
                        e_row += row[j] * std::abs(d) * std::abs(sp);
                    }
                }
                pair_energy.add(e_row);
                scale += std::abs(e_row);
            }
            for (double& v : ev.operator_) {
                v *= 2.0;
            }
        }
        detail::CompensatedSum ext;
        for (std::size_t i = 0; i < n; ++i) {
            const double sp = signed_power(u[i], q_);
            ev.operator_[i] += 2.0 * w_.exterior[i] * sp;
            if (want_energy) {
                const double t = w_.exterior[i] * std::abs(u[i]) * std::abs(sp);
                ext.add(t);
                scale += t;
            }
        }
        ev.energy = 2.0 * (pair_energy.value() + ext.value()) / p_;
        ev.scale = 2.0 * scale / p_;
        return ev;
    }

private:
    const KernelWeights& w_;
    double q_;
    double p_;
    std::vector<double> diff_;
};

double source_term(const std::vector<double>& u, const GridFunction& f, const std::vector<double>& vol,
                   double* scale) {
    detail::CompensatedSum acc;
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double t = f[i] * u[i] * vol[i];
        acc.add(t);
        s += std::abs(t);
    }
    if (scale) {
        *scale = s;
    }
    return acc.value();
}

double sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace

double discrete_energy(const GridFunction& u, const KernelWeights& w, const GridFunction& f) {
    check_sizes(u, w, "discrete_energy");
    check_sizes(f, w, "discrete_energy");
    Evaluator ev(w);
    const Evaluation e = ev.run(u.values, true);
    return e.energy - source_term(u.values, f, w.grid.volumes, nullptr);
}

GridFunction apply_operator(const GridFunction& u, const KernelWeights& w) {
    check_sizes(u, w, "apply_operator");
    Evaluator ev(w);
    Evaluation e = ev.run(u.values, false);
    for (std::size_t i = 0; i < w.n; ++i) {
        e.operator_[i] /= w.grid.volumes[i];
    }
    return GridFunction(std::move(e.operator_));
}

GridFunction residual(const GridFunction& u, const KernelWeights& w, const GridFunction& f) {
    check_sizes(f, w, "residual");
    GridFunction r = apply_operator(u, w);
    for (std::size_t i = 0; i < w.n; ++i) {
        r[i] -= f[i];
    }
    return r;
}

namespace {

// Hessian of the energy; |d|^{q-1} is evaluated at max(|d|, floor) so coincident values stay finite.
Eigen::MatrixXd regularized_hessian(const KernelWeights& w, const std::vector<double>& u, double q, double floor) {
    const std::size_t n = w.n;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = w.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = std::max(std::abs(u[i] - u[j]), floor);
            const double c = 2.0 * row[j] * (q == 1.0 ? 1.0 : q * std::pow(m, q - 1.0));
            H(i, j) -= c;
            H(j, i) -= c;
            H(i, i) += c;
            H(j, j) += c;
        }
        const double m = std::max(std::abs(u[i]), floor);
        H(i, i) += 2.0 * w.exterior[i] * (q == 1.0 ? 1.0 : q * std::pow(m, q - 1.0));
    }
    return H;
}

}  // namespace

Solution solve(const KernelWeights& w, const GridFunction& f, const SolveOptions& opts) {
    check_sizes(f, w, "solve");
    if (!(opts.tolerance > 0.0) || opts.max_iterations < 1) {
        throw ConfigError("solve: tolerance must be positive and max_iterations at least 1");
    }
    const std::size_t n = w.n;
    const std::vector<double>& vol = w.grid.volumes;
    const double p = w.params.p;
    const double q = w.params.pm1();
    const double fmax = f.sup_norm();
    StepStrategy strategy = opts.step;
    if (strategy == StepStrategy::Auto) {
        strategy = p < 2.0 ? StepStrategy::RegularizedNewton : StepStrategy::AdaptiveTwoPoint;
    }
    const bool newton = strategy == StepStrategy::RegularizedNewton;

    Evaluator ev(w);
    auto evaluate = [&](const std::vector<double>& x, std::vector<double>& r, double& J, double& Jscale) {
        Evaluation e = ev.run(x, true);
        double src_scale = 0.0;
        J = e.energy - source_term(x, f, vol, &src_scale);
        Jscale = e.scale + src_scale;
        r.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = e.operator_[i] / vol[i] - f[i];
        }
        if (!std::isfinite(J)) {
            throw NumericalError("solve: energy is not finite");
        }
        for (double v : r) {
            if (!std::isfinite(v)) {
                throw NumericalError("solve: residual is not finite");
            }
        }
    };
    auto metric_dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
        detail::CompensatedSum acc;
        for (std::size_t i = 0; i < n; ++i) {
            acc.add(a[i] * b[i] * vol[i]);
        }
        return acc.value();
    };

    std::vector<double> u(n, 0.0);
    if (opts.initial_guess) {
        check_sizes(*opts.initial_guess, w, "solve");
        u = opts.initial_guess->values;
    } else if (newton && fmax > 0.0) {
        // Linear problem, then the energy-optimal multiple along that ray.
        Eigen::VectorXd b(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            b[static_cast<Eigen::Index>(i)] = f[i] * vol[i];
        }
        const Eigen::VectorXd v = regularized_hessian(w, u, 1.0, 0.0).llt().solve(b);
        std::vector<double> vv(v.data(), v.data() + n);
        const double A = p * ev.run(vv, true).energy;
        const double B = source_term(vv, f, vol, nullptr);
        if (A > 0.0 && B > 0.0 && std::isfinite(A)) {
            const double c = std::pow(B / A, 1.0 / q);
            for (std::size_t i = 0; i < n; ++i) {
                u[i] = c * vv[i];
            }
        }
    }

    Solution sol;
    SolveReport& rep = sol.report;

    std::vector<double> r;
    double J = 0.0;
    double Jscale = 0.0;
    evaluate(u, r, J, Jscale);
    if (opts.record_trajectory) {
        rep.trajectory.push_back(J);
    }

    // Diagonal scale of the operator: D_i = 2 (sum_j W_ij + E_i) / vol_i.
    double diag_min = std::numeric_limits<double>::infinity();
    double diag_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            row += w.W(i, j);
        }
        const double d = 2.0 * (row + w.exterior[i]) / vol[i];
        diag_min = std::min(diag_min, d);
        diag_max = std::max(diag_max, d);
    }
    // Rounding of u_i - u_j is amplified by the signed power; below this the residual is noise.
    auto rounding_floor = [&](double umax) {
        const double e = 16.0 * kUnitRoundoff * umax;
        return q < 1.0 ? diag_max * std::pow(e, q) : diag_max * q * std::pow(umax, q - 1.0) * e;
    };
    auto threshold = [&]() { return std::max(opts.tolerance * fmax, rounding_floor(sup_abs(u))); };

    double alpha = 1.0;
    if (!newton) {
        const double rmax = sup_abs(r);
        if (rmax > 0.0 && diag_min > 0.0) {
            const double level = std::pow(std::max(fmax, rmax) / diag_min, 1.0 / q);
            alpha = 0.1 * std::max(level, sup_abs(u)) / rmax;
        }
    }

    std::vector<double> trial(n), r_trial, step(n), dr(n), dir(n);
    int it = 0;
    double rnorm = sup_abs(r);
    while (rnorm > threshold() && it < opts.max_iterations) {
        // Search direction (in nodal values) and its slope -<r, dir>_vol.
        double a = alpha;
        if (newton) {
            const double floor = 1e-9 * std::max(sup_abs(u), std::numeric_limits<double>::min());
            const Eigen::MatrixXd H = regularized_hessian(w, u, q, floor);
            Eigen::VectorXd g(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                g[static_cast<Eigen::Index>(i)] = r[i] * vol[i];
            }
            Eigen::LLT<Eigen::MatrixXd> llt(H);
            const Eigen::VectorXd d = llt.solve(-g);
            const bool usable = llt.info() == Eigen::Success && d.allFinite() && d.dot(g) < 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                dir[i] = usable ? d[static_cast<Eigen::Index>(i)] : -r[i];
            }
            a = 1.0;
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                dir[i] = -r[i];
            }
        }
        const double slope = metric_dot(r, dir);
        double J_trial = 0.0;
        double Jscale_trial = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 200; ++bt) {
            for (std::size_t i = 0; i < n; ++i) {
                trial[i] = u[i] + a * dir[i];
            }
            evaluate(trial, r_trial, J_trial, Jscale_trial);
            const double resolvable = 64.0 * kUnitRoundoff * std::max(Jscale, Jscale_trial);
            if (J - J_trial > resolvable) {
                accepted = J_trial <= J + 1e-4 * a * slope;
            } else {
                // Energy change below rounding: accept while the slope along the step has not reversed past the start.
                accepted = metric_dot(r_trial, dir) <= -slope && J_trial <= J + resolvable;
            }
            if (accepted) {
                break;
            }
            a *= 0.5;
        }
        if (!accepted) {
            rep.message = "line search failed to find a decreasing step";
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            step[i] = trial[i] - u[i];
            dr[i] = r_trial[i] - r[i];
        }
        const double sy = metric_dot(step, dr);
        const double ss = metric_dot(step, step);
        u.swap(trial);
        r.swap(r_trial);
        J = J_trial;
        Jscale = Jscale_trial;
        ++it;
        if (opts.record_trajectory) {
            rep.trajectory.push_back(J);
        }
        rnorm = sup_abs(r);
        if (strategy == StepStrategy::AdaptiveTwoPoint) {
            alpha = sy > 0.0 && std::isfinite(ss / sy) ? ss / sy : 2.0 * a;
        } else {
            alpha = a;
        }
    }
    rep.iterations = it;
    rep.energy = J;
    rep.residual_norm = rnorm;
    rep.threshold = threshold();
    rep.converged = rnorm <= rep.threshold;
    if (rep.converged) {
        rep.message = "converged";
    } else if (rep.message.empty()) {
        rep.message = "iteration limit reached";
    }
    sol.u = GridFunction(std::move(u));
    return sol;
}

Solution torsion(const KernelWeights& w, const SolveOptions& opts) {
    return solve(w, GridFunction(w.n, 1.0), opts);
}

Solution torsion(const DomainSpec& domain, const OperatorParams& params, int n, const SolveOptions& opts) {
    const Grid grid = build_grid(domain, n);
    const KernelWeights w = assemble_weights(grid, params);
    return torsion(w, opts);
}

}  // namespace fraclab
