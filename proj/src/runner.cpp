#include "fraclab/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fraclab/acceptance.hpp"
#include "fraclab/energy.hpp"
#include "fraclab/fields.hpp"
#include "fraclab/kernel.hpp"
#include "fraclab/regularity.hpp"

#ifndef FRACLAB_VERSION
#define FRACLAB_VERSION "0.0.0"
#endif

namespace fraclab::cli {

namespace fs = std::filesystem;

std::string library_version() { return FRACLAB_VERSION; }

void write_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw Error("cannot write " + tmp.string());
        }
        f << text;
        f.flush();
        if (!f) {
            throw Error("short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : width_(header.size()) { add_row(header); }

    Csv& row() {
        lines_.emplace_back();
        return *this;
    }
    Csv& operator<<(double v) { return cell(num(v)); }
    Csv& operator<<(int v) { return cell(std::to_string(v)); }
    Csv& operator<<(std::size_t v) { return cell(std::to_string(v)); }
    Csv& operator<<(bool v) { return cell(v ? "1" : "0"); }
    Csv& operator<<(const std::string& v) { return cell(quoted(v)); }
    Csv& operator<<(const char* v) { return cell(quoted(v)); }

    std::string str() const {
        std::string out;
        for (const auto& l : lines_) {
            if (l.size() != width_) {
                throw Error("internal: CSV row width mismatch");
            }
            for (std::size_t i = 0; i < l.size(); ++i) {
                out += (i ? "," : "") + l[i];
            }
            out += "\n";
        }
        return out;
    }

private:
    void add_row(const std::vector<std::string>& cells) { lines_.push_back(cells); }
    Csv& cell(std::string s) {
        lines_.back().push_back(std::move(s));
        return *this;
    }

    std::size_t width_;
    std::vector<std::vector<std::string>> lines_;
};

std::vector<std::string> coord_header(int dim) {
    return dim == 1 ? std::vector<std::string>{"x"} : std::vector<std::string>{"x", "y"};
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void put_point(Csv& csv, const Point& p, int dim) {
    csv << p[0];
    if (dim == 2) {
        csv << p[1];
    }
}

std::string point_label(const Point& p, int dim) {
    std::ostringstream os;
    os << "(" << p[0];
    if (dim == 2) {
        os << ", " << p[1];
    }
    os << ")";
    return os.str();
}

class Session {
public:
    Session(const ExperimentConfig& cfg, fs::path dir, bool quiet) : cfg_(cfg), dir_(std::move(dir)), quiet_(quiet) {
        m_.version = library_version();
        m_.subcommand = to_string(cfg.subcommand);
        m_.config = cfg.echo;
    }

    template <class F>
    auto stage(const std::string& name, F&& body) -> decltype(body()) {
        current_ = name;
        log("stage " + name);
        const auto t0 = std::chrono::steady_clock::now();
        auto finish = [&] {
            m_.stages.push_back({name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
        };
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            finish();
        } else {
            auto r = body();
            finish();
            return r;
        }
    }

    void emit(const std::string& name, const Csv& csv) {
        write_atomic(dir_ / name, csv.str());
        m_.files.push_back(name);
        log("wrote " + (dir_ / name).string());
    }

    void check(const std::string& name, bool ok, const std::string& detail) {
        m_.assertions.push_back({name, ok, detail});
        log(std::string(ok ? "PASS " : "FAIL ") + name + (detail.empty() ? "" : ": " + detail));
    }

    void log(const std::string& msg) const {
        if (!quiet_) {
            std::cerr << "[fraclab] " << msg << "\n";
        }
    }

    const std::string& current() const { return current_; }
    RunManifest& manifest() { return m_; }
    const ExperimentConfig& cfg() const { return cfg_; }

private:
    const ExperimentConfig& cfg_;
    fs::path dir_;
    bool quiet_;
    std::string current_;
    RunManifest m_;
};

SolveOptions solve_options(const ExperimentConfig& c) {
    SolveOptions o;
    o.tolerance = c.tol;
    o.max_iterations = c.max_iter;
    return o;
}

GridFunction source_values(const ExperimentConfig& c, const Grid& grid) {
    if (c.source == "constant") {
        return GridFunction(grid.size(), c.K);
    }
    return sample(fields::by_name(c.source, c.domain, c.params.s, c.K), grid);
}

Point domain_center(const DomainSpec& d) {
    return d.kind == DomainKind::Interval ? Point{0.5 * (d.a + d.b), 0.0} : Point{0.0, 0.0};
}

struct Solved {
    Grid grid;
    KernelWeights weights;
    GridFunction f;
    Solution solution;
};

Solved solve_stages(Session& S) {
    const ExperimentConfig& c = S.cfg();
    Solved r;
    r.grid = S.stage("grid", [&] { return build_grid(c.domain, c.n); });
    r.weights = S.stage("weights", [&] { return assemble_weights(r.grid, c.params); });
    r.f = source_values(c, r.grid);
    r.solution = S.stage("solve", [&] { return solve(r.weights, r.f, solve_options(c)); });
    const SolveReport& rep = r.solution.report;
    std::ostringstream d;
    d << rep.message << " after " << rep.iterations << " iterations, residual " << rep.residual_norm
      << " (threshold " << rep.threshold << ")";
    S.check("solver_converged", rep.converged, d.str());
    return r;
}

void run_solve(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const Solved r = solve_stages(S);
    S.stage("write", [&] {
        const int dim = r.grid.dim();
        const GridFunction delta = distance_to_complement(r.grid);
        Csv sol(with(coord_header(dim), {"delta", "u", "u_over_delta_s"}));
        for (std::size_t i = 0; i < r.grid.size(); ++i) {
            sol.row();
            put_point(sol, r.grid.nodes[i], dim);
            sol << delta[i] << r.solution.u[i] << r.solution.u[i] / std::pow(delta[i], c.params.s);
        }
        S.emit("solution.csv", sol);
        Csv traj({"step", "energy"});
        const auto& t = r.solution.report.trajectory;
        for (std::size_t k = 0; k < t.size(); ++k) {
            traj.row() << k << t[k];
        }
        S.emit("energy.csv", traj);
    });
}

void run_eval(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const int dim = c.domain.dim();
    const AnalyticField field = fields::by_name(c.field, c.domain, c.params.s, c.amplitude);
    const QuadratureOptions q = c.quadrature();
    std::vector<PointwiseResult> results;
    S.stage("eval", [&] {
        for (const Point& x : c.points) {
            results.push_back(eval_pointwise(field, x, c.params, q));
        }
    });
    S.stage("write", [&] {
        Csv ev(with(coord_header(dim), {"value", "error_bar", "tail_bound", "cauchy_tail", "series_converged"}));
        Csv series(with(with({"point"}, coord_header(dim)), {"eps", "partial_sum"}));
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            const PointwiseResult& r = results[k];
            ev.row();
            put_point(ev, c.points[k], dim);
            ev << r.value << r.error_bar << r.tail_bound << r.cauchy_tail << r.series_converged;
            for (std::size_t j = 0; j < r.series.size(); ++j) {
                series.row() << k;
                put_point(series, c.points[k], dim);
                series << r.eps[j] << r.series[j];
            }
        }
        S.emit("eval.csv", ev);
        S.emit("eps_series.csv", series);
    });
    for (std::size_t k = 0; k < c.points.size(); ++k) {
        const PointwiseResult& r = results[k];
        const std::string at = "[x=" + point_label(c.points[k], dim) + "]";
        S.check("series_converged" + at, r.series_converged, "last increments up to " + num(r.cauchy_tail));
        if (c.expect) {
            const double gap = std::abs(r.value - *c.expect);
            const double allowed = std::max(c.expect_tol, r.error_bar);
            S.check("matches_expected" + at, gap <= allowed,
                    "|value - " + num(*c.expect) + "| = " + num(gap) + ", allowed " + num(allowed));
        }
    }
}

void verify_comparison(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const Grid grid = S.stage("grid", [&] { return build_grid(c.domain, c.n); });
    const KernelWeights w = S.stage("weights", [&] { return assemble_weights(grid, c.params); });
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Csv csv({"pair", "max_violation", "threshold", "passed"});
    int failures = 0;
    double worst = -std::numeric_limits<double>::infinity();
    S.stage("solve", [&] {
        for (int k = 0; k < c.pairs; ++k) {
            GridFunction f2(grid.size());
            GridFunction f1(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                f2[i] = c.K * uni(rng);
                f1[i] = f2[i] - c.K * std::abs(uni(rng));
            }
            const ComparisonReport r = comparison_check(f1, f2, w, solve_options(c));
            csv.row() << k << r.max_violation << r.threshold << r.passed;
            failures += r.passed ? 0 : 1;
            worst = std::max(worst, r.max_violation);
        }
    });
    S.stage("write", [&] { S.emit("comparison.csv", csv); });
    S.check("ordering_preserved", failures == 0,
            std::to_string(failures) + " of " + std::to_string(c.pairs) + " pairs violated, max(u1 - u2) = " + num(worst));
}

void verify_apriori(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const Grid grid = S.stage("grid", [&] { return build_grid(c.domain, c.n); });
    const KernelWeights w = S.stage("weights", [&] { return assemble_weights(grid, c.params); });
    const AprioriReport r = S.stage("solve", [&] { return apriori_check(w, c.K_list, solve_options(c)); });
    S.stage("write", [&] {
        Csv csv({"K", "sup_norm", "sup_norm_pow_q_over_K"});
        for (std::size_t k = 0; k < r.K.size(); ++k) {
            csv.row() << r.K[k] << r.sup_norm[k] << std::pow(r.sup_norm[k], c.params.pm1()) / r.K[k];
        }
        S.emit("apriori.csv", csv);
    });
    const double expected = 1.0 / c.params.pm1();
    S.check("slope_is_one_over_p_minus_1", std::abs(r.slope - expected) <= 1e-6,
            "slope " + num(r.slope) + ", expected " + num(expected));
    S.check("C_d_constant", r.C_d_spread <= 1e-6, "C_d " + num(r.C_d) + ", spread " + num(r.C_d_spread));
}

void verify_boundary(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const Solved s = solve_stages(S);
    const BoundaryReport r = S.stage("check", [&] { return boundary_ratio(s.solution.u, s.grid, c.params, c.rho); });
    S.stage("write", [&] {
        Csv csv({"delta", "u_over_delta_s"});
        for (const auto& [d, v] : r.profile) {
            csv.row() << d << v;
        }
        S.emit("boundary.csv", csv);
    });
    S.check("ratio_finite", std::isfinite(r.sup_ratio),
            "sup |u|/delta^s = " + num(r.sup_ratio) + " over the collar delta < " + num(r.rho));
}

std::vector<Point> centers_or_default(const ExperimentConfig& c) {
    return c.centers.empty() ? std::vector<Point>{domain_center(c.domain)} : c.centers;
}

void verify_oscillation(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const Solved s = solve_stages(S);
    const int dim = s.grid.dim();
    Csv csv(with(with(std::vector<std::string>{"center_x"}, dim == 2 ? std::vector<std::string>{"center_y"}
                                                                        : std::vector<std::string>{}),
                 {"radius", "oscillation", "nodes"}));
    bool monotone = true;
    S.stage("check", [&] {
        for (const Point& ctr : centers_or_default(c)) {
            const auto rows = oscillation_decay(s.solution.u, s.grid, ctr, c.radii);
            for (const OscillationRow& row : rows) {
                csv.row();
                put_point(csv, ctr, dim);
                csv << row.radius << row.oscillation << row.nodes;
            }
            for (const OscillationRow& a : rows) {
                for (const OscillationRow& b : rows) {
                    if (a.radius < b.radius && a.oscillation > b.oscillation) {
                        monotone = false;
                    }
                }
            }
        }
    });
    S.stage("write", [&] { S.emit("oscillation.csv", csv); });
    S.check("oscillation_monotone_in_radius", monotone, "");
}

void verify_holder(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const Solved s = solve_stages(S);
    const int dim = s.grid.dim();
    const bool boundary = c.centers.empty();
    const double K = c.source == "constant" ? std::abs(c.K) : s.f.sup_norm();
    const HolderReport r = S.stage("check", [&] {
        if (boundary) {
            const double r_max = c.radii.empty() ? std::max(c.domain.diameter() / 16.0, 16.0 * s.grid.h)
                                                 : *std::max_element(c.radii.begin(), c.radii.end());
            return boundary_holder_fit(s.solution.u, s.grid, c.params, r_max, K);
        }
        const std::vector<double> radii =
            c.radii.empty() ? dyadic_radii(4.0 * s.grid.h, std::max(c.domain.diameter() / 8.0, 16.0 * s.grid.h)) : c.radii;
        return holder_fit(s.solution.u, s.grid, c.params, c.centers, radii, K);
    });
    S.stage("write", [&] {
        const std::vector<std::string> ch =
            dim == 2 ? std::vector<std::string>{"center_x", "center_y"} : std::vector<std::string>{"center_x"};
        Csv fits(with(ch, {"delta", "alpha", "lambda", "r_squared", "constant"}));
        Csv table(with(ch, {"radius", "oscillation", "nodes"}));
        for (const HolderFit& f : r.fits) {
            fits.row();
            put_point(fits, f.center, dim);
            fits << f.delta << f.alpha << f.lambda << f.r_squared << f.constant;
            for (const OscillationRow& row : f.table) {
                table.row();
                put_point(table, f.center, dim);
                table << row.radius << row.oscillation << row.nodes;
            }
        }
        S.emit("holder.csv", fits);
        S.emit("holder_table.csv", table);
    });
    const double hi = boundary ? c.params.s + 0.05 : std::numeric_limits<double>::infinity();
    const bool ok = r.constant || (r.alpha > 0.0 && r.alpha <= hi);
    S.check(boundary ? "boundary_alpha_in_range" : "alpha_positive", ok,
            "alpha " + num(r.alpha) + (boundary ? ", expected in (0, " + num(hi) + "]" : "") + ", C " + num(r.C));
}

void verify_harnack(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const Solved s = solve_stages(S);
    double fmin = 0.0;
    for (double v : s.f.values) {
        fmin = std::min(fmin, v);
    }
    const Point ctr = centers_or_default(c).front();
    const HarnackReport r = S.stage("check", [&] {
        return harnack_check(s.solution.u, s.grid, c.params, -fmin, ctr, c.R,
                             HarnackConstants{c.harnack_C, c.harnack_C_eps, c.harnack_eps});
    });
    S.stage("write", [&] {
        Csv csv({"inf_inner", "annulus_average", "penalty", "sup_ball", "negative_tail", "sigma", "inner_nodes",
                 "annulus_nodes"});
        csv.row() << r.inf_inner << r.annulus_average << r.penalty << r.sup_ball << r.negative_tail << r.sigma
                  << r.inner_nodes << r.annulus_nodes;
        S.emit("harnack.csv", csv);
    });
    S.check("sigma_positive", std::isfinite(r.sigma) && r.sigma > 0.0, "sigma " + num(r.sigma));
}

void verify_delta_s(Session& S) {
    const ExperimentConfig& c = S.cfg();
    const int dim = c.domain.dim();
    const double rho = c.rho > 0.0 ? c.rho : c.domain.diameter() / 4.0;
    const DeltaSReport r =
        S.stage("eval", [&] { return delta_s_rhs_check(c.domain, c.params, rho, c.points, c.quadrature()); });
    S.stage("write", [&] {
        Csv csv(with(coord_header(dim), {"delta", "value", "error_bar", "refined_value", "refined_error_bar"}));
        for (std::size_t k = 0; k < r.probes.size(); ++k) {
            csv.row();
            put_point(csv, r.probes[k], dim);
            csv << r.delta[k] << r.values[k].value << r.values[k].error_bar << r.refined[k].value
                << r.refined[k].error_bar;
        }
        S.emit("delta_s.csv", csv);
    });
    S.check("bounded_and_stable", r.passed,
            "sup " + num(r.sup) + ", refined " + num(r.sup_refined) + ", drift " + num(r.drift));
}

void run_verify(Session& S) {
    static const std::map<std::string, std::function<void(Session&)>> checks = {
        {"comparison", verify_comparison}, {"apriori", verify_apriori},     {"boundary", verify_boundary},
        {"oscillation", verify_oscillation}, {"holder", verify_holder},     {"harnack", verify_harnack},
        {"delta_s", verify_delta_s},
    };
    checks.at(S.cfg().check)(S);
}

void run_suite(Session& S) {
    const ExperimentConfig& c = S.cfg();
    std::vector<acceptance::CriterionResult> results;
    S.stage("battery", [&] {
        results = acceptance::run_battery(c.criteria, [&](const acceptance::CriterionResult& r) {
            S.log(r.id + (r.passed ? " PASS " : " FAIL ") + r.title + " (" + num(r.seconds) + " s)");
        });
    });
    S.stage("write", [&] {
        Csv summary({"id", "title", "passed", "detail"});
        Csv metrics({"id", "metric", "value"});
        for (const auto& r : results) {
            summary.row() << r.id << r.title << r.passed << r.detail;
            for (const auto& [name, value] : r.metrics) {
                metrics.row() << r.id << name << value;
            }
        }
        S.emit("summary.csv", summary);
        S.emit("metrics.csv", metrics);
    });
    for (const auto& r : results) {
        S.manifest().stages.push_back({"battery/" + r.id, r.seconds});
        S.check(r.id, r.passed, r.detail);
    }
}

// Outputs of an earlier run in the same directory; removed so the new manifest covers every file.
void clear_previous(const fs::path& dir) {
    const fs::path old = dir / kManifestName;
    if (!fs::exists(old)) {
        return;
    }
    try {
        std::ifstream f(old);
        const nlohmann::json j = nlohmann::json::parse(f);
        for (const auto& name : j.at("files")) {
            const fs::path p = dir / name.get<std::string>();
            if (p.parent_path() == dir) {
                fs::remove(p);
            }
        }
    } catch (const std::exception&) {
        // An unreadable manifest is simply overwritten.
    }
}

}  // namespace

std::string manifest_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["artifact"] = "fraclab";
    j["version"] = m.version;
    j["subcommand"] = m.subcommand;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.config) {
        cfg[k] = v;
    }
    j["config"] = cfg;
    nlohmann::ordered_json stages = nlohmann::ordered_json::array();
    for (const StageTiming& s : m.stages) {
        stages.push_back({{"name", s.name}, {"seconds", s.seconds}});
    }
    j["stages"] = stages;
    j["files"] = m.files;
    nlohmann::ordered_json as = nlohmann::ordered_json::array();
    int failed = 0;
    for (const AssertionRecord& a : m.assertions) {
        as.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
        failed += a.passed ? 0 : 1;
    }
    j["assertions"] = as;
    j["failed_assertions"] = failed;
    if (!m.failed_stage.empty()) {
        j["failed_stage"] = m.failed_stage;
        j["error"] = m.error;
    }
    j["exit_code"] = m.exit_code;
    return j.dump(2) + "\n";
}

RunManifest run(const ExperimentConfig& cfg, const fs::path& out_dir, bool quiet) {
    fs::create_directories(out_dir);
    clear_previous(out_dir);
    Session S(cfg, out_dir, quiet);
    RunManifest& m = S.manifest();
    try {
        switch (cfg.subcommand) {
            case Subcommand::Solve: run_solve(S); break;
            case Subcommand::EvalOp: run_eval(S); break;
            case Subcommand::Verify: run_verify(S); break;
            case Subcommand::Suite: run_suite(S); break;
        }
        const bool all = std::all_of(m.assertions.begin(), m.assertions.end(),
                                     [](const AssertionRecord& a) { return a.passed; });
        m.exit_code = all ? 0 : 1;
    } catch (const Error& e) {
        m.failed_stage = S.current().empty() ? "setup" : S.current();
        m.error = e.what();
        m.exit_code = 2;
        S.log("error in stage " + m.failed_stage + ": " + e.what());
    }
    m.files.push_back(kManifestName);
    write_atomic(out_dir / kManifestName, manifest_json(m));
    return m;
}

}  // namespace fraclab::cli
