#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fraclab/domain.hpp"
#include "fraclab/errors.hpp"
#include "fraclab/kernel.hpp"

namespace fraclab::cli {

enum class Subcommand { Solve, EvalOp, Verify, Suite };

Subcommand parse_subcommand(const std::string& name);
std::string to_string(Subcommand sub);

/// One problem found while reading a config file.
struct ConfigIssue {
    int line = 0;  ///< 1-based; 0 when the problem is not tied to a line
    std::string key;
    std::string message;
};

/// Raised by parse_config with every issue found, not just the first.
class ConfigFileError : public ConfigError {
public:
    explicit ConfigFileError(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
    std::vector<ConfigIssue> issues_;
};

/// Checkers reachable through `verify`.
std::vector<std::string> checker_names();

struct ExperimentConfig {
    Subcommand subcommand = Subcommand::Solve;
    DomainSpec domain{};
    OperatorParams params{};
    int n = 256;

    /// "constant" (value K) or a closed-form field name.
    std::string source = "constant";
    double K = 1.0;

    std::string field = "half_space";
    double amplitude = 1.0;
    std::vector<Point> points;
    /// +inf integrates until the growth bound is negligible.
    double far_cutoff = std::numeric_limits<double>::infinity();
    int depth = 40;
    std::optional<double> expect;
    double expect_tol = 1.0e-4;

    std::string check;
    std::vector<double> K_list;
    std::vector<double> radii;
    std::vector<Point> centers;
    /// <= 0 selects the checker default.
    double rho = 0.0;
    double R = 0.0;
    double harnack_C = 1.0;
    double harnack_C_eps = 1.0;
    double harnack_eps = 0.0;
    int pairs = 100;
    std::uint64_t seed = 7;

    double tol = 1.0e-10;
    int max_iter = 50000;
    bool override_singular_check = false;
    std::vector<std::string> criteria;
    std::string out = "out";

    /// (key, value as written) in file order.
    std::vector<std::pair<std::string, std::string>> echo;

    QuadratureOptions quadrature() const;
};

/// Flat TOML subset: `key = value` lines, `#` comments, numbers, booleans, double-quoted
/// strings and (nested) arrays of those. Tables are rejected.
ExperimentConfig parse_config(const std::string& text, Subcommand sub, bool override_singular_check = false);

ExperimentConfig load_config(const std::string& path, Subcommand sub, bool override_singular_check = false);

}  // namespace fraclab::cli
