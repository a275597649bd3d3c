#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace fraclab::acceptance {

struct CriterionResult {
    std::string id;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    /// Named measurements backing the verdict.
    std::vector<std::pair<std::string, double>> metrics;
};

/// A1 ... A12.
std::vector<std::string> criterion_ids();

std::string criterion_title(const std::string& id);

/// Runs one criterion; numerical failures are reported as a failed result, not thrown.
CriterionResult run_criterion(const std::string& id);

/// Runs the listed criteria (all when empty) in order; `on_result` sees each result as it lands.
std::vector<CriterionResult> run_battery(const std::vector<std::string>& ids = {},
                                         const std::function<void(const CriterionResult&)>& on_result = {});

}  // namespace fraclab::acceptance
