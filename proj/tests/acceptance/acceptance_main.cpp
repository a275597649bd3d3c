// Acceptance battery: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <cstdio>
#include <string>
#include <vector>

#include "fraclab/acceptance.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> ids(argv + 1, argv + argc);
    int failed = 0;
    fraclab::acceptance::run_battery(ids, [&](const fraclab::acceptance::CriterionResult& r) {
        std::printf("%-4s %s  %s (%.1fs)\n", r.id.c_str(), r.passed ? "PASS" : "FAIL", r.title.c_str(), r.seconds);
        for (const auto& [name, value] : r.metrics) {
            std::printf("       %s = %.10g\n", name.c_str(), value);
        }
        if (!r.passed) {
            std::printf("       reason: %s\n", r.detail.c_str());
            ++failed;
        }
        std::fflush(stdout);
    });
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
