#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fraclab/config.hpp"

namespace fraclab::cli {

struct StageTiming {
    std::string name;
    double seconds = 0.0;
};

struct AssertionRecord {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RunManifest {
    std::string version;
    std::string subcommand;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<StageTiming> stages;
    /// Emitted files relative to the output directory, the manifest included.
    std::vector<std::string> files;
    std::vector<AssertionRecord> assertions;
    /// Set when a stage raised; earlier outputs stay on disk.
    std::string failed_stage;
    std::string error;
    /// 0 all assertions hold, 1 an assertion failed, 2 configuration or numerical error.
    int exit_code = 0;
};

inline constexpr const char* kManifestName = "manifest.json";

std::string library_version();

/// Executes the configured subcommand, writing CSV tables and the manifest into out_dir.
/// Library errors are caught and reported through the manifest and exit code 2.
RunManifest run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, bool quiet = true);

std::string manifest_json(const RunManifest& m);

/// Writes text to path through a temporary file and a rename.
void write_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace fraclab::cli
