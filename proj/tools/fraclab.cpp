// fraclab <subcommand> --config <path> [--out <dir>] [--override-singular-check] [--quiet]

#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fraclab/config.hpp"
#include "fraclab/errors.hpp"
#include "fraclab/runner.hpp"

namespace {

struct Args {
    std::string config;
    std::string out;
    bool override_singular = false;
    bool quiet = false;
};

void add_common(CLI::App* sub, Args& a) {
    sub->add_option("--config", a.config, "Experiment config (TOML key = value)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", a.out, "Output directory; overrides the config key 'out'");
    sub->add_flag("--override-singular-check", a.override_singular,
                  "Evaluate pointwise even when p < 2 and s >= 2(p-1)/p");
    sub->add_flag("--quiet", a.quiet, "No progress output on stderr");
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = fraclab::cli;
    CLI::App app{"Fractional p-Laplacian experiments: solve, evaluate, verify, run the acceptance battery"};
    app.set_version_flag("--version", cli::library_version());
    app.require_subcommand(1);
    Args args;
    for (const char* name : {"solve", "eval-op", "verify", "suite"}) {
        add_common(app.add_subcommand(name, std::string("Run the ") + name + " pipeline"), args);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string name = app.get_subcommands().front()->get_name();

    cli::ExperimentConfig cfg;
    try {
        cfg = cli::load_config(args.config, cli::parse_subcommand(name), args.override_singular);
    } catch (const fraclab::Error& e) {
        std::cerr << "fraclab " << name << ": " << e.what() << "\n";
        if (!args.out.empty()) {
            cli::RunManifest m;
            m.version = cli::library_version();
            m.subcommand = name;
            m.failed_stage = "config";
            m.error = e.what();
            m.exit_code = 2;
            m.files.push_back(cli::kManifestName);
            std::filesystem::create_directories(args.out);
            cli::write_atomic(std::filesystem::path(args.out) / cli::kManifestName, cli::manifest_json(m));
        }
        return 2;
    }
    const std::filesystem::path out = std::filesystem::path(args.out.empty() ? cfg.out : args.out);
    try {
        const cli::RunManifest m = cli::run(cfg, out, args.quiet);
        if (!args.quiet) {
            int failed = 0;
            for (const auto& a : m.assertions) {
                failed += a.passed ? 0 : 1;
            }
            std::cerr << "fraclab " << name << ": " << m.assertions.size() - failed << "/" << m.assertions.size()
                      << " assertions passed";
            if (!m.failed_stage.empty()) {
                std::cerr << "; failed in stage " << m.failed_stage << ": " << m.error;
            }
            std::cerr << " (manifest: " << (out / cli::kManifestName).string() << ")\n";
        }
        return m.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "fraclab " << name << ": " << e.what() << "\n";
        return 2;
    }
}
