#include <cstdlib>
#include <iostream>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "twpa/experiment.hpp"

namespace {

const char* label(twpa::Diagnostic::Severity s) {
    return s == twpa::Diagnostic::Severity::error ? "error" : "warning";
}

void print(const std::vector<twpa::Diagnostic>& diags) {
    for (const auto& d : diags) {
        std::cerr << label(d.severity) << ": " << d.message << "\n";
    }
}

int default_threads() {
    if (const char* env = std::getenv("TWPA_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
        }
        std::cerr << "warning: ignoring TWPA_THREADS=" << env << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Harmonic-balance TWPA simulator with pump phase-noise propagation"};
    app.set_version_flag("--version", TWPA_VERSION);
    app.require_subcommand(1);

    int threads = default_threads();
    app.add_option("--threads", threads, "worker threads (default: TWPA_THREADS or all cores)")
        ->check(CLI::PositiveNumber);

    std::string config;
    std::string out;
    std::uint64_t seed = 0;

    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config, "experiment config")->required()->check(CLI::ExistingFile);
    auto* out_opt = run->add_option("--out", out, "output directory (overrides [output] directory)");
    auto* seed_opt = run->add_option("--seed", seed, "Monte-Carlo seed");

    auto* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("config", config, "experiment config")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    if (threads > 0) {
        omp_set_num_threads(threads);
    }

    if (*validate) {
        const auto result = twpa::validate_config(config);
        print(result.diagnostics);
        if (!result.ok()) {
            return 1;
        }
        std::cout << config << ": ok\n";
        return 0;
    }

    try {
        const auto cfg = twpa::load_config(config);
        twpa::RunOptions opts;
        if (*out_opt) {
            opts.output_directory = out;
        }
        if (*seed_opt) {
            opts.seed = seed;
        }
        const auto summary = twpa::run_experiment(cfg, opts);
        print(summary.diagnostics);
        for (const auto& f : summary.files) {
            std::cout << f.string() << "\n";
        }
        return summary.status;
    } catch (const twpa::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
