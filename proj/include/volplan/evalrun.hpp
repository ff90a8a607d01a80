#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "volplan/metrics.hpp"
#include "volplan/planner.hpp"
#include "volplan/run_config.hpp"

namespace volplan {

// Builds the planner named in the config; the toy planner loads the
// checkpoint when one is configured.
std::unique_ptr<Planner> make_planner(const RunConfig& config);

struct EvalRunOptions {
    std::filesystem::path corpus;
    std::optional<std::filesystem::path> config;
    std::optional<std::string> planner;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<double>> horizons;
    std::filesystem::path out;
    std::optional<std::filesystem::path> csv;
    bool strict_divisor_7 = false;
    std::optional<int> threads;
    std::optional<int> k;
    std::optional<double> top_p;
};

// Config file first, then command-line overrides.
RunConfig resolve_run_config(const EvalRunOptions& options);

struct EvalRunResult {
    EvalReport report;
    std::vector<std::string> violations;
};

// Reads the corpus, evaluates, writes the report files.
EvalRunResult run_evalrun(const EvalRunOptions& options);

}  // namespace volplan
