#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "volplan/metrics.hpp"
#include "volplan/planner.hpp"

// JSON run configuration. Every key is optional; see configs/desk.json.

namespace volplan {

struct RunConfig {
    std::string planner = "toy";  // toy | oracle | biased-sampler
    std::uint64_t seed = 0;
    std::vector<double> horizons{1.0, 3.0, 5.0};
    bool strict_divisor_7 = false;
    int threads = 1;
    ToyPolicyConfig policy;
    std::optional<std::filesystem::path> checkpoint;
    Vec2 oracle_offset;
    double oracle_noise_sigma = 0.0;
    double stationary_prob = 0.45;

    void validate() const;
    // Stable JSON echo of the effective configuration.
    std::string to_json() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace volplan
