#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volplan/behavior.hpp"
#include "volplan/planner.hpp"
#include "volplan/scenario.hpp"

namespace volplan {

inline constexpr const char* kReportSchema = "volplan.eval/1";

// Mean Euclidean error over the first round(horizon * frequency) waypoints.
double ade(const PlanTrajectory& pred, const PlanTrajectory& gt, double horizon_s);

// Pairwise (cascade) sum; the result depends only on the element order.
double pairwise_sum(std::span<const double> values);

struct BehaviorSample {
    double ade = 0.0;
    Behavior behavior = Behavior::StraightForward;
};

enum class BadeDivisor {
    PresentBehaviors,  // mean over behaviors that have samples
    AllBehaviors,      // literal 1/7 weighting; absent behaviors contribute 0
};

struct BadeResult {
    double value = 0.0;
    std::array<std::optional<double>, kNumBehaviors> per_behavior{};
    std::array<std::size_t, kNumBehaviors> counts{};
    std::vector<Behavior> absent;
};

BadeResult bade(std::span<const BehaviorSample> samples, BadeDivisor divisor = BadeDivisor::PresentBehaviors);
double mean_ade(std::span<const BehaviorSample> samples);

// Behavior label of a logged future: the first 8 s, or all of it if shorter.
Behavior label_behavior(const Scenario& scenario);

struct EvalConfig {
    std::vector<double> horizons{1.0, 3.0, 5.0};
    BadeDivisor divisor = BadeDivisor::PresentBehaviors;
    int threads = 1;
    std::uint64_t seed = 0;
    // Serialized JSON object copied verbatim into the report.
    std::string config_echo = "{}";
};

struct HorizonMetrics {
    double horizon_s = 0.0;
    double ade = 0.0;
    double bade = 0.0;
    std::array<std::optional<double>, kNumBehaviors> per_behavior{};
};

struct FailedSample {
    std::string scenario_id;
    std::string message;
};

struct EvalReport {
    std::string planner;
    BadeDivisor divisor = BadeDivisor::PresentBehaviors;
    std::size_t scenarios = 0;
    std::array<std::size_t, kNumBehaviors> counts{};
    std::vector<Behavior> absent;
    std::vector<HorizonMetrics> horizons;
    // Fraction of stages whose decision matches the label of the logged future.
    std::array<std::optional<double>, kNumBehaviors> decision_accuracy{};
    std::size_t dropped_candidates = 0;
    std::vector<FailedSample> failures;
    std::string config_echo = "{}";

    // Violated report invariants; empty when the report is consistent.
    std::vector<std::string> self_check() const;
    std::string to_json() const;
    std::string to_csv() const;
};

EvalReport evaluate(std::span<const Scenario> scenarios, const Planner& planner, const EvalConfig& config);

}  // namespace volplan
