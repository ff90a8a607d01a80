#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "volplan/scenario.hpp"

// Line-oriented text format for planner prompts and targets.
//
//   prompt:                           target:
//     command: left_turn                decision[1]: keep_speed
//     history[-5]: p=(x, y) v=(x, y) a=(x, y)    decision[2]: accelerate
//     ...                               waypoints: (x, y);(x, y);...
//     history[-1]: ...
//
// Every number carries exactly two decimals, rounded half away from zero, and
// always uses '.' as decimal separator.

namespace volplan {

// Two-decimal quantization used by the codec.
double quantize2(double x);
// Formats x with two decimals, half away from zero; "-0.00" is written "0.00".
std::string format2(double x);

std::string encode_prompt(const EgoStateHistory& history, BehaviorCommand command);

// Throws std::invalid_argument when decisions.size() != expected_stages.
std::string encode_target(const std::vector<MetaDecision>& decisions, const PlanTrajectory& traj,
                          int expected_stages);

class PlanParseError : public std::runtime_error {
public:
    enum class Kind {
        MissingSection,
        MalformedNumber,
        CountMismatch,
        UnknownDecision,
    };

    PlanParseError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct DecodedPlan {
    std::vector<MetaDecision> decisions;
    PlanTrajectory trajectory;
};

// Parses a target text. Expects `expected_stages` decision lines and exactly
// `expected_waypoints` pairs; throws PlanParseError otherwise.
DecodedPlan decode_plan(std::string_view text, int expected_stages, std::size_t expected_waypoints,
                        double frequency_hz);

DecodedPlan decode_plan(std::string_view text, const PlanningProfile& profile);

}  // namespace volplan
