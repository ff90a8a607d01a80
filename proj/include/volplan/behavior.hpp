#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "volplan/scenario.hpp"

namespace volplan {

enum class Behavior : std::uint8_t {
    Stop,
    StraightForward,
    StraightLeft,
    StraightRight,
    LeftTurn,
    RightTurn,
    LeftUTurn,
};
inline constexpr int kNumBehaviors = 7;

std::string_view to_string(Behavior b);
std::optional<Behavior> parse_behavior(std::string_view s);

// Every behavior but Stop has a matching command.
std::optional<BehaviorCommand> command_for(Behavior b);

// Ego-frame future samples starting at t = 0. Headings in radians, unwrapped
// (a U-turn ends near +pi, never jumps to -pi).
struct FutureTrack {
    std::vector<Vec2> positions;
    std::vector<double> headings;
    double dt = 0.2;

    double duration_s() const { return positions.empty() ? 0.0 : (positions.size() - 1) * dt; }
    void validate() const;

    // Prepends the ego origin to the waypoints. Headings are taken from
    // `headings` (aligned with the waypoints) or derived from the positions.
    static FutureTrack from_trajectory(const PlanTrajectory& traj, const std::vector<double>& headings = {});
    // First duration_s seconds (rounded to whole samples).
    FutureTrack prefix(double duration_s) const;
};

// Heading from consecutive displacement; steps shorter than 1 cm keep the
// previous heading. The first sample is 0 (ego frame).
std::vector<double> derive_headings(const std::vector<Vec2>& positions);

struct BehaviorRules {
    double stop_movement_m = 5.0;
    double stop_speed_mps = 2.0;
    double turn_heading_deg = 30.0;
    double u_turn_x_m = -5.0;
    double lateral_y_m = 5.0;
};

double max_speed(const FutureTrack& track);
double max_displacement(const FutureTrack& track);

Behavior classify_behavior(const FutureTrack& track, const BehaviorRules& rules = {});

// Classifies the first base_horizon seconds; while that reads as Stop and more
// future is recorded, widens the window by step_s. Falls back to
// GoStraightForward once the recording ends.
BehaviorCommand derive_command(const FutureTrack& full_future, double base_horizon_s = 8.0, double step_s = 2.0,
                               const BehaviorRules& rules = {});

// Mirror across the ego x-axis (y -> -y, heading -> -heading).
FutureTrack mirrored(const FutureTrack& track);

}  // namespace volplan
