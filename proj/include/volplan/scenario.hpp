#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "volplan/geometry.hpp"

namespace volplan {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct EgoState {
    Vec2 position;      // m
    Vec2 velocity;      // m/s
    Vec2 acceleration;  // m/s^2
};

// Past ego states, oldest first. Step i sits at t = -(size() - i) / frequency_hz,
// so the last entry is the state one sample before the current frame.
class EgoStateHistory {
public:
    EgoStateHistory(std::vector<EgoState> steps, double frequency_hz);

    const std::vector<EgoState>& steps() const { return steps_; }
    double frequency_hz() const { return frequency_hz_; }
    std::size_t size() const { return steps_.size(); }
    double timestamp(std::size_t i) const;
    // 1-based age of step i: the oldest step is history[-size()], the newest history[-1].
    int step_offset(std::size_t i) const { return -static_cast<int>(steps_.size() - i); }
    const EgoState& latest() const { return steps_.back(); }

private:
    std::vector<EgoState> steps_;
    double frequency_hz_;
};

// Future waypoints at t = 1..T_f samples.
class PlanTrajectory {
public:
    PlanTrajectory() = default;
    PlanTrajectory(std::vector<Vec2> waypoints, double horizon_s, double frequency_hz);

    // Builds a trajectory whose horizon is implied by the waypoint count.
    static PlanTrajectory from_waypoints(std::vector<Vec2> waypoints, double frequency_hz);

    const std::vector<Vec2>& waypoints() const { return waypoints_; }
    double horizon_s() const { return horizon_s_; }
    double frequency_hz() const { return frequency_hz_; }
    std::size_t size() const { return waypoints_.size(); }
    const Vec2& operator[](std::size_t i) const { return waypoints_[i]; }

    // First round(horizon * frequency) waypoints.
    PlanTrajectory truncated(double horizon_s) const;

    friend bool operator==(const PlanTrajectory&, const PlanTrajectory&) = default;

private:
    std::vector<Vec2> waypoints_;
    double horizon_s_ = 0.0;
    double frequency_hz_ = 1.0;
};

std::size_t steps_for(double horizon_s, double frequency_hz);

enum class BehaviorCommand : std::uint8_t {
    GoStraightForward,
    GoStraightLeft,
    GoStraightRight,
    LeftTurn,
    RightTurn,
    LeftUTurn,
};
inline constexpr int kNumCommands = 6;

enum class MetaDecision : std::uint8_t {
    KeepStationary,
    KeepSpeed,
    Accelerate,
    Decelerate,
};
inline constexpr int kNumDecisions = 4;

std::string_view to_string(BehaviorCommand c);
std::string_view to_string(MetaDecision d);
std::optional<BehaviorCommand> parse_command(std::string_view s);
std::optional<MetaDecision> parse_decision(std::string_view s);

// Sampling layout of a benchmark: history length, planning horizon, rate and
// how many meta-decision stages the target carries.
struct PlanningProfile {
    std::string name;
    double history_s = 1.0;
    double horizon_s = 5.0;
    double frequency_hz = 5.0;
    int decision_stages = 2;

    std::size_t history_steps() const { return steps_for(history_s, frequency_hz); }
    std::size_t horizon_steps() const { return steps_for(horizon_s, frequency_hz); }
    double stage_duration_s() const { return horizon_s / decision_stages; }

    static PlanningProfile womd();
    static PlanningProfile nuscenes();
    static PlanningProfile by_name(std::string_view name);
};

// Static occupied region used to synthesize feature maps. Coordinates are in
// the ego frame of the sensor frame that owns the blob.
struct SceneBlob {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 1.0;
    // Explicit feature; when empty the feature is drawn from feature_seed.
    std::vector<double> feature;
    std::uint64_t feature_seed = 0;
};

struct SensorFrame {
    double timestamp_s = 0.0;
    // Either explicit per-view maps, or blobs from which maps are rendered.
    std::vector<FeatureMap> maps;
    std::vector<SceneBlob> blobs;
};

struct Scenario {
    std::string id;
    std::string profile = "womd";
    EgoStateHistory history{{EgoState{}}, 5.0};
    BehaviorCommand command = BehaviorCommand::GoStraightForward;
    // Logged future, possibly longer than the planning horizon.
    PlanTrajectory ground_truth;
    // Optional logged headings aligned with ground_truth waypoints (rad).
    std::vector<double> ground_truth_headings;
    CameraRig rig;
    // frames[0] is the current frame, frames[k] is k samples back.
    std::vector<SensorFrame> frames;
    // Frame-k ego -> current ego. ego_poses[0] is the identity.
    std::vector<RigidPose> ego_poses;

    void validate(const PlanningProfile& profile) const;
};

}  // namespace volplan
