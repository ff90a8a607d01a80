#include "volplan/scenario.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace volplan {

namespace {

bool finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }

constexpr std::array<std::string_view, kNumCommands> kCommandNames = {
    "go_straight_forward", "go_straight_left", "go_straight_right",
    "left_turn",           "right_turn",       "left_u_turn",
};

constexpr std::array<std::string_view, kNumDecisions> kDecisionNames = {
    "keep_stationary", "keep_speed", "accelerate", "decelerate",
};

}  // namespace

std::size_t steps_for(double horizon_s, double frequency_hz) {
    return static_cast<std::size_t>(std::llround(horizon_s * frequency_hz));
}

EgoStateHistory::EgoStateHistory(std::vector<EgoState> steps, double frequency_hz)
    : steps_(std::move(steps)), frequency_hz_(frequency_hz) {
    if (steps_.empty()) throw std::invalid_argument("history needs at least one step");
    if (!(frequency_hz_ > 0.0) || !std::isfinite(frequency_hz_)) {
        throw std::invalid_argument("history frequency must be positive");
    }
    for (const auto& s : steps_) {
        if (!finite(s.position) || !finite(s.velocity) || !finite(s.acceleration)) {
            throw std::invalid_argument("history holds a non-finite component");
        }
    }
}

double EgoStateHistory::timestamp(std::size_t i) const {
    return step_offset(i) / frequency_hz_;
}

PlanTrajectory::PlanTrajectory(std::vector<Vec2> waypoints, double horizon_s, double frequency_hz)
    : waypoints_(std::move(waypoints)), horizon_s_(horizon_s), frequency_hz_(frequency_hz) {
    if (!(frequency_hz_ > 0.0) || !std::isfinite(frequency_hz_)) {
        throw std::invalid_argument("trajectory frequency must be positive");
    }
    if (!(horizon_s_ >= 0.0) || !std::isfinite(horizon_s_)) {
        throw std::invalid_argument("trajectory horizon must be non-negative");
    }
    if (waypoints_.size() != steps_for(horizon_s_, frequency_hz_)) {
        throw std::invalid_argument("trajectory length does not equal horizon x frequency");
    }
    for (const auto& w : waypoints_) {
        if (!finite(w)) throw std::invalid_argument("trajectory holds a non-finite waypoint");
    }
}

PlanTrajectory PlanTrajectory::from_waypoints(std::vector<Vec2> waypoints, double frequency_hz) {
    const double horizon = static_cast<double>(waypoints.size()) / frequency_hz;
    return PlanTrajectory(std::move(waypoints), horizon, frequency_hz);
}

PlanTrajectory PlanTrajectory::truncated(double horizon_s) const {
    const std::size_t n = steps_for(horizon_s, frequency_hz_);
    if (n > waypoints_.size()) throw std::invalid_argument("trajectory shorter than requested horizon");
    return PlanTrajectory({waypoints_.begin(), waypoints_.begin() + static_cast<std::ptrdiff_t>(n)},
                          horizon_s, frequency_hz_);
}

std::string_view to_string(BehaviorCommand c) { return kCommandNames.at(static_cast<std::size_t>(c)); }
std::string_view to_string(MetaDecision d) { return kDecisionNames.at(static_cast<std::size_t>(d)); }

std::optional<BehaviorCommand> parse_command(std::string_view s) {
    for (std::size_t i = 0; i < kCommandNames.size(); ++i) {
        if (kCommandNames[i] == s) return static_cast<BehaviorCommand>(i);
    }
    return std::nullopt;
}

std::optional<MetaDecision> parse_decision(std::string_view s) {
    for (std::size_t i = 0; i < kDecisionNames.size(); ++i) {
        if (kDecisionNames[i] == s) return static_cast<MetaDecision>(i);
    }
    return std::nullopt;
}

PlanningProfile PlanningProfile::womd() { return {"womd", 1.0, 5.0, 5.0, 2}; }
PlanningProfile PlanningProfile::nuscenes() { return {"nuscenes", 1.0, 3.0, 2.0, 1}; }

PlanningProfile PlanningProfile::by_name(std::string_view name) {
    if (name == "womd") return womd();
    if (name == "nuscenes") return nuscenes();
    throw std::invalid_argument("unknown planning profile: " + std::string(name));
}

void Scenario::validate(const PlanningProfile& prof) const {
    if (ground_truth.frequency_hz() != prof.frequency_hz) {
        throw std::invalid_argument("scenario " + id + ": ground-truth rate differs from profile");
    }
    if (ground_truth.size() < prof.horizon_steps()) {
        throw std::invalid_argument("scenario " + id + ": ground truth shorter than planning horizon");
    }
    if (!ground_truth_headings.empty() && ground_truth_headings.size() != ground_truth.size()) {
        throw std::invalid_argument("scenario " + id + ": heading count differs from waypoint count");
    }
    if (frames.size() != ego_poses.size()) {
        throw std::invalid_argument("scenario " + id + ": frame and pose counts differ");
    }
    if (!ego_poses.empty()) {
        const auto& p0 = ego_poses.front();
        if (!p0.rotation.isIdentity(1e-12) || !p0.translation.isZero(1e-12)) {
            throw std::invalid_argument("scenario " + id + ": current-frame pose must be identity");
        }
    }
    for (const auto& cam : rig) cam.validate();
}

}  // namespace volplan
