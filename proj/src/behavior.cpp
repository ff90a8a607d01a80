#include "volplan/behavior.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace volplan {

namespace {

constexpr std::array<std::string_view, kNumBehaviors> kBehaviorNames = {
    "stop", "straight_forward", "straight_left", "straight_right", "left_turn", "right_turn", "left_u_turn",
};

constexpr double kMinHeadingStep = 0.01;  // m

double wrap_pi(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

std::string_view to_string(Behavior b) { return kBehaviorNames.at(static_cast<std::size_t>(b)); }

std::optional<Behavior> parse_behavior(std::string_view s) {
    for (std::size_t i = 0; i < kBehaviorNames.size(); ++i) {
        if (kBehaviorNames[i] == s) return static_cast<Behavior>(i);
    }
    return std::nullopt;
}

std::optional<BehaviorCommand> command_for(Behavior b) {
    switch (b) {
        case Behavior::Stop: return std::nullopt;
        case Behavior::StraightForward: return BehaviorCommand::GoStraightForward;
        case Behavior::StraightLeft: return BehaviorCommand::GoStraightLeft;
        case Behavior::StraightRight: return BehaviorCommand::GoStraightRight;
        case Behavior::LeftTurn: return BehaviorCommand::LeftTurn;
        case Behavior::RightTurn: return BehaviorCommand::RightTurn;
        case Behavior::LeftUTurn: return BehaviorCommand::LeftUTurn;
    }
    return std::nullopt;
}

void FutureTrack::validate() const {
    if (positions.size() < 2) throw std::invalid_argument("future track needs at least two samples");
    if (headings.size() != positions.size()) throw std::invalid_argument("future track heading count mismatch");
    if (!(dt > 0.0)) throw std::invalid_argument("future track step must be positive");
    for (double h : headings) {
        if (!std::isfinite(h)) throw std::invalid_argument("future track heading is not finite");
    }
}

std::vector<double> derive_headings(const std::vector<Vec2>& positions) {
    std::vector<double> out(positions.size(), 0.0);
    for (std::size_t i = 1; i < positions.size(); ++i) {
        const double dx = positions[i].x - positions[i - 1].x;
        const double dy = positions[i].y - positions[i - 1].y;
        if (std::hypot(dx, dy) < kMinHeadingStep) {
            out[i] = out[i - 1];
        } else {
            out[i] = out[i - 1] + wrap_pi(std::atan2(dy, dx) - out[i - 1]);
        }
    }
    return out;
}

FutureTrack FutureTrack::from_trajectory(const PlanTrajectory& traj, const std::vector<double>& headings) {
    FutureTrack t;
    t.dt = 1.0 / traj.frequency_hz();
    t.positions.reserve(traj.size() + 1);
    t.positions.push_back({0.0, 0.0});
    t.positions.insert(t.positions.end(), traj.waypoints().begin(), traj.waypoints().end());
    if (headings.empty()) {
        t.headings = derive_headings(t.positions);
    } else {
        if (headings.size() != traj.size()) throw std::invalid_argument("heading count differs from waypoint count");
        t.headings.reserve(headings.size() + 1);
        t.headings.push_back(0.0);
        t.headings.insert(t.headings.end(), headings.begin(), headings.end());
    }
    return t;
}

FutureTrack FutureTrack::prefix(double duration) const {
    const auto n = std::min(positions.size(), static_cast<std::size_t>(std::llround(duration / dt)) + 1);
    FutureTrack t;
    t.dt = dt;
    t.positions.assign(positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(n));
    t.headings.assign(headings.begin(), headings.begin() + static_cast<std::ptrdiff_t>(n));
    return t;
}

double max_speed(const FutureTrack& track) {
    double best = 0.0;
    for (std::size_t i = 1; i < track.positions.size(); ++i) {
        const double d = std::hypot(track.positions[i].x - track.positions[i - 1].x,
                                    track.positions[i].y - track.positions[i - 1].y);
        best = std::max(best, d / track.dt);
    }
    return best;
}

double max_displacement(const FutureTrack& track) {
    double best = 0.0;
    const Vec2 start = track.positions.front();
    for (const auto& p : track.positions) best = std::max(best, std::hypot(p.x - start.x, p.y - start.y));
    return best;
}

Behavior classify_behavior(const FutureTrack& track, const BehaviorRules& rules) {
    track.validate();
    if (max_displacement(track) < rules.stop_movement_m && max_speed(track) < rules.stop_speed_mps) {
        return Behavior::Stop;
    }
    const double heading_deg = track.headings.back() * 180.0 / std::numbers::pi;
    const Vec2 disp{track.positions.back().x - track.positions.front().x,
                    track.positions.back().y - track.positions.front().y};
    if (heading_deg > rules.turn_heading_deg) {
        return disp.x >= rules.u_turn_x_m ? Behavior::LeftTurn : Behavior::LeftUTurn;
    }
    if (heading_deg < -rules.turn_heading_deg) return Behavior::RightTurn;
    if (disp.y > rules.lateral_y_m) return Behavior::StraightLeft;
    if (disp.y < -rules.lateral_y_m) return Behavior::StraightRight;
    return Behavior::StraightForward;
}

BehaviorCommand derive_command(const FutureTrack& full_future, double base_horizon_s, double step_s,
                               const BehaviorRules& rules) {
    full_future.validate();
    if (!(base_horizon_s > 0.0) || !(step_s > 0.0)) throw std::invalid_argument("command windows must be positive");
    const double total = full_future.duration_s();
    double window = base_horizon_s;
    while (true) {
        const Behavior b = classify_behavior(full_future.prefix(window), rules);
        if (auto c = command_for(b)) return *c;
        if (window >= total - 1e-9) return BehaviorCommand::GoStraightForward;
        window = std::min(window + step_s, total);
    }
}

FutureTrack mirrored(const FutureTrack& track) {
    FutureTrack m = track;
    for (auto& p : m.positions) p.y = -p.y;
    for (auto& h : m.headings) h = -h;
    return m;
}

}  // namespace volplan
