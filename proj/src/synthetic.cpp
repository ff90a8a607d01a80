#include "volplan/synthetic.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

#include "volplan/planner.hpp"

namespace volplan {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kSubsteps = 40;

// Draws are built from raw 64-bit outputs so corpora match across standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }
double gaussian(std::mt19937_64& rng) {
    const double u1 = 1.0 - unit(rng);
    const double u2 = unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}
double smoothstep_slope(double x) { return (x <= 0.0 || x >= 1.0) ? 0.0 : 6.0 * x * (1.0 - x); }

// Ego motion for t >= 0: path yaw and speed, plus an ego-frame lateral shift
// used by lane-change-like manoeuvres (only while yaw is zero).
struct Motion {
    std::function<double(double)> speed;
    std::function<double(double)> yaw = [](double) { return 0.0; };
    std::function<double(double)> lateral = [](double) { return 0.0; };
    std::function<double(double)> lateral_rate = [](double) { return 0.0; };
    // Straight-line history: v(t) = v0 + a t for t < 0.
    double v0 = 0.0;
    double a0 = 0.0;
};

struct Sampled {
    std::vector<Vec2> positions;
    std::vector<double> headings;
};

Sampled integrate(const Motion& m, double horizon_s, double freq) {
    const std::size_t n = steps_for(horizon_s, freq);
    const double dt = 1.0 / freq;
    const double h = dt / kSubsteps;
    Sampled out;
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        for (int s = 0; s < kSubsteps; ++s) {
            const double tm = t + 0.5 * h;
            const double v = m.speed(tm);
            const double psi = m.yaw(tm);
            x += h * v * std::cos(psi);
            y += h * v * std::sin(psi);
            t += h;
        }
        t = static_cast<double>(k) * dt;
        const double v = m.speed(t);
        out.positions.push_back({x, y + m.lateral(t)});
        out.headings.push_back(m.yaw(t) + std::atan2(m.lateral_rate(t), std::max(v, 1e-9)));
    }
    return out;
}

double history_x(const Motion& m, double t) { return m.v0 * t + 0.5 * m.a0 * t * t; }

Motion stop_motion(std::mt19937_64& rng, bool departs, double depart_at) {
    Motion m;
    const bool parked = unit(rng) < 0.5;
    m.v0 = parked ? 0.0 : uniform(rng, 0.0, 1.5);
    m.a0 = parked ? 0.0 : uniform(rng, -1.5, -0.5);
    const double v0 = m.v0;
    const double a0 = m.a0;
    double depart_accel = 0.0;
    double depart_yaw = 0.0;
    if (departs) {
        depart_accel = uniform(rng, 1.5, 2.5);
        const double pick = unit(rng);
        depart_yaw = pick < 1.0 / 3.0 ? 0.0 : (pick < 2.0 / 3.0 ? 90.0 * kDeg : -90.0 * kDeg);
    }
    m.speed = [=](double t) {
        if (departs && t > depart_at) return depart_accel * (t - depart_at);
        return std::max(0.0, v0 + a0 * t);
    };
    m.yaw = [=](double t) { return depart_yaw * smoothstep((t - depart_at - 0.5) / 2.5); };
    return m;
}

Motion straight_motion(std::mt19937_64& rng, double y_lo, double y_hi) {
    Motion m;
    m.v0 = uniform(rng, 3.0, 15.0);
    m.a0 = uniform(rng, -0.3, 0.3);
    const double shift = uniform(rng, y_lo, y_hi);
    const double t0 = uniform(rng, 0.5, 2.0);
    const double dur = uniform(rng, 3.0, 5.0);
    const double v0 = m.v0;
    const double a0 = m.a0;
    m.speed = [=](double t) { return std::max(0.0, v0 + a0 * t); };
    m.lateral = [=](double t) { return shift * smoothstep((t - t0) / dur); };
    m.lateral_rate = [=](double t) { return shift * smoothstep_slope((t - t0) / dur) / dur; };
    return m;
}

Motion turn_motion(std::mt19937_64& rng, double yaw_lo, double yaw_hi, double v_lo, double v_hi, double a_abs,
                   double t0_lo, double t0_hi, double dur_lo, double dur_hi) {
    Motion m;
    m.v0 = uniform(rng, v_lo, v_hi);
    m.a0 = uniform(rng, -a_abs, a_abs);
    const double total = uniform(rng, yaw_lo, yaw_hi) * kDeg;
    const double t0 = uniform(rng, t0_lo, t0_hi);
    const double dur = uniform(rng, dur_lo, dur_hi);
    const double v0 = m.v0;
    const double a0 = m.a0;
    m.speed = [=](double t) { return std::max(0.0, v0 + a0 * t); };
    m.yaw = [=](double t) { return total * smoothstep((t - t0) / dur); };
    return m;
}

Motion motion_for(Behavior b, std::mt19937_64& rng, const SyntheticSpec& spec, bool& extended) {
    extended = false;
    switch (b) {
        case Behavior::Stop:
            extended = unit(rng) < spec.departure_prob;
            return stop_motion(rng, extended, spec.future_s + uniform(rng, 0.0, 1.0));
        case Behavior::StraightForward: return straight_motion(rng, -2.0, 2.0);
        case Behavior::StraightLeft: return straight_motion(rng, 6.0, 9.0);
        case Behavior::StraightRight: return straight_motion(rng, -9.0, -6.0);
        case Behavior::LeftTurn: return turn_motion(rng, 60.0, 100.0, 4.0, 10.0, 0.2, 0.5, 2.5, 3.0, 5.0);
        case Behavior::RightTurn: return turn_motion(rng, -100.0, -60.0, 4.0, 10.0, 0.2, 0.5, 2.5, 3.0, 5.0);
        case Behavior::LeftUTurn: return turn_motion(rng, 165.0, 190.0, 3.5, 5.0, 0.1, 0.2, 0.6, 2.5, 3.5);
    }
    throw std::invalid_argument("unknown behavior");
}

std::string scenario_id(std::uint64_t seed, std::size_t index) {
    std::string idx = std::to_string(index);
    if (idx.size() < 6) idx.insert(0, 6 - idx.size(), '0');
    return "syn-" + std::to_string(seed) + "-" + idx;
}

}  // namespace

BehaviorMix BehaviorMix::long_tail() {
    BehaviorMix m;
    m.weights = {0.30, 0.42, 0.04, 0.04, 0.09, 0.09, 0.02};
    return m;
}

BehaviorMix BehaviorMix::only(Behavior b) {
    BehaviorMix m;
    m.weights[static_cast<std::size_t>(b)] = 1.0;
    return m;
}

BehaviorMix BehaviorMix::uniform() {
    BehaviorMix m;
    m.weights.fill(1.0 / kNumBehaviors);
    return m;
}

void BehaviorMix::validate() const {
    double total = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("behavior mix weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("behavior mix must sum to 1");
}

void SyntheticSpec::validate() const {
    mix.validate();
    if (future_s < profile.horizon_s) throw std::invalid_argument("synthetic future shorter than planning horizon");
    if (extended_future_s < future_s) throw std::invalid_argument("extended future shorter than base future");
    if (!(departure_prob >= 0.0 && departure_prob <= 1.0)) throw std::invalid_argument("departure_prob outside [0, 1]");
    if (views < 1) throw std::invalid_argument("need at least one view");
    if (history_frames < 0) throw std::invalid_argument("history_frames must be non-negative");
    if (!(frame_interval_s > 0.0)) throw std::invalid_argument("frame interval must be positive");
    if (min_blobs < 0 || max_blobs < min_blobs) throw std::invalid_argument("invalid blob count range");
}

Scenario generate_scenario(const SyntheticSpec& spec, Behavior behavior, std::uint64_t seed, std::size_t index) {
    spec.validate();
    const std::uint64_t stream = derive_seed(seed, index);
    std::mt19937_64 rng(stream);
    const PlanningProfile& prof = spec.profile;

    bool extended = false;
    const Motion motion = motion_for(behavior, rng, spec, extended);
    const double future = extended ? spec.extended_future_s : spec.future_s;
    Sampled fut = integrate(motion, future, prof.frequency_hz);

    std::vector<EgoState> hist;
    const std::size_t nh = prof.history_steps();
    for (std::size_t i = 0; i < nh; ++i) {
        const double t = -static_cast<double>(nh - i) / prof.frequency_hz;
        hist.push_back({{history_x(motion, t), 0.0}, {motion.v0 + motion.a0 * t, 0.0}, {motion.a0, 0.0}});
    }

    Scenario sc;
    sc.id = scenario_id(seed, index);
    sc.profile = prof.name;
    sc.history = EgoStateHistory(std::move(hist), prof.frequency_hz);
    sc.ground_truth = PlanTrajectory(std::move(fut.positions), future, prof.frequency_hz);
    sc.ground_truth_headings = std::move(fut.headings);
    sc.command = derive_command(FutureTrack::from_trajectory(sc.ground_truth, sc.ground_truth_headings));
    sc.rig = make_surround_rig(spec.views);

    const int n_blobs = spec.min_blobs + static_cast<int>(unit(rng) * (spec.max_blobs - spec.min_blobs + 1));
    std::vector<SceneBlob> blobs;
    for (int j = 0; j < n_blobs; ++j) {
        SceneBlob b;
        b.center = {uniform(rng, -25.0, 60.0), uniform(rng, -25.0, 25.0), uniform(rng, -1.0, 3.0)};
        b.radius = uniform(rng, 1.0, 3.0);
        b.feature_seed = derive_seed(stream, 1000 + static_cast<std::uint64_t>(j));
        blobs.push_back(std::move(b));
    }
    for (int k = 0; k <= spec.history_frames; ++k) {
        const double t = -k * spec.frame_interval_s;
        const RigidPose pose = k == 0 ? RigidPose::identity()
                                      : RigidPose::from_yaw(0.0, Eigen::Vector3d(history_x(motion, t), 0.0, 0.0));
        SensorFrame frame;
        frame.timestamp_s = t;
        for (const auto& b : blobs) {
            SceneBlob moved = b;
            moved.center = compensate_ego_motion(b.center, pose);
            frame.blobs.push_back(std::move(moved));
        }
        sc.frames.push_back(std::move(frame));
        sc.ego_poses.push_back(pose);
    }
    return sc;
}

std::vector<Scenario> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, std::size_t n) {
    spec.validate();
    std::vector<Scenario> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 pick_rng(derive_seed(seed ^ 0x5bd1e995ULL, i));
        const double u = unit(pick_rng);
        double acc = 0.0;
        std::size_t b = 0;
        for (std::size_t k = 0; k < spec.mix.weights.size(); ++k) {
            if (spec.mix.weights[k] <= 0.0) continue;
            b = k;
            acc += spec.mix.weights[k];
            if (u < acc) break;
        }
        out.push_back(generate_scenario(spec, static_cast<Behavior>(b), seed, i));
    }
    return out;
}

std::vector<double> blob_feature(const SceneBlob& blob, int channels) {
    if (!blob.feature.empty()) {
        if (static_cast<int>(blob.feature.size()) != channels) {
            throw std::invalid_argument("blob feature has the wrong channel count");
        }
        return blob.feature;
    }
    std::mt19937_64 rng(blob.feature_seed);
    std::vector<double> f(static_cast<std::size_t>(channels));
    for (double& x : f) x = gaussian(rng);
    return f;
}

FrameMaps render_feature_maps(const SensorFrame& frame, const CameraRig& rig, int map_size, int channels) {
    if (!frame.maps.empty()) {
        if (frame.maps.size() != rig.size()) throw std::invalid_argument("frame map count differs from view count");
        return frame.maps;
    }
    std::vector<std::vector<double>> feats;
    for (const auto& b : frame.blobs) feats.push_back(blob_feature(b, channels));

    FrameMaps maps;
    for (const auto& cam : rig) {
        FeatureMap fm(map_size, map_size, channels);
        const Eigen::Matrix3d ego_from_cam = cam.extrinsic.rotation.transpose();
        const Eigen::Vector3d origin = -(ego_from_cam * cam.extrinsic.translation);
        // Per-blob direction and angular width seen from this camera.
        std::vector<Eigen::Vector3d> dirs;
        std::vector<double> sigmas;
        for (const auto& b : frame.blobs) {
            const Eigen::Vector3d d = b.center - origin;
            const double dist = std::max(d.norm(), 1e-6);
            dirs.push_back(d / dist);
            sigmas.push_back(std::max(std::atan(b.radius / dist), 0.06));
        }
        const auto& in = cam.intrinsics;
        for (int row = 0; row < map_size; ++row) {
            for (int col = 0; col < map_size; ++col) {
                const double u = (col + 0.5) * cam.image_width / map_size - 0.5;
                const double v = (row + 0.5) * cam.image_height / map_size - 0.5;
                const Eigen::Vector3d ray =
                    (ego_from_cam * Eigen::Vector3d((u - in.cx) / in.fx, (v - in.cy) / in.fy, 1.0)).normalized();
                auto cell = fm.at(row, col);
                for (std::size_t j = 0; j < dirs.size(); ++j) {
                    const double ang = std::acos(std::clamp(ray.dot(dirs[j]), -1.0, 1.0));
                    const double w = std::exp(-0.5 * ang * ang / (sigmas[j] * sigmas[j]));
                    if (w < 1e-12) continue;
                    for (int c = 0; c < channels; ++c) cell[static_cast<std::size_t>(c)] += w * feats[j][static_cast<std::size_t>(c)];
                }
            }
        }
        maps.push_back(std::move(fm));
    }
    return maps;
}

}  // namespace volplan
