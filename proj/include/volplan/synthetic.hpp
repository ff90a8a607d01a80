#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "volplan/behavior.hpp"
#include "volplan/scenario.hpp"
#include "volplan/volume_lift.hpp"

namespace volplan {

struct BehaviorMix {
    std::array<double, kNumBehaviors> weights{};

    // Long-tailed mix dominated by straight driving and stops.
    static BehaviorMix long_tail();
    static BehaviorMix only(Behavior b);
    static BehaviorMix uniform();
    double weight(Behavior b) const { return weights[static_cast<std::size_t>(b)]; }
    void validate() const;
};

struct SyntheticSpec {
    BehaviorMix mix = BehaviorMix::long_tail();
    PlanningProfile profile = PlanningProfile::womd();
    double future_s = 8.0;
    // Stops that pull away after the base window record this much future.
    double extended_future_s = 12.0;
    double departure_prob = 0.5;
    int views = 4;
    int history_frames = 1;
    double frame_interval_s = 0.5;
    int min_blobs = 3;
    int max_blobs = 8;

    void validate() const;
};

// Deterministic corpus: scenario i draws from its own stream of `seed`.
std::vector<Scenario> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, std::size_t n);
Scenario generate_scenario(const SyntheticSpec& spec, Behavior behavior, std::uint64_t seed, std::size_t index);

// Feature vector of a blob: its explicit feature, or `channels` values drawn
// from the blob's seed.
std::vector<double> blob_feature(const SceneBlob& blob, int channels);

// Per-view maps of a frame. Frames with explicit maps return them; otherwise
// each cell sums blob features weighted by the angular distance between the
// cell's viewing ray and the blob.
FrameMaps render_feature_maps(const SensorFrame& frame, const CameraRig& rig, int map_size, int channels);

}  // namespace volplan
