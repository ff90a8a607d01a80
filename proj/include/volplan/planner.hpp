#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "volplan/attention_bias.hpp"
#include "volplan/scenario.hpp"
#include "volplan/volume_lift.hpp"

namespace volplan {

// ---------------------------------------------------------------------------
// Meta-decision labels

// Samples of one planning stage. Velocities are aligned with positions and
// include the segment start.
struct MotionSegment {
    std::vector<Vec2> positions;
    std::vector<Vec2> velocities;
    double dt = 0.2;

    double duration_s() const { return positions.empty() ? 0.0 : (positions.size() - 1) * dt; }
};

struct MetaDecisionRules {
    double stationary_speed_mps = 2.0;
    double stationary_displacement_m = 1.5;
    double accel_threshold_mps2 = 0.5;
};

// Keep stationary when the top speed stays under 2 m/s and the segment ends
// within 1.5 m of its start; otherwise classify the mean change of speed
// magnitude against +-0.5 m/s^2.
MetaDecision label_meta_decision(const MotionSegment& segment, const MetaDecisionRules& rules = {});

// Splits the first profile.horizon_s of a logged future into the profile's
// stages and labels each. Velocities come from backward differences, with the
// start of the first stage at current_velocity.
std::vector<MetaDecision> label_stage_decisions(const PlanTrajectory& future, const Vec2& current_velocity,
                                                const PlanningProfile& profile);

// Velocity at t = 0 extrapolated from the newest history step.
Vec2 current_velocity(const EgoStateHistory& history);

// ---------------------------------------------------------------------------
// Sampling and aggregation

// Smallest descending-probability prefix whose mass reaches p; equal
// probabilities are ordered by ascending index.
std::vector<std::size_t> nucleus_support(std::span<const double> dist, double p);
std::size_t nucleus_sample(std::span<const double> dist, double p, std::mt19937_64& rng);

// Independent stream seed for (seed, stream), so candidate k draws the same
// numbers whatever order candidates are produced in.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct CandidateSet {
    std::vector<PlanTrajectory> trajectories;
    std::vector<double> log_likelihoods;

    std::size_t size() const { return trajectories.size(); }
};

// Unweighted per-timestep mean.
PlanTrajectory aggregate_candidates(const CandidateSet& cands);
// Mean weighted by candidate likelihood; a comparator, not the default path.
PlanTrajectory aggregate_likelihood_weighted(const CandidateSet& cands);

enum class Aggregation { Mean, LikelihoodWeighted, Greedy };
std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view s);

struct SamplingConfig {
    int k = 16;
    double top_p = 0.9;
    double temperature = 1.0;
    Aggregation aggregation = Aggregation::Mean;

    void validate() const;
};

struct PlanResult {
    std::vector<MetaDecision> decisions;
    CandidateSet candidates;
    PlanTrajectory trajectory;
    std::size_t dropped = 0;
};

class PlanningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Draws K candidates with `sample(rng, greedy, log_likelihood)`. Each call
// returns a candidate target text; decodes them, drops unparsable samples and
// aggregates the rest. Greedy aggregation decodes once with argmax tokens.
template <typename SampleFn>
PlanResult decode_and_aggregate(SampleFn&& sample, const SamplingConfig& sampling, const PlanningProfile& profile,
                                std::uint64_t seed);

// Per-stage majority vote; ties go to the lower enumerator.
std::vector<MetaDecision> majority_decisions(const std::vector<std::vector<MetaDecision>>& votes);

// ---------------------------------------------------------------------------
// Stand-in planner

struct ToyPolicyConfig {
    PlanningProfile profile = PlanningProfile::womd();
    VolumeGrid grid = VolumeGrid::desk();
    LiftConfig lift = LiftConfig::desk();
    std::size_t sparse_tokens = 256;
    EncoderConfig encoder;
    SamplingConfig sampling;
    int feature_map_size = 16;
    double frame_interval_s = 0.5;
    double accel_gain_mps2 = 1.0;
    std::vector<double> speed_offsets{-1.0, -0.5, 0.0, 0.5, 1.0};
    double offset_sharpness = 2.0;
    double scene_weight = 0.1;
    // Probability of corrupting a candidate's text before decoding.
    double degenerate_rate = 0.0;
    std::optional<std::vector<MetaDecision>> forced_decisions;
    std::uint64_t param_seed = 7;
    int threads = 1;

    void validate() const;
};

// Parameters of the stand-in planner: scene lifting, the biased encoder and
// linear heads on the pooled encoding.
class PlannerPolicy {
public:
    explicit PlannerPolicy(ToyPolicyConfig config);

    const ToyPolicyConfig& config() const { return config_; }
    const LiftParams& lift() const { return lift_; }
    LiftParams& lift() { return lift_; }
    const BiasedEncoder& encoder() const { return encoder_; }
    BiasedEncoder& encoder() { return encoder_; }

    TokenSequence tokens(const SparseVolumeSet& scene, const EgoStateHistory& history, BehaviorCommand command) const;
    // Per-stage decision probabilities.
    std::vector<std::vector<double>> decision_probs(const SparseVolumeSet& scene, const EgoStateHistory& history,
                                                    BehaviorCommand command) const;
    std::vector<double> offset_probs() const;

    // Constant-acceleration rollout per stage, steered by the command.
    PlanTrajectory rollout(const std::vector<MetaDecision>& decisions, double speed_offset,
                           const EgoStateHistory& history, BehaviorCommand command) const;

private:
    ToyPolicyConfig config_;
    LiftParams lift_;
    BiasedEncoder encoder_;
    Linear token_proj_;
    Linear history_embed_;
    Eigen::MatrixXd command_embed_;
    Linear decision_head_;
};

PlanResult plan(const SparseVolumeSet& scene, const EgoStateHistory& history, BehaviorCommand command,
                const PlannerPolicy& policy, std::uint64_t rng_seed);

class Planner {
public:
    virtual ~Planner() = default;
    virtual std::string name() const = 0;
    virtual PlanResult plan(const Scenario& scenario, std::uint64_t seed) const = 0;
};

// Lifts the scenario's frames into sparse tokens and runs the stand-in decoder.
class ToyPlanner final : public Planner {
public:
    explicit ToyPlanner(ToyPolicyConfig config) : policy_(std::move(config)) {}
    explicit ToyPlanner(PlannerPolicy policy) : policy_(std::move(policy)) {}

    std::string name() const override { return "toy"; }
    PlanResult plan(const Scenario& scenario, std::uint64_t seed) const override;
    SparseVolumeSet scene_tokens(const Scenario& scenario) const;
    const PlannerPolicy& policy() const { return policy_; }

private:
    PlannerPolicy policy_;
};

// Returns the logged future, optionally shifted and perturbed by iid Gaussian
// noise per coordinate.
class OraclePlanner final : public Planner {
public:
    OraclePlanner(PlanningProfile profile, Vec2 offset = {}, double noise_sigma = 0.0)
        : profile_(std::move(profile)), offset_(offset), noise_sigma_(noise_sigma) {}

    std::string name() const override { return "oracle"; }
    PlanResult plan(const Scenario& scenario, std::uint64_t seed) const override;

private:
    PlanningProfile profile_;
    Vec2 offset_;
    double noise_sigma_;
};

// Decoder that over-weights a stationary answer: one token means "stay put",
// the others scale the logged future by a progress factor. Used to compare
// aggregation rules.
class BiasedSamplerPlanner final : public Planner {
public:
    BiasedSamplerPlanner(PlanningProfile profile, SamplingConfig sampling, double stationary_prob = 0.45,
                         std::vector<double> progress = {0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3});

    std::string name() const override { return "biased-sampler"; }
    PlanResult plan(const Scenario& scenario, std::uint64_t seed) const override;
    std::vector<double> token_probs() const;

private:
    PlanningProfile profile_;
    SamplingConfig sampling_;
    double stationary_prob_;
    std::vector<double> progress_;
};

}  // namespace volplan

#include "volplan/detail/decode_and_aggregate.hpp"
