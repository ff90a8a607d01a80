#include "volplan/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "volplan/synthetic.hpp"
#include "volplan/text_codec.hpp"

namespace volplan {

namespace {

double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

// Sample index closing each stage; stage s spans (bounds[s], bounds[s + 1]].
std::vector<std::size_t> stage_bounds(const PlanningProfile& profile) {
    const std::size_t n = profile.horizon_steps();
    std::vector<std::size_t> b(static_cast<std::size_t>(profile.decision_stages) + 1);
    for (int s = 0; s <= profile.decision_stages; ++s) {
        b[static_cast<std::size_t>(s)] =
            static_cast<std::size_t>(std::llround(static_cast<double>(n) * s / profile.decision_stages));
    }
    return b;
}

std::vector<double> softmax(const std::vector<double>& logits, double temperature) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp((logits[i] - mx) / temperature);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

std::size_t argmax(const std::vector<double>& p) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_candidates(const CandidateSet& cands) {
    if (cands.size() == 0) throw std::invalid_argument("cannot aggregate an empty candidate set");
    const auto& first = cands.trajectories.front();
    for (const auto& t : cands.trajectories) {
        if (t.size() != first.size() || t.frequency_hz() != first.frequency_hz()) {
            throw std::invalid_argument("candidates disagree on horizon or frequency");
        }
    }
}

}  // namespace

MetaDecision label_meta_decision(const MotionSegment& seg, const MetaDecisionRules& rules) {
    if (seg.positions.empty() || seg.velocities.size() != seg.positions.size()) {
        throw std::invalid_argument("motion segment needs aligned positions and velocities");
    }
    double top_speed = 0.0;
    for (const auto& v : seg.velocities) top_speed = std::max(top_speed, norm(v));
    const Vec2 disp{seg.positions.back().x - seg.positions.front().x,
                    seg.positions.back().y - seg.positions.front().y};
    if (top_speed < rules.stationary_speed_mps && norm(disp) < rules.stationary_displacement_m) {
        return MetaDecision::KeepStationary;
    }
    const double duration = seg.duration_s();
    const double mean_accel =
        duration > 0.0 ? (norm(seg.velocities.back()) - norm(seg.velocities.front())) / duration : 0.0;
    if (mean_accel > rules.accel_threshold_mps2) return MetaDecision::Accelerate;
    if (mean_accel < -rules.accel_threshold_mps2) return MetaDecision::Decelerate;
    return MetaDecision::KeepSpeed;
}

Vec2 current_velocity(const EgoStateHistory& history) {
    const auto& s = history.latest();
    const double dt = 1.0 / history.frequency_hz();
    return {s.velocity.x + s.acceleration.x * dt, s.velocity.y + s.acceleration.y * dt};
}

std::vector<MetaDecision> label_stage_decisions(const PlanTrajectory& future, const Vec2& v0,
                                                const PlanningProfile& profile) {
    const std::size_t n = profile.horizon_steps();
    if (future.size() < n) throw std::invalid_argument("future shorter than the planning horizon");
    const double dt = 1.0 / future.frequency_hz();
    std::vector<Vec2> pos{{0.0, 0.0}};
    std::vector<Vec2> vel{v0};
    for (std::size_t i = 0; i < n; ++i) {
        pos.push_back(future[i]);
        vel.push_back({(pos[i + 1].x - pos[i].x) / dt, (pos[i + 1].y - pos[i].y) / dt});
    }
    const auto bounds = stage_bounds(profile);
    std::vector<MetaDecision> out;
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        MotionSegment seg;
        seg.dt = dt;
        const auto b = static_cast<std::ptrdiff_t>(bounds[s]);
        const auto e = static_cast<std::ptrdiff_t>(bounds[s + 1]) + 1;
        seg.positions.assign(pos.begin() + b, pos.begin() + e);
        seg.velocities.assign(vel.begin() + b, vel.begin() + e);
        out.push_back(label_meta_decision(seg));
    }
    return out;
}

std::vector<std::size_t> nucleus_support(std::span<const double> dist, double p) {
    if (dist.empty()) throw std::invalid_argument("empty categorical distribution");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("nucleus threshold must lie in (0, 1]");
    double total = 0.0;
    for (double x : dist) {
        if (!std::isfinite(x) || x < 0.0) throw std::invalid_argument("distribution has an invalid probability");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("distribution does not sum to one");

    std::vector<std::size_t> order(dist.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
    double mass = 0.0;
    std::size_t keep = 0;
    while (keep < order.size()) {
        mass += dist[order[keep]];
        ++keep;
        if (mass >= p) break;
    }
    order.resize(keep);
    return order;
}

std::size_t nucleus_sample(std::span<const double> dist, double p, std::mt19937_64& rng) {
    const auto support = nucleus_support(dist, p);
    double mass = 0.0;
    for (auto i : support) mass += dist[i];
    const double u = std::uniform_real_distribution<double>(0.0, mass)(rng);
    double acc = 0.0;
    for (auto i : support) {
        acc += dist[i];
        if (u < acc) return i;
    }
    // u landed on the rounding gap at the top; pick the last non-zero entry.
    for (auto it = support.rbegin(); it != support.rend(); ++it) {
        if (dist[*it] > 0.0) return *it;
    }
    return support.front();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

PlanTrajectory aggregate_candidates(const CandidateSet& cands) {
    check_candidates(cands);
    const auto& first = cands.trajectories.front();
    const double k = static_cast<double>(cands.size());
    std::vector<Vec2> mean(first.size());
    for (std::size_t t = 0; t < first.size(); ++t) {
        double sx = 0.0;
        double sy = 0.0;
        for (const auto& c : cands.trajectories) {
            sx += c[t].x;
            sy += c[t].y;
        }
        mean[t] = {sx / k, sy / k};
    }
    return PlanTrajectory(std::move(mean), first.horizon_s(), first.frequency_hz());
}

PlanTrajectory aggregate_likelihood_weighted(const CandidateSet& cands) {
    check_candidates(cands);
    if (cands.log_likelihoods.size() != cands.size()) {
        throw std::invalid_argument("weighted aggregation needs one log-likelihood per candidate");
    }
    const double mx = *std::max_element(cands.log_likelihoods.begin(), cands.log_likelihoods.end());
    std::vector<double> w(cands.size());
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = std::exp(cands.log_likelihoods[k] - mx);
        total += w[k];
    }
    const auto& first = cands.trajectories.front();
    std::vector<Vec2> out(first.size());
    for (std::size_t t = 0; t < first.size(); ++t) {
        for (std::size_t k = 0; k < w.size(); ++k) {
            out[t].x += w[k] * cands.trajectories[k][t].x;
            out[t].y += w[k] * cands.trajectories[k][t].y;
        }
        out[t].x /= total;
        out[t].y /= total;
    }
    return PlanTrajectory(std::move(out), first.horizon_s(), first.frequency_hz());
}

std::string_view to_string(Aggregation a) {
    switch (a) {
        case Aggregation::Mean: return "mean";
        case Aggregation::LikelihoodWeighted: return "weighted";
        case Aggregation::Greedy: return "greedy";
    }
    return "mean";
}

Aggregation parse_aggregation(std::string_view s) {
    if (s == "mean") return Aggregation::Mean;
    if (s == "weighted") return Aggregation::LikelihoodWeighted;
    if (s == "greedy") return Aggregation::Greedy;
    throw std::invalid_argument("unknown aggregation '" + std::string(s) + "'");
}

void SamplingConfig::validate() const {
    if (k < 1) throw std::invalid_argument("candidate count K must be at least 1");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top-p must lie in (0, 1]");
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
}

std::vector<MetaDecision> majority_decisions(const std::vector<std::vector<MetaDecision>>& votes) {
    if (votes.empty()) return {};
    const std::size_t stages = votes.front().size();
    std::vector<MetaDecision> out;
    for (std::size_t s = 0; s < stages; ++s) {
        std::array<int, kNumDecisions> counts{};
        for (const auto& v : votes) ++counts.at(static_cast<std::size_t>(v.at(s)));
        const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
        out.push_back(static_cast<MetaDecision>(best));
    }
    return out;
}

// ---------------------------------------------------------------------------

void ToyPolicyConfig::validate() const {
    grid.validate();
    lift.validate();
    sampling.validate();
    if (sparse_tokens < 1) throw std::invalid_argument("need at least one sparse token");
    if (feature_map_size < 2) throw std::invalid_argument("feature maps must be at least 2x2");
    if (speed_offsets.empty()) throw std::invalid_argument("need at least one speed offset token");
    if (!(degenerate_rate >= 0.0 && degenerate_rate <= 1.0)) {
        throw std::invalid_argument("degenerate rate must lie in [0, 1]");
    }
    if (forced_decisions && static_cast<int>(forced_decisions->size()) != profile.decision_stages) {
        throw std::invalid_argument("forced decisions must cover every stage");
    }
}

namespace {

std::mt19937_64 seeded(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace

PlannerPolicy::PlannerPolicy(ToyPolicyConfig config)
    : config_((config.validate(), std::move(config))),
      lift_([this] {
          auto rng = seeded(config_.param_seed);
          return LiftParams::fresh(config_.lift, rng);
      }()),
      encoder_([this] {
          auto rng = seeded(derive_seed(config_.param_seed, 1));
          return BiasedEncoder(config_.encoder, rng);
      }()) {
    auto rng = seeded(derive_seed(config_.param_seed, 2));
    const Eigen::Index d = config_.encoder.d_model;
    token_proj_ = Linear(config_.lift.channels, d);
    token_proj_.init_uniform(rng);
    history_embed_ = Linear(6, d);
    history_embed_.init_uniform(rng);
    Linear cmd(kNumCommands, d);
    cmd.init_uniform(rng);
    command_embed_ = cmd.weight.transpose();
    decision_head_ = Linear(d, static_cast<Eigen::Index>(kNumDecisions) * config_.profile.decision_stages);
    decision_head_.init_uniform(rng);
}

TokenSequence PlannerPolicy::tokens(const SparseVolumeSet& scene, const EgoStateHistory& history,
                                    BehaviorCommand command) const {
    TokenSequence seq;
    if (scene.features.cols() != token_proj_.in_features()) {
        throw std::invalid_argument("scene tokens do not have C channels");
    }
    seq.visual = (scene.features * token_proj_.weight.transpose()).rowwise() + token_proj_.bias.transpose();
    seq.visual_coords = scene.coords;
    const auto n = static_cast<Eigen::Index>(history.size()) + 1;
    seq.text.resize(n, config_.encoder.d_model);
    seq.text.row(0) = command_embed_.row(static_cast<Eigen::Index>(command));
    seq.text_positions.push_back(0.0);
    for (std::size_t i = 0; i < history.size(); ++i) {
        const auto& s = history.steps()[i];
        Eigen::VectorXd x(6);
        x << s.position.x, s.position.y, s.velocity.x, s.velocity.y, s.acceleration.x, s.acceleration.y;
        seq.text.row(static_cast<Eigen::Index>(i) + 1) = history_embed_.forward(x).transpose();
        seq.text_positions.push_back(static_cast<double>(i + 1));
    }
    return seq;
}

std::vector<std::vector<double>> PlannerPolicy::decision_probs(const SparseVolumeSet& scene,
                                                               const EgoStateHistory& history,
                                                               BehaviorCommand command) const {
    const int stages = config_.profile.decision_stages;
    std::vector<std::vector<double>> out;
    if (config_.forced_decisions) {
        for (auto d : *config_.forced_decisions) {
            std::vector<double> p(kNumDecisions, 0.0);
            p[static_cast<std::size_t>(d)] = 1.0;
            out.push_back(std::move(p));
        }
        return out;
    }
    const Eigen::MatrixXd enc = encoder_.forward(tokens(scene, history, command));
    const Eigen::VectorXd pooled = enc.colwise().mean().transpose();
    const Eigen::VectorXd head = decision_head_.forward(pooled);

    // Kinematic prior from the newest history state.
    const Vec2 v = current_velocity(history);
    const double speed = norm(v);
    const auto& acc = history.latest().acceleration;
    const double along = speed > 0.1 ? (v.x * acc.x + v.y * acc.y) / speed : 0.0;
    for (int s = 0; s < stages; ++s) {
        const double t0 = s * config_.profile.stage_duration_s();
        const double stage_speed = std::max(0.0, speed + along * t0);
        std::vector<double> logits{
            3.0 * (1.0 - stage_speed / 2.0),
            1.0,
            4.0 * (along - 0.25),
            4.0 * (-along - 0.25),
        };
        for (int k = 0; k < kNumDecisions; ++k) logits[k] += config_.scene_weight * head[s * kNumDecisions + k];
        out.push_back(softmax(logits, config_.sampling.temperature));
    }
    return out;
}

std::vector<double> PlannerPolicy::offset_probs() const {
    std::vector<double> logits;
    for (double o : config_.speed_offsets) logits.push_back(-config_.offset_sharpness * o * o);
    return softmax(logits, config_.sampling.temperature);
}

PlanTrajectory PlannerPolicy::rollout(const std::vector<MetaDecision>& decisions, double speed_offset,
                                      const EgoStateHistory& history, BehaviorCommand command) const {
    const PlanningProfile& prof = config_.profile;
    if (static_cast<int>(decisions.size()) != prof.decision_stages) {
        throw std::invalid_argument("rollout needs one decision per stage");
    }
    const std::size_t n = prof.horizon_steps();
    const double dt = 1.0 / prof.frequency_hz;
    const auto bounds = stage_bounds(prof);
    const Vec2 v0 = current_velocity(history);
    const double heading0 = norm(v0) > 0.1 ? std::atan2(v0.y, v0.x) : 0.0;

    double yaw_total = 0.0;
    double turn_length = 25.0;
    double lateral = 0.0;
    switch (command) {
        case BehaviorCommand::LeftTurn: yaw_total = 0.5 * std::numbers::pi; break;
        case BehaviorCommand::RightTurn: yaw_total = -0.5 * std::numbers::pi; break;
        case BehaviorCommand::LeftUTurn:
            yaw_total = std::numbers::pi;
            turn_length = 20.0;
            break;
        case BehaviorCommand::GoStraightLeft: lateral = 3.5; break;
        case BehaviorCommand::GoStraightRight: lateral = -3.5; break;
        case BehaviorCommand::GoStraightForward: break;
    }

    double speed = std::max(0.0, norm(v0) + speed_offset);
    double travelled = 0.0;
    double x = 0.0;
    double y = 0.0;
    std::vector<Vec2> out;
    out.reserve(n);
    std::size_t stage = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        while (stage + 1 < decisions.size() && i > bounds[stage + 1]) ++stage;
        switch (decisions[stage]) {
            case MetaDecision::KeepStationary: speed = 0.0; break;
            case MetaDecision::KeepSpeed: break;
            case MetaDecision::Accelerate: speed += config_.accel_gain_mps2 * dt; break;
            case MetaDecision::Decelerate: speed = std::max(0.0, speed - config_.accel_gain_mps2 * dt); break;
        }
        travelled += speed * dt;
        const double heading = heading0 + yaw_total * smoothstep(travelled / turn_length);
        x += speed * dt * std::cos(heading);
        y += speed * dt * std::sin(heading);
        out.push_back({x, y + lateral * smoothstep(travelled / 40.0)});
    }
    return PlanTrajectory(std::move(out), prof.horizon_s, prof.frequency_hz);
}

PlanResult plan(const SparseVolumeSet& scene, const EgoStateHistory& history, BehaviorCommand command,
                const PlannerPolicy& policy, std::uint64_t rng_seed) {
    const auto& cfg = policy.config();
    const auto decision_p = policy.decision_probs(scene, history, command);
    const auto offset_p = policy.offset_probs();
    const double top_p = cfg.sampling.top_p;

    auto sample = [&](std::mt19937_64& rng, bool greedy, double& log_likelihood) {
        const auto pick = [&](const std::vector<double>& p) {
            const std::size_t i = greedy ? argmax(p) : nucleus_sample(p, top_p, rng);
            log_likelihood += std::log(p[i]);
            return i;
        };
        std::vector<MetaDecision> decisions;
        for (const auto& p : decision_p) decisions.push_back(static_cast<MetaDecision>(pick(p)));
        const double offset = cfg.speed_offsets[pick(offset_p)];
        const PlanTrajectory traj = policy.rollout(decisions, offset, history, command);
        std::string text = encode_target(decisions, traj, cfg.profile.decision_stages);
        if (!greedy && cfg.degenerate_rate > 0.0 &&
            std::uniform_real_distribution<double>(0.0, 1.0)(rng) < cfg.degenerate_rate) {
            text.insert(text.size() - 1, ";(abc, 0.00)");
        }
        return text;
    };
    return decode_and_aggregate(sample, cfg.sampling, cfg.profile, rng_seed);
}

SparseVolumeSet ToyPlanner::scene_tokens(const Scenario& scenario) const {
    const auto& cfg = policy_.config();
    const auto frames_needed = static_cast<std::size_t>(cfg.lift.frames());
    if (scenario.rig.empty()) throw std::invalid_argument("scenario " + scenario.id + " has no cameras");
    if (scenario.frames.size() < frames_needed || scenario.ego_poses.size() < frames_needed) {
        throw std::invalid_argument("scenario " + scenario.id + " has fewer frames than T + 1");
    }
    std::vector<FrameMaps> frames;
    for (std::size_t t = 0; t < frames_needed; ++t) {
        frames.push_back(
            render_feature_maps(scenario.frames[t], scenario.rig, cfg.feature_map_size, cfg.lift.channels));
    }
    const std::span<const RigidPose> poses(scenario.ego_poses.data(), frames_needed);
    const std::size_t m = std::min(cfg.sparse_tokens, cfg.grid.size());
    return build_sparse_tokens(frames, poses, scenario.rig, cfg.grid, policy_.lift(), m, cfg.threads);
}

PlanResult ToyPlanner::plan(const Scenario& scenario, std::uint64_t seed) const {
    return volplan::plan(scene_tokens(scenario), scenario.history, scenario.command, policy_, seed);
}

PlanResult OraclePlanner::plan(const Scenario& scenario, std::uint64_t seed) const {
    const PlanTrajectory gt = scenario.ground_truth.truncated(profile_.horizon_s);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma_ > 0.0 ? noise_sigma_ : 1.0);
    std::vector<Vec2> out;
    for (const auto& w : gt.waypoints()) {
        Vec2 p{w.x + offset_.x, w.y + offset_.y};
        if (noise_sigma_ > 0.0) {
            p.x += noise(rng);
            p.y += noise(rng);
        }
        out.push_back(p);
    }
    PlanResult r;
    r.trajectory = PlanTrajectory(std::move(out), gt.horizon_s(), gt.frequency_hz());
    r.decisions = label_stage_decisions(gt, current_velocity(scenario.history), profile_);
    r.candidates.trajectories.push_back(r.trajectory);
    r.candidates.log_likelihoods.push_back(0.0);
    return r;
}

BiasedSamplerPlanner::BiasedSamplerPlanner(PlanningProfile profile, SamplingConfig sampling, double stationary_prob,
                                           std::vector<double> progress)
    : profile_(std::move(profile)), sampling_(sampling), stationary_prob_(stationary_prob),
      progress_(std::move(progress)) {
    sampling_.validate();
    if (!(stationary_prob_ > 0.0 && stationary_prob_ < 1.0) || progress_.empty()) {
        throw std::invalid_argument("biased sampler needs a stationary probability in (0, 1) and progress tokens");
    }
}

std::vector<double> BiasedSamplerPlanner::token_probs() const {
    std::vector<double> p{stationary_prob_};
    for (std::size_t i = 0; i < progress_.size(); ++i) {
        p.push_back((1.0 - stationary_prob_) / static_cast<double>(progress_.size()));
    }
    return p;
}

PlanResult BiasedSamplerPlanner::plan(const Scenario& scenario, std::uint64_t seed) const {
    const PlanTrajectory gt = scenario.ground_truth.truncated(profile_.horizon_s);
    const auto gt_decisions = label_stage_decisions(gt, current_velocity(scenario.history), profile_);
    const auto probs = token_probs();
    auto sample = [&](std::mt19937_64& rng, bool greedy, double& log_likelihood) {
        const std::size_t tok = greedy ? argmax(probs) : nucleus_sample(probs, sampling_.top_p, rng);
        log_likelihood = std::log(probs[tok]);
        if (tok == 0) {
            const std::vector<MetaDecision> still(static_cast<std::size_t>(profile_.decision_stages),
                                                  MetaDecision::KeepStationary);
            return encode_target(still, PlanTrajectory(std::vector<Vec2>(gt.size()), gt.horizon_s(), gt.frequency_hz()),
                                 profile_.decision_stages);
        }
        const double f = progress_[tok - 1];
        std::vector<Vec2> scaled;
        for (const auto& w : gt.waypoints()) scaled.push_back({f * w.x, f * w.y});
        return encode_target(gt_decisions, PlanTrajectory(std::move(scaled), gt.horizon_s(), gt.frequency_hz()),
                             profile_.decision_stages);
    };
    return decode_and_aggregate(sample, sampling_, profile_, seed);
}

}  // namespace volplan
