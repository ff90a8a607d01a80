#include "volplan/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace volplan {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
    }
}

Eigen::Vector3d vec3(const json& j, const std::string& what) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 3) throw std::invalid_argument(what + " needs three values");
    return {v[0], v[1], v[2]};
}

VolumeGrid parse_grid(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "desk") return VolumeGrid::desk();
        if (s == "full") return VolumeGrid::full();
        throw std::invalid_argument("unknown grid preset '" + s + "'");
    }
    check_keys(j, {"min", "max", "resolution"}, "grid");
    VolumeGrid g;
    if (j.contains("min")) g.min_corner = vec3(j["min"], "grid.min");
    if (j.contains("max")) g.max_corner = vec3(j["max"], "grid.max");
    if (j.contains("resolution")) g.resolution = vec3(j["resolution"], "grid.resolution");
    return g;
}

LiftConfig parse_lift(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "desk") return LiftConfig::desk();
        if (s == "full") return LiftConfig::full();
        throw std::invalid_argument("unknown lift preset '" + s + "'");
    }
    check_keys(j,
               {"channels", "reduced_channels", "history_frames", "fourier_levels", "gate_hidden", "posemb_hidden"},
               "lift");
    LiftConfig c;
    c.channels = j.value("channels", c.channels);
    c.reduced_channels = j.value("reduced_channels", c.reduced_channels);
    c.history_frames = j.value("history_frames", c.history_frames);
    c.fourier_levels = j.value("fourier_levels", c.fourier_levels);
    c.gate_hidden = j.value("gate_hidden", c.gate_hidden);
    c.posemb_hidden = j.value("posemb_hidden", c.posemb_hidden);
    return c;
}

}  // namespace

void RunConfig::validate() const {
    if (planner != "toy" && planner != "oracle" && planner != "biased-sampler") {
        throw std::invalid_argument("unknown planner '" + planner + "'");
    }
    if (horizons.empty()) throw std::invalid_argument("need at least one horizon");
    for (double h : horizons) {
        if (!(h > 0.0)) throw std::invalid_argument("horizons must be positive");
        if (h > policy.profile.horizon_s + 1e-9) {
            throw std::invalid_argument("horizon exceeds the planning horizon of profile " + policy.profile.name);
        }
    }
    if (threads < 1) throw std::invalid_argument("threads must be at least 1");
    if (!(oracle_noise_sigma >= 0.0)) throw std::invalid_argument("oracle noise must be non-negative");
    policy.validate();
}

std::string RunConfig::to_json() const {
    const ToyPolicyConfig& p = policy;
    ordered_json j;
    j["planner"] = planner;
    j["seed"] = seed;
    j["horizons"] = horizons;
    j["strict_divisor_7"] = strict_divisor_7;
    j["profile"] = p.profile.name;
    j["sampling"] = {{"k", p.sampling.k},
                     {"top_p", p.sampling.top_p},
                     {"temperature", p.sampling.temperature},
                     {"aggregation", std::string(to_string(p.sampling.aggregation))}};
    if (planner == "toy") {
        const auto v3 = [](const Eigen::Vector3d& v) { return ordered_json::array({v.x(), v.y(), v.z()}); };
        j["grid"] = {{"min", v3(p.grid.min_corner)}, {"max", v3(p.grid.max_corner)}, {"resolution", v3(p.grid.resolution)}};
        j["lift"] = {{"channels", p.lift.channels},
                     {"reduced_channels", p.lift.reduced_channels},
                     {"history_frames", p.lift.history_frames},
                     {"fourier_levels", p.lift.fourier_levels},
                     {"gate_hidden", p.lift.gate_hidden},
                     {"posemb_hidden", p.lift.posemb_hidden}};
        j["sparse_tokens"] = p.sparse_tokens;
        j["encoder"] = {{"layers", p.encoder.layers},
                        {"heads", p.encoder.heads},
                        {"d_model", p.encoder.d_model},
                        {"mlp_ratio", p.encoder.mlp_ratio}};
        j["feature_map_size"] = p.feature_map_size;
        j["accel_gain_mps2"] = p.accel_gain_mps2;
        j["speed_offsets"] = p.speed_offsets;
        j["offset_sharpness"] = p.offset_sharpness;
        j["scene_weight"] = p.scene_weight;
        j["degenerate_rate"] = p.degenerate_rate;
        j["param_seed"] = p.param_seed;
        if (p.forced_decisions) {
            ordered_json fd = ordered_json::array();
            for (auto d : *p.forced_decisions) fd.push_back(std::string(to_string(d)));
            j["forced_decisions"] = fd;
        }
        if (checkpoint) j["checkpoint"] = checkpoint->generic_string();
    } else if (planner == "oracle") {
        j["oracle"] = {{"offset", {oracle_offset.x, oracle_offset.y}}, {"noise_sigma", oracle_noise_sigma}};
    } else {
        j["biased_sampler"] = {{"stationary_prob", stationary_prob}};
    }
    return j.dump();
}

RunConfig parse_run_config(const std::string& text) {
    const json j = json::parse(text);
    check_keys(j,
               {"planner", "seed", "horizons", "strict_divisor_7", "threads", "profile", "sampling", "grid", "lift",
                "sparse_tokens", "encoder", "feature_map_size", "accel_gain_mps2", "speed_offsets",
                "offset_sharpness", "scene_weight", "degenerate_rate", "param_seed", "forced_decisions", "checkpoint",
                "oracle", "biased_sampler"},
               "run config");
    RunConfig c;
    ToyPolicyConfig& p = c.policy;
    c.planner = j.value("planner", c.planner);
    c.seed = j.value("seed", c.seed);
    c.horizons = j.value("horizons", c.horizons);
    c.strict_divisor_7 = j.value("strict_divisor_7", c.strict_divisor_7);
    c.threads = j.value("threads", c.threads);
    if (j.contains("profile")) p.profile = PlanningProfile::by_name(j["profile"].get<std::string>());
    if (j.contains("sampling")) {
        const json& s = j["sampling"];
        check_keys(s, {"k", "top_p", "temperature", "aggregation"}, "sampling");
        p.sampling.k = s.value("k", p.sampling.k);
        p.sampling.top_p = s.value("top_p", p.sampling.top_p);
        p.sampling.temperature = s.value("temperature", p.sampling.temperature);
        if (s.contains("aggregation")) p.sampling.aggregation = parse_aggregation(s["aggregation"].get<std::string>());
    }
    if (j.contains("grid")) p.grid = parse_grid(j["grid"]);
    if (j.contains("lift")) p.lift = parse_lift(j["lift"]);
    p.sparse_tokens = j.value("sparse_tokens", p.sparse_tokens);
    if (j.contains("encoder")) {
        const json& e = j["encoder"];
        check_keys(e, {"layers", "heads", "d_model", "mlp_ratio"}, "encoder");
        p.encoder.layers = e.value("layers", p.encoder.layers);
        p.encoder.heads = e.value("heads", p.encoder.heads);
        p.encoder.d_model = e.value("d_model", p.encoder.d_model);
        p.encoder.mlp_ratio = e.value("mlp_ratio", p.encoder.mlp_ratio);
    }
    p.feature_map_size = j.value("feature_map_size", p.feature_map_size);
    p.accel_gain_mps2 = j.value("accel_gain_mps2", p.accel_gain_mps2);
    p.speed_offsets = j.value("speed_offsets", p.speed_offsets);
    p.offset_sharpness = j.value("offset_sharpness", p.offset_sharpness);
    p.scene_weight = j.value("scene_weight", p.scene_weight);
    p.degenerate_rate = j.value("degenerate_rate", p.degenerate_rate);
    p.param_seed = j.value("param_seed", p.param_seed);
    if (j.contains("forced_decisions")) {
        std::vector<MetaDecision> fd;
        for (const auto& s : j["forced_decisions"]) {
            const auto d = parse_decision(s.get<std::string>());
            if (!d) throw std::invalid_argument("unknown decision '" + s.get<std::string>() + "'");
            fd.push_back(*d);
        }
        p.forced_decisions = fd;
    }
    if (j.contains("checkpoint")) c.checkpoint = j["checkpoint"].get<std::string>();
    if (j.contains("oracle")) {
        const json& o = j["oracle"];
        check_keys(o, {"offset", "noise_sigma"}, "oracle");
        if (o.contains("offset")) {
            const auto v = o["offset"].get<std::vector<double>>();
            if (v.size() != 2) throw std::invalid_argument("oracle.offset needs two values");
            c.oracle_offset = {v[0], v[1]};
        }
        c.oracle_noise_sigma = o.value("noise_sigma", c.oracle_noise_sigma);
    }
    if (j.contains("biased_sampler")) {
        const json& b = j["biased_sampler"];
        check_keys(b, {"stationary_prob"}, "biased_sampler");
        c.stationary_prob = b.value("stationary_prob", c.stationary_prob);
    }
    p.threads = c.threads;
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open run config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    RunConfig c = parse_run_config(ss.str());
    // Relative checkpoint paths resolve against the config file.
    if (c.checkpoint && c.checkpoint->is_relative()) c.checkpoint = path.parent_path() / *c.checkpoint;
    return c;
}

}  // namespace volplan
