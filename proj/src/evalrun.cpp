#include "volplan/evalrun.hpp"

#include <fstream>
#include <stdexcept>

#include "volplan/checkpoint.hpp"
#include "volplan/corpus_io.hpp"

namespace volplan {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::unique_ptr<Planner> make_planner(const RunConfig& c) {
    c.validate();
    if (c.planner == "oracle") {
        return std::make_unique<OraclePlanner>(c.policy.profile, c.oracle_offset, c.oracle_noise_sigma);
    }
    if (c.planner == "biased-sampler") {
        return std::make_unique<BiasedSamplerPlanner>(c.policy.profile, c.policy.sampling, c.stationary_prob);
    }
    PlannerPolicy policy(c.policy);
    if (c.checkpoint) {
        const Checkpoint ckpt = load_checkpoint(*c.checkpoint);
        import_lift(ckpt, policy.lift());
        import_bias_tables(ckpt, policy.encoder().tables());
    }
    return std::make_unique<ToyPlanner>(std::move(policy));
}

RunConfig resolve_run_config(const EvalRunOptions& o) {
    RunConfig c = o.config ? load_run_config(*o.config) : RunConfig{};
    if (o.planner) c.planner = *o.planner;
    if (o.seed) c.seed = *o.seed;
    if (o.horizons) c.horizons = *o.horizons;
    if (o.strict_divisor_7) c.strict_divisor_7 = true;
    if (o.threads) c.threads = *o.threads;
    if (o.k) c.policy.sampling.k = *o.k;
    if (o.top_p) c.policy.sampling.top_p = *o.top_p;
    c.policy.threads = c.threads;
    c.validate();
    return c;
}

EvalRunResult run_evalrun(const EvalRunOptions& o) {
    const RunConfig cfg = resolve_run_config(o);
    const auto scenarios = read_corpus(o.corpus);
    if (scenarios.empty()) throw std::invalid_argument("corpus " + o.corpus.string() + " holds no scenarios");
    for (const auto& sc : scenarios) {
        if (sc.profile != cfg.policy.profile.name) {
            throw std::invalid_argument("scenario " + sc.id + " uses profile " + sc.profile + ", run config uses " +
                                        cfg.policy.profile.name);
        }
    }
    const auto planner = make_planner(cfg);

    EvalConfig ec;
    ec.horizons = cfg.horizons;
    ec.divisor = cfg.strict_divisor_7 ? BadeDivisor::AllBehaviors : BadeDivisor::PresentBehaviors;
    ec.threads = cfg.threads;
    ec.seed = cfg.seed;
    ec.config_echo = cfg.to_json();

    EvalRunResult r{evaluate(scenarios, *planner, ec), {}};
    r.violations = r.report.self_check();
    write_text(o.out, r.report.to_json());
    if (o.csv) write_text(*o.csv, r.report.to_csv());
    return r;
}

}  // namespace volplan
