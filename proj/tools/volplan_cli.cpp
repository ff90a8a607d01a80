#include <cstdint>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "volplan/corpus_io.hpp"
#include "volplan/evalrun.hpp"
#include "volplan/numcheck.hpp"
#include "volplan/synthetic.hpp"

namespace {

std::vector<double> parse_horizons(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    ss.imbue(std::locale::classic());
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        const double h = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad horizon '" + item + "'");
        out.push_back(h);
    }
    if (out.empty()) throw std::invalid_argument("empty horizon list");
    return out;
}

volplan::BehaviorMix parse_mix(const std::string& name) {
    if (name == "long_tail") return volplan::BehaviorMix::long_tail();
    if (name == "uniform") return volplan::BehaviorMix::uniform();
    if (auto b = volplan::parse_behavior(name)) return volplan::BehaviorMix::only(*b);
    throw std::invalid_argument("unknown behavior mix '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Volumetric planning toolkit: corpus generation, evaluation and gradient checks"};
    app.require_subcommand(1);

    // evalrun
    auto* eval = app.add_subcommand("evalrun", "Evaluate a planner on a JSONL scenario corpus");
    volplan::EvalRunOptions eo;
    std::string corpus;
    std::string out;
    std::string config;
    std::string planner;
    std::string horizons;
    std::string csv;
    std::uint64_t seed = 0;
    int threads = 0;
    int k = 0;
    double top_p = 0.0;
    eval->add_option("--corpus", corpus, "Scenario corpus (JSONL)")->required();
    eval->add_option("--planner", planner, "toy | oracle | biased-sampler");
    eval->add_option("--config", config, "Run config (JSON)");
    auto* seed_opt = eval->add_option("--seed", seed, "Base seed");
    eval->add_option("--horizons", horizons, "Comma-separated horizons in seconds, e.g. 1,3,5");
    eval->add_option("--out", out, "Report path (JSON)")->required();
    eval->add_option("--csv", csv, "Optional CSV report path");
    eval->add_flag("--strict-divisor-7", eo.strict_divisor_7, "Divide bADE by all 7 behaviors");
    auto* threads_opt = eval->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    auto* k_opt = eval->add_option("--k", k, "Candidates per scenario")->check(CLI::PositiveNumber);
    auto* p_opt = eval->add_option("--top-p", top_p, "Nucleus threshold in (0, 1]");

    // gradcheck
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of the analytic gradients");
    std::string op = "all";
    std::uint64_t grad_seed = 0;
    int grad_seeds = 1;
    double tol_rel = 1e-5;
    double tol_abs = volplan::kDefaultTolAbs;
    grad->add_option("--op", op, "Registered op name or 'all'");
    grad->add_option("--seed", grad_seed, "First seed");
    grad->add_option("--seeds", grad_seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
    grad->add_option("--tol-rel", tol_rel, "Relative tolerance");
    grad->add_option("--tol-abs", tol_abs, "Absolute tolerance");

    // generate
    auto* gen = app.add_subcommand("generate", "Write a synthetic scenario corpus");
    std::size_t n = 1000;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    std::string mix = "long_tail";
    std::string profile = "womd";
    gen->add_option("--n", n, "Number of scenarios");
    gen->add_option("--seed", gen_seed, "Corpus seed");
    gen->add_option("--out", gen_out, "Output JSONL path")->required();
    gen->add_option("--mix", mix, "long_tail | uniform | <behavior name>");
    gen->add_option("--profile", profile, "womd | nuscenes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*eval) {
            eo.corpus = corpus;
            eo.out = out;
            if (!config.empty()) eo.config = config;
            if (!planner.empty()) eo.planner = planner;
            if (*seed_opt) eo.seed = seed;
            if (!horizons.empty()) eo.horizons = parse_horizons(horizons);
            if (!csv.empty()) eo.csv = csv;
            if (*threads_opt) eo.threads = threads;
            if (*k_opt) eo.k = k;
            if (*p_opt) eo.top_p = top_p;
            const auto result = volplan::run_evalrun(eo);
            const auto& rep = result.report;
            for (const auto& h : rep.horizons) {
                std::cerr << "ADE@" << h.horizon_s << "s " << h.ade << "  bADE@" << h.horizon_s << "s " << h.bade
                          << '\n';
            }
            std::cerr << rep.failures.size() << " of " << rep.scenarios << " scenarios failed\n";
            for (const auto& v : result.violations) std::cerr << "self-check failed: " << v << '\n';
            return result.violations.empty() ? 0 : 2;
        }
        if (*grad) {
            std::vector<std::string> ops;
            if (op == "all") {
                ops = volplan::registered_ops();
            } else {
                ops.push_back(op);
            }
            std::vector<volplan::GradCheckReport> reports;
            for (const auto& name : ops) {
                for (int s = 0; s < grad_seeds; ++s) {
                    reports.push_back(volplan::check_grad(name, grad_seed + static_cast<std::uint64_t>(s), tol_rel, tol_abs));
                }
            }
            std::cout << volplan::reports_to_json(reports);
            for (const auto& r : reports) {
                if (!r.pass) return 1;
            }
            return 0;
        }
        if (*gen) {
            volplan::SyntheticSpec spec;
            spec.mix = parse_mix(mix);
            spec.profile = volplan::PlanningProfile::by_name(profile);
            if (spec.future_s < spec.profile.horizon_s) spec.future_s = spec.profile.horizon_s;
            const auto scenarios = volplan::generate_synthetic(spec, gen_seed, n);
            volplan::write_corpus(gen_out, scenarios);
            std::cerr << "wrote " << scenarios.size() << " scenarios to " << gen_out << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
