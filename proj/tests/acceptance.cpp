// Acceptance suite: one PASS/FAIL line per criterion, tolerances and time
// budgets pinned below. Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <set>
#include <string>

#include "naive_oracles.hpp"
#include "test_support.hpp"
#include "volplan/corpus_io.hpp"
#include "volplan/evalrun.hpp"
#include "volplan/metrics.hpp"
#include "volplan/numcheck.hpp"
#include "volplan/synthetic.hpp"

using namespace volplan;
using testing_support::uniform;
using testing_support::uniform_int;
namespace fs = std::filesystem;

namespace {

constexpr double kLiftTol = 1e-6;
constexpr double kGradTolRel = 1e-5;
constexpr double kMetricTol = 1e-12;
constexpr double kAggregationGain = 0.05;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, x);
    return buf;
}

LiftConfig lift_config(std::mt19937_64& rng, int channels, int history) {
    LiftConfig c;
    c.channels = channels;
    c.reduced_channels = uniform_int(rng, 1, std::min(8, channels));
    c.history_frames = history;
    c.fourier_levels = uniform_int(rng, 1, 6);
    c.gate_hidden = uniform_int(rng, 4, 16);
    c.posemb_hidden = uniform_int(rng, 4, 16);
    return c;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

Outcome lifting_oracle() {
    Outcome o;
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    const int configs = 120;
    for (int trial = 0; trial < configs; ++trial) {
        const int views = uniform_int(rng, 2, 8);
        const int channels = uniform_int(rng, 1, 32);
        const int history = uniform_int(rng, 0, 2);
        const auto s = testing_support::random_scene(rng, views, channels, history + 1, 12, 12, 6);

        const DenseVolume dense = lift_dense(s.frames[0], s.rig, s.grid);
        const oracle::Dense want = oracle::lift_dense(s.frames[0], s.rig, s.grid);
        for (std::size_t i = 0; i < s.grid.size(); ++i) {
            o.require(static_cast<bool>(dense.valid[i]) == want.valid[i], "dense validity differs");
            for (int k = 0; k < channels; ++k) {
                worst = std::max(worst, std::abs(dense.features(static_cast<Eigen::Index>(i), k) - want.features[i][k]));
            }
        }

        const LiftParams params = LiftParams::random(lift_config(rng, channels, history), rng);
        const std::size_t m = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(s.grid.size())));
        const SparseVolumeSet set = build_sparse_tokens(s.frames, s.poses, s.rig, s.grid, params, m);
        const auto gates = oracle::gate_field(s.frames, s.poses, s.rig, s.grid, params);
        o.require(set.size() == m, "sparse set has the wrong size");
        for (std::size_t i = 0; i < set.size(); ++i) {
            const std::size_t idx = set.voxel_index[i];
            worst = std::max(worst, std::abs(set.gates[i] - gates[idx]));
            const auto token = oracle::sparse_token(s.frames, s.poses, s.rig, s.grid, params, idx, gates[idx]);
            for (int k = 0; k < channels; ++k) {
                worst = std::max(worst, std::abs(set.features(static_cast<Eigen::Index>(i), k) - token[k]));
            }
        }
    }
    o.require(worst <= kLiftTol, "max abs error " + fmt("%.3g", worst));
    if (o.pass) o.detail = std::to_string(configs) + " configs, max abs error " + fmt("%.3g", worst);
    return o;
}

Outcome init_identities() {
    Outcome o;
    std::mt19937_64 rng(1002);
    const auto s = testing_support::random_scene(rng, 4, 8, 2, 8, 8, 4);
    LiftConfig cfg = lift_config(rng, 8, 1);
    const LiftParams fresh = LiftParams::fresh(cfg, rng);

    // (a) positional embedding is zero everywhere
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
        o.require(pos_embed(s.grid.center(i), s.grid, fresh).isZero(0.0), "PosEmb is not zero at init");
    }

    // (b) temporal fusion passes frame-0 tokens through
    const SparseVolumeSet set = build_sparse_tokens(s.frames, s.poses, s.rig, s.grid, fresh, s.grid.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto sem = sample_semantic(set.coords[i], s.frames[0], s.rig);
        const Eigen::VectorXd f_sem = sem ? *sem : Eigen::VectorXd::Zero(8);
        const Eigen::VectorXd expected = blend_vacant(f_sem, set.gates[i], fresh.vacant);
        o.require(set.features.row(static_cast<Eigen::Index>(i)).transpose() == expected,
                  "temporal fusion changed frame-0 features");
    }

    // (c) zero bias tables leave attention untouched
    EncoderConfig ec;
    ec.d_model = 16;
    const BiasedEncoder enc(ec, rng);
    TokenSequence seq;
    seq.visual = Eigen::MatrixXd::Random(10, 16);
    seq.text = Eigen::MatrixXd::Random(4, 16);
    for (int i = 0; i < 10; ++i) seq.visual_coords.emplace_back(uniform(rng, -100, 100), uniform(rng, -20, 20), 0.0);
    for (int i = 0; i < 4; ++i) seq.text_positions.push_back(i);
    for (int l = 0; l < ec.layers; ++l) {
        for (int h = 0; h < ec.heads; ++h) {
            o.require(relative_bias_matrix(seq, enc.tables(), l, h).isZero(0.0), "bias matrix is not zero at init");
        }
    }
    const Eigen::MatrixXd q = Eigen::MatrixXd::Random(14, 8);
    const Eigen::MatrixXd k = Eigen::MatrixXd::Random(14, 8);
    const Eigen::MatrixXd v = Eigen::MatrixXd::Random(14, 8);
    o.require(biased_attention(q, k, v, relative_bias_matrix(seq, enc.tables(), 0, 0)) == attention(q, k, v),
              "biased attention differs from plain attention");
    o.require(enc.forward(seq, true) == enc.forward(seq, false), "encoder output depends on zero bias");

    // (d) zero vacant feature: a closed gate leaves the positional embedding
    o.require(fresh.vacant.isZero(0.0), "vacant feature is not zero at init");
    LiftParams embedded = fresh;
    embedded.posemb.output.init_uniform(rng);
    const std::vector<double> closed(s.grid.size(), 0.0);
    const auto all = all_indices(s.grid.size());
    const SparseVolumeSet gated = gather_sparse_tokens(s.frames, s.poses, s.rig, s.grid, embedded, closed, {}, all);
    for (std::size_t i = 0; i < gated.size(); ++i) {
        o.require(gated.features.row(static_cast<Eigen::Index>(i)).transpose() ==
                      pos_embed(gated.coords[i], s.grid, embedded),
                  "closed-gate token differs from PosEmb");
    }
    if (o.pass) o.detail = "PosEmb, temporal FC, bias tables and vacant feature exact";
    return o;
}

Outcome gradients() {
    Outcome o;
    double worst = 0.0;
    int checks = 0;
    for (const auto& op : registered_ops()) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const GradCheckReport r = check_grad(op, seed, kGradTolRel);
            worst = std::max(worst, r.max_rel);
            ++checks;
            o.require(r.pass, op + " seed " + std::to_string(seed) + " max_rel " + fmt("%.3g", r.max_rel));
        }
    }
    // d|f|^2/dg = 2 f . (f_sem - f_vac) for the blended token f
    std::mt19937_64 rng(1003);
    int vanished = 0;
    for (int i = 0; i < 10000; ++i) {
        const int c = uniform_int(rng, 1, 32);
        Eigen::VectorXd sem(c), vac(c);
        for (int k = 0; k < c; ++k) {
            sem[k] = uniform(rng, -1, 1);
            vac[k] = uniform(rng, -1, 1);
        }
        const double g = uniform(rng, 0.01, 0.99);
        const Eigen::VectorXd f = blend_vacant(sem, g, vac);
        const double dg = 2.0 * f.dot(blend_vacant_grad(sem, g, vac).d_gate);
        const double eps = 1e-6;
        const double fd =
            (blend_vacant(sem, g + eps, vac).squaredNorm() - blend_vacant(sem, g - eps, vac).squaredNorm()) / (2 * eps);
        o.require(std::abs(dg - fd) <= 1e-6 * std::max(1.0, std::abs(fd)), "gate gradient disagrees with FD");
        vanished += dg == 0.0;
    }
    o.require(vanished == 0, std::to_string(vanished) + " gate gradients vanished");
    if (o.pass) {
        o.detail = std::to_string(checks) + " op/seed checks, max_rel " + fmt("%.3g", worst) +
                   "; gate gradient nonzero on 10000 draws";
    }
    return o;
}

Outcome bin_scheme() {
    Outcome o;
    const auto& e = log_bin_edges();
    // expected bin from the closure rules, written out independently
    auto expected = [&](double d) {
        if (d >= -8.0 && d <= 8.0) return d == 8.0 ? 23 : 16 + static_cast<int>(std::floor(d));
        const double a = std::abs(d);
        int j = 0;
        while (j < 7 && a > e[static_cast<std::size_t>(j + 1)]) ++j;
        return d > 0 ? 24 + j : 7 - j;
    };
    std::mt19937_64 rng(1004);
    std::vector<double> deltas;
    for (int i = 0; i < 100000; ++i) {
        const int kind = i % 4;
        double d = kind == 0 ? uniform(rng, -8.0, 8.0) : kind == 1 ? uniform(rng, -130.0, 130.0) : uniform(rng, -300.0, 300.0);
        if (kind == 3) {
            const double edge = i % 8 < 4 ? e[static_cast<std::size_t>(uniform_int(rng, 0, 8))]
                                          : static_cast<double>(uniform_int(rng, 0, 8));
            d = (i % 2 ? 1.0 : -1.0) * edge;
            if (i % 3 == 0) d = std::nextafter(d, uniform(rng, -1, 1) < 0 ? -1e9 : 1e9);
        }
        deltas.push_back(d);
    }
    int clamps = 0;
    for (int i = 0; i < 200; ++i) {
        const double d = (i % 2 ? 1.0 : -1.0) * uniform(rng, 128.0 + 1e-9, 1e6);
        o.require(bin_index(d) == (d > 0 ? kBiasBins - 1 : 0), "large delta does not clamp");
        ++clamps;
    }
    o.require(bin_index(200.0) == kBiasBins - 1 && bin_index(-200.0) == 0, "|delta| = 200 does not clamp");
    o.require(bin_index(0.0) == 16, "zero delta is not in bin 16");

    std::set<int> hit;
    for (double d : deltas) {
        const int b = bin_index(d);
        o.require(b == expected(d), "delta " + fmt("%.17g", d) + " lands in the wrong bin");
        hit.insert(b);
    }
    std::sort(deltas.begin(), deltas.end());
    for (std::size_t i = 1; i < deltas.size(); ++i) {
        o.require(bin_index(deltas[i - 1]) <= bin_index(deltas[i]), "bin index is not monotone");
    }
    o.require(hit.size() == static_cast<std::size_t>(kBiasBins), "not every bin is reachable");
    // unit-width linear bins
    for (int b = 8; b < 24; ++b) o.require(bin_index(b - 16 + 0.5) == b, "linear bin is not unit width");
    if (o.pass) {
        o.detail = std::to_string(deltas.size()) + " deltas monotone and exhaustive over 32 bins, " +
                   std::to_string(clamps) + " clamps";
    }
    return o;
}

Outcome heuristic_labels() {
    Outcome o;
    std::mt19937_64 rng(1005);
    int mismatches = 0;
    for (int i = 0; i < 10000; ++i) {
        const FutureTrack t = testing_support::random_track(rng, i % 2 ? 8.0 : 5.0, i % 3 ? 0.2 : 0.5);
        mismatches += classify_behavior(t) != oracle::classify(t);
    }
    for (int i = 0; i < 10000; ++i) {
        const FutureTrack t = testing_support::random_track(rng, uniform(rng, 2.0, 16.0), 0.2);
        mismatches += derive_command(t) != oracle::command(t);
    }
    for (int i = 0; i < 10000; ++i) {
        const MotionSegment s = testing_support::random_segment(rng, i);
        mismatches += label_meta_decision(s) != oracle::meta_decision(s);
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");

    // stop: under 5 m of movement and under 2 m/s
    FutureTrack creep;
    creep.dt = 0.2;
    for (int i = 0; i <= 40; ++i) creep.positions.push_back({0.1 * i, 0.0});
    creep.headings.assign(creep.positions.size(), 0.0);
    o.require(classify_behavior(creep) == Behavior::Stop, "stop fixture");
    // left U-turn: heading past 30 degrees, ending more than 5 m behind
    FutureTrack u;
    u.positions = {{0, 0}, {10, 5}, {0, 10}, {-10, 10}};
    u.headings = {0.0, 0.5 * std::numbers::pi, std::numbers::pi, std::numbers::pi};
    o.require(classify_behavior(u) == Behavior::LeftUTurn, "left U-turn fixture");
    // accelerate: 5 -> 8 m/s over 5 s
    MotionSegment seg;
    seg.dt = 0.2;
    double x = 0.0;
    for (int i = 0; i <= 25; ++i) {
        const double v = 5.0 + 3.0 * i / 25.0;
        if (i > 0) x += 0.5 * (v + seg.velocities.back().x) * seg.dt;
        seg.positions.push_back({x, 0.0});
        seg.velocities.push_back({v, 0.0});
    }
    o.require(label_meta_decision(seg) == MetaDecision::Accelerate, "accelerate fixture");
    if (o.pass) o.detail = "3 x 10000 tracks, 0 mismatches; stop, U-turn and accelerate fixtures";
    return o;
}

Outcome metric_oracles() {
    Outcome o;
    std::mt19937_64 rng(1006);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<Vec2> gt, pred;
        const Vec2 off{uniform(rng, -3, 3), uniform(rng, -3, 3)};
        for (int t = 0; t < 25; ++t) {
            gt.push_back({uniform(rng, -50, 50), uniform(rng, -50, 50)});
            pred.push_back({gt.back().x + off.x, gt.back().y + off.y});
        }
        const double a = ade(PlanTrajectory::from_waypoints(pred, 5.0), PlanTrajectory::from_waypoints(gt, 5.0), 5.0);
        worst = std::max(worst, std::abs(a - std::hypot(off.x, off.y)));
    }
    o.require(worst <= kMetricTol, "constant-offset ADE error " + fmt("%.3g", worst));

    std::vector<BehaviorSample> skew(90, {1.0, Behavior::StraightForward});
    skew.insert(skew.end(), 10, {3.0, Behavior::LeftTurn});
    o.require(mean_ade(skew) == 1.2 || std::abs(mean_ade(skew) - 1.2) <= kMetricTol, "90/10 ADE is not 1.2");
    o.require(bade(skew).value == 2.0, "90/10 bADE is not 2.0");

    std::vector<BehaviorSample> uniform_set;
    std::vector<BehaviorSample> full;
    for (int b = 0; b < kNumBehaviors; ++b) {
        for (int i = 0; i < 20; ++i) {
            uniform_set.push_back({uniform(rng, 0, 4), static_cast<Behavior>(b)});
            full.push_back({uniform(rng, 0, 4), static_cast<Behavior>(b)});
        }
    }
    o.require(std::abs(bade(uniform_set).value - mean_ade(uniform_set)) <= kMetricTol,
              "bADE differs from ADE on a uniform mix");
    // literal (1/7) sum_b (1/n_b) sum_i ADE_i on a corpus with every behavior
    double literal = 0.0;
    for (int b = 0; b < kNumBehaviors; ++b) {
        double s = 0.0;
        int n = 0;
        for (const auto& x : full) {
            if (x.behavior == static_cast<Behavior>(b)) {
                s += x.ade;
                ++n;
            }
        }
        literal += s / n;
    }
    literal /= 7.0;
    o.require(std::abs(bade(full, BadeDivisor::AllBehaviors).value - literal) <= kMetricTol,
              "strict divisor differs from the literal formula");
    if (o.pass) o.detail = "offset ADE error " + fmt("%.3g", worst) + ", 90/10 gives 1.2 / 2.0, strict divisor exact";
    return o;
}

Outcome aggregation_order() {
    Outcome o;
    SyntheticSpec spec;
    spec.views = 1;
    const auto corpus = generate_synthetic(spec, 1007, 400);
    EvalConfig ec;
    ec.horizons = {5.0};
    ec.seed = 3;
    auto score = [&](Aggregation a) {
        SamplingConfig s;
        s.k = 16;
        s.top_p = 0.9;
        s.aggregation = a;
        return evaluate(corpus, BiasedSamplerPlanner(PlanningProfile::womd(), s), ec).horizons[0].bade;
    };
    const double greedy = score(Aggregation::Greedy);
    const double mean = score(Aggregation::Mean);
    const double weighted = score(Aggregation::LikelihoodWeighted);
    const double gain = (greedy - mean) / greedy;
    o.require(gain >= kAggregationGain, "mean improves on greedy by only " + fmt("%.3f", gain));
    o.require(mean <= weighted, "mean bADE exceeds likelihood-weighted bADE");
    o.detail = "bADE@5s greedy " + fmt("%.3f", greedy) + ", mean " + fmt("%.3f", mean) + ", weighted " +
               fmt("%.3f", weighted) + " (gain " + fmt("%.1f", 100 * gain) + "%)";
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome pipeline_smoke(const fs::path& workdir) {
    Outcome o;
    fs::create_directories(workdir);
    const fs::path corpus = workdir / "longtail_1k.jsonl";
    write_corpus(corpus, generate_synthetic(SyntheticSpec{}, 2024, 1000));

    auto run = [&](const std::string& name, const std::string& planner, int threads) {
        EvalRunOptions opt;
        opt.corpus = corpus;
        opt.planner = planner;
        opt.threads = threads;
        opt.out = workdir / (name + ".json");
        const EvalRunResult r = run_evalrun(opt);
        o.require(r.violations.empty(), name + " report violates its invariants");
        o.require(r.report.failures.empty(), name + " has failed scenarios");
        return r.report;
    };
    const EvalReport first = run("toy_a", "toy", 1);
    run("toy_b", "toy", 1);
    run("toy_threads", "toy", 2);
    const std::string a = slurp(workdir / "toy_a.json");
    o.require(!a.empty() && a == slurp(workdir / "toy_b.json"), "reports differ across runs");
    o.require(a == slurp(workdir / "toy_threads.json"), "reports differ across thread counts");
    o.require(first.absent.empty(), "not every behavior is present");

    const EvalReport oracle_rep = run("oracle", "oracle", 1);
    for (const auto& h : oracle_rep.horizons) o.require(h.ade == 0.0 && h.bade == 0.0, "oracle planner scores nonzero");
    if (o.pass) {
        const auto& h5 = first.horizons.back();
        o.detail = "1000 scenarios, byte-identical across runs and threads, 7/7 behaviors, toy ADE@5s " +
                   fmt("%.3f", h5.ade) + " bADE@5s " + fmt("%.3f", h5.bade) + ", oracle 0/0";
    }
    return o;
}

Outcome sparse_selection() {
    Outcome o;
    std::mt19937_64 rng(1009);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 400));
        const int levels = uniform_int(rng, 1, 6);  // few distinct values: heavy ties
        GateField f;
        for (std::size_t i = 0; i < n; ++i) {
            f.values.push_back(uniform_int(rng, 1, levels) / (levels + 1.0));
            f.valid.push_back(uniform(rng, 0, 1) < 0.8);
        }
        const auto m = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<int>(n)));
        o.require(select_top_m(f, m) == oracle::top_m(f.values, f.valid, m), "top-M differs from the full sort");
    }

    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int channels = uniform_int(rng, 1, 16);
        const auto s = testing_support::random_scene(rng, uniform_int(rng, 2, 6), channels, 2, 10, 10, 5);
        const LiftParams params = LiftParams::fresh(lift_config(rng, channels, 1), rng);
        const std::vector<double> ones(s.grid.size(), 1.0);
        const auto all = all_indices(s.grid.size());
        const SparseVolumeSet set = gather_sparse_tokens(s.frames, s.poses, s.rig, s.grid, params, ones, {}, all);
        const DenseVolume dense = lift_dense(s.frames[0], s.rig, s.grid);
        for (std::size_t i = 0; i < all.size(); ++i) {
            if (!dense.valid[i]) continue;
            const auto r = static_cast<Eigen::Index>(i);
            worst = std::max(worst, (set.features.row(r) - dense.features.row(r)).cwiseAbs().maxCoeff());
        }
    }
    o.require(worst <= kLiftTol, "sparse vs dense error " + fmt("%.3g", worst));
    if (o.pass) o.detail = "1000 tied gate fields match; sparse vs dense max error " + fmt("%.3g", worst);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path workdir = fs::temp_directory_path() / "volplan_acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--workdir" && i + 1 < argc) {
            workdir = argv[++i];
        } else {
            std::fprintf(stderr, "usage: %s [--workdir DIR]\n", argv[0]);
            return 2;
        }
    }

    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "lifting oracle equivalence", 30.0, lifting_oracle},
        {2, "initialization identities", 1.0, init_identities},
        {3, "gradient suite", 60.0, gradients},
        {4, "bin scheme conformance", 5.0, bin_scheme},
        {5, "heuristic label oracles", 10.0, heuristic_labels},
        {6, "metric oracles", 5.0, metric_oracles},
        {7, "aggregation ordering", 60.0, aggregation_order},
        {8, "end-to-end pipeline", 120.0, [&] { return pipeline_smoke(workdir); }},
        {9, "sparse selection", 10.0, sparse_selection},
    };

    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.pass && secs > c.budget_s) {
            o.pass = false;
            o.detail = "over time budget; " + o.detail;
        }
        failed += !o.pass;
        std::printf("%s %d %s: %s [%.2fs / %.0fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                    c.budget_s);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
