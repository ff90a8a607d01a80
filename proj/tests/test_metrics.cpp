#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "test_support.hpp"
#include "volplan/corpus_io.hpp"
#include "volplan/metrics.hpp"
#include "volplan/synthetic.hpp"

using namespace volplan;

namespace {

PlanTrajectory line(double dx, double dy, std::size_t n, double freq = 5.0) {
    std::vector<Vec2> w;
    for (std::size_t i = 1; i <= n; ++i) w.push_back({dx * static_cast<double>(i), dy * static_cast<double>(i)});
    return PlanTrajectory::from_waypoints(std::move(w), freq);
}

std::vector<BehaviorSample> repeat(Behavior b, double value, std::size_t n) {
    return std::vector<BehaviorSample>(n, BehaviorSample{value, b});
}

const std::vector<Scenario>& corpus() {
    static const std::vector<Scenario> c = [] {
        SyntheticSpec spec;
        spec.mix = BehaviorMix::uniform();
        return generate_synthetic(spec, 2025, 140);
    }();
    return c;
}

}  // namespace

TEST_SUITE("metrics_eval") {
    TEST_CASE("ADE fixtures") {
        const PlanTrajectory gt = line(1.0, 0.0, 25);
        CHECK(ade(gt, gt, 5.0) == 0.0);
        std::vector<Vec2> shifted;
        for (const auto& p : gt.waypoints()) shifted.push_back({p.x + 3.0, p.y + 4.0});
        CHECK(ade(PlanTrajectory::from_waypoints(shifted, 5.0), gt, 5.0) == 5.0);
        // error grows by 1 m per step: mean over the first 5 samples is 3
        CHECK(ade(line(2.0, 0.0, 25), gt, 1.0) == doctest::Approx(3.0));
        CHECK(ade(line(2.0, 0.0, 25), gt, 5.0) == doctest::Approx(13.0));
        CHECK_THROWS_AS(ade(line(1.0, 0.0, 5), gt, 3.0), std::invalid_argument);
        CHECK_THROWS_AS(ade(line(1.0, 0.0, 25, 2.0), gt, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(ade(gt, gt, 0.0), std::invalid_argument);
    }

    TEST_CASE("pairwise sums") {
        const std::vector<double> ones(1000, 0.1);
        CHECK(pairwise_sum(ones) == doctest::Approx(100.0).epsilon(1e-14));
        CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
        std::mt19937_64 rng(2);
        std::vector<double> v(777);
        for (auto& x : v) x = testing_support::uniform(rng, 0.0, 1.0);
        double naive = 0.0;
        for (double x : v) naive += x;
        CHECK(pairwise_sum(v) == doctest::Approx(naive).epsilon(1e-13));
    }

    TEST_CASE("bADE weights behaviors equally") {
        auto s = repeat(Behavior::StraightForward, 0.0, 10);
        const auto stops = repeat(Behavior::Stop, 1.0, 10);
        s.insert(s.end(), stops.begin(), stops.end());
        CHECK(bade(s).value == 0.5);
        CHECK(mean_ade(s) == 0.5);

        auto skew = repeat(Behavior::StraightForward, 1.0, 90);
        const auto turns = repeat(Behavior::LeftTurn, 3.0, 10);
        skew.insert(skew.end(), turns.begin(), turns.end());
        CHECK(mean_ade(skew) == doctest::Approx(1.2));
        const BadeResult r = bade(skew);
        CHECK(r.value == 2.0);
        CHECK(r.counts[static_cast<std::size_t>(Behavior::LeftTurn)] == 10);
        CHECK(r.absent.size() == 5);
        CHECK_FALSE(r.per_behavior[static_cast<std::size_t>(Behavior::Stop)].has_value());

        CHECK(bade(skew, BadeDivisor::AllBehaviors).value == doctest::Approx(4.0 / 7.0));
        CHECK_THROWS_AS(bade(std::vector<BehaviorSample>{}), std::invalid_argument);
    }

    TEST_CASE("bADE ignores duplication within a behavior") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<BehaviorSample> s;
            for (int i = 0; i < 30; ++i) {
                s.push_back({testing_support::uniform(rng, 0, 5),
                             static_cast<Behavior>(testing_support::uniform_int(rng, 0, kNumBehaviors - 1))});
            }
            // duplicate every sample of one behavior k times
            const auto target = s[0].behavior;
            std::vector<BehaviorSample> dup = s;
            for (const auto& x : s) {
                if (x.behavior == target) {
                    for (int k = 0; k < 3; ++k) dup.push_back(x);
                }
            }
            CHECK(bade(dup).value == doctest::Approx(bade(s).value).epsilon(1e-12));
        }
    }

    TEST_CASE("oracle and offset planners score exactly") {
        EvalConfig cfg;
        const EvalReport exact = evaluate(corpus(), OraclePlanner(PlanningProfile::womd()), cfg);
        REQUIRE(exact.horizons.size() == 3);
        for (const auto& h : exact.horizons) {
            CHECK(h.ade == 0.0);
            CHECK(h.bade == 0.0);
        }
        CHECK(exact.failures.empty());
        CHECK(exact.absent.empty());
        CHECK(exact.self_check().empty());
        for (const auto& acc : exact.decision_accuracy) {
            REQUIRE(acc.has_value());
            CHECK(*acc == 1.0);
        }

        const EvalReport off = evaluate(corpus(), OraclePlanner(PlanningProfile::womd(), {1.0, 0.0}), cfg);
        for (const auto& h : off.horizons) {
            CHECK(h.ade == 1.0);
            CHECK(h.bade == 1.0);
        }
    }

    TEST_CASE("noisy oracle converges to the Rayleigh mean") {
        const double sigma = 0.5;
        EvalConfig cfg;
        cfg.horizons = {5.0};
        const EvalReport r = evaluate(corpus(), OraclePlanner(PlanningProfile::womd(), {}, sigma), cfg);
        const double n = static_cast<double>(corpus().size()) * 25.0;
        const double mean = sigma * std::sqrt(std::numbers::pi / 2.0);
        const double sd = sigma * std::sqrt((4.0 - std::numbers::pi) / 2.0);
        CHECK(std::abs(r.horizons[0].ade - mean) < 3.0 * sd / std::sqrt(n));
    }

    TEST_CASE("report totals and serialization") {
        EvalConfig cfg;
        cfg.seed = 9;
        const EvalReport a = evaluate(corpus(), OraclePlanner(PlanningProfile::womd(), {}, 0.3), cfg);
        std::size_t total = 0;
        for (auto c : a.counts) total += c;
        CHECK(total + a.failures.size() == corpus().size());
        CHECK(a.self_check().empty());

        cfg.threads = 4;
        const EvalReport b = evaluate(corpus(), OraclePlanner(PlanningProfile::womd(), {}, 0.3), cfg);
        CHECK(a.to_json() == b.to_json());
        CHECK(a.to_csv() == b.to_csv());
        CHECK(a.to_json().find(kReportSchema) != std::string::npos);

        EvalReport broken = a;
        broken.counts[0] += 1;
        CHECK_FALSE(broken.self_check().empty());
    }

    TEST_CASE("failed scenarios are counted, not scored") {
        std::vector<Scenario> c(corpus().begin(), corpus().begin() + 10);
        c[3].ground_truth = line(1.0, 0.0, 10);  // shorter than the 5 s horizon
        const EvalReport r = evaluate(c, OraclePlanner(PlanningProfile::womd()), EvalConfig{});
        CHECK(r.failures.size() == 1);
        CHECK(r.failures[0].scenario_id == c[3].id);
        CHECK(r.self_check().empty());
    }

    TEST_CASE("synthetic corpora are deterministic and follow the mix") {
        SyntheticSpec stop_only;
        stop_only.mix = BehaviorMix::only(Behavior::Stop);
        for (const auto& sc : generate_synthetic(stop_only, 3, 50)) CHECK(label_behavior(sc) == Behavior::Stop);

        const SyntheticSpec spec;
        const auto a = generate_synthetic(spec, 11, 30);
        const auto b = generate_synthetic(spec, 11, 30);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(scenario_to_json(a[i]) == scenario_to_json(b[i]));
        CHECK(scenario_to_json(generate_synthetic(spec, 12, 1)[0]) != scenario_to_json(a[0]));

        SyntheticSpec light = spec;
        light.views = 1;
        const std::size_t n = 10000;
        std::array<std::size_t, kNumBehaviors> counts{};
        for (const auto& sc : generate_synthetic(light, 99, n)) ++counts[static_cast<std::size_t>(label_behavior(sc))];
        const BehaviorMix mix = BehaviorMix::long_tail();
        double total = 0.0;
        for (double w : mix.weights) total += w;
        for (int b = 0; b < kNumBehaviors; ++b) {
            const double expected = mix.weights[static_cast<std::size_t>(b)] / total;
            CHECK(std::abs(static_cast<double>(counts[static_cast<std::size_t>(b)]) / n - expected) < 0.02);
        }
    }
}
