#include "volplan/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "volplan/parallel.hpp"

namespace volplan {

namespace {

constexpr double kLabelWindowS = 8.0;

using nlohmann::ordered_json;

ordered_json optional_number(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string_view to_string(BadeDivisor d) {
    return d == BadeDivisor::AllBehaviors ? "all_behaviors" : "present_behaviors";
}

struct SampleOutcome {
    bool ok = false;
    Behavior behavior = Behavior::StraightForward;
    std::vector<double> ades;
    std::size_t decisions_total = 0;
    std::size_t decisions_correct = 0;
    std::size_t dropped = 0;
    std::string error;
};

}  // namespace

double ade(const PlanTrajectory& pred, const PlanTrajectory& gt, double horizon_s) {
    if (pred.frequency_hz() != gt.frequency_hz()) throw std::invalid_argument("ADE needs equal sampling rates");
    if (!(horizon_s > 0.0)) throw std::invalid_argument("ADE horizon must be positive");
    const std::size_t n = steps_for(horizon_s, gt.frequency_hz());
    if (n > pred.size() || n > gt.size()) throw std::invalid_argument("ADE horizon exceeds a trajectory");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = std::hypot(pred[i].x - gt[i].x, pred[i].y - gt[i].y);
    return pairwise_sum(d) / static_cast<double>(n);
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

BadeResult bade(std::span<const BehaviorSample> samples, BadeDivisor divisor) {
    if (samples.empty()) throw std::invalid_argument("bADE needs at least one sample");
    std::array<std::vector<double>, kNumBehaviors> groups;
    for (const auto& s : samples) groups.at(static_cast<std::size_t>(s.behavior)).push_back(s.ade);

    BadeResult r;
    std::vector<double> means;
    for (std::size_t b = 0; b < groups.size(); ++b) {
        r.counts[b] = groups[b].size();
        if (groups[b].empty()) {
            r.absent.push_back(static_cast<Behavior>(b));
            continue;
        }
        const double m = pairwise_sum(groups[b]) / static_cast<double>(groups[b].size());
        r.per_behavior[b] = m;
        means.push_back(m);
    }
    const double denom = divisor == BadeDivisor::AllBehaviors ? kNumBehaviors : static_cast<double>(means.size());
    r.value = pairwise_sum(means) / denom;
    return r;
}

double mean_ade(std::span<const BehaviorSample> samples) {
    if (samples.empty()) throw std::invalid_argument("ADE needs at least one sample");
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(s.ade);
    return pairwise_sum(v) / static_cast<double>(v.size());
}

Behavior label_behavior(const Scenario& sc) {
    return classify_behavior(FutureTrack::from_trajectory(sc.ground_truth, sc.ground_truth_headings).prefix(kLabelWindowS));
}

EvalReport evaluate(std::span<const Scenario> scenarios, const Planner& planner, const EvalConfig& config) {
    if (scenarios.empty()) throw std::invalid_argument("evaluation corpus is empty");
    if (config.horizons.empty()) throw std::invalid_argument("need at least one horizon");

    std::vector<SampleOutcome> outcomes(scenarios.size());
    parallel_for(scenarios.size(), config.threads, [&](std::size_t i) {
        const Scenario& sc = scenarios[i];
        SampleOutcome& out = outcomes[i];
        try {
            out.behavior = label_behavior(sc);
            const PlanResult r = planner.plan(sc, derive_seed(config.seed, i));
            for (double h : config.horizons) out.ades.push_back(ade(r.trajectory, sc.ground_truth, h));
            out.dropped = r.dropped;
            if (!r.decisions.empty()) {
                const PlanningProfile prof = PlanningProfile::by_name(sc.profile);
                const auto truth = label_stage_decisions(sc.ground_truth, current_velocity(sc.history), prof);
                for (std::size_t s = 0; s < truth.size() && s < r.decisions.size(); ++s) {
                    ++out.decisions_total;
                    if (truth[s] == r.decisions[s]) ++out.decisions_correct;
                }
            }
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.error = e.what();
        }
    });

    EvalReport rep;
    rep.planner = planner.name();
    rep.divisor = config.divisor;
    rep.scenarios = scenarios.size();
    rep.config_echo = config.config_echo;

    std::array<std::size_t, kNumBehaviors> dec_total{};
    std::array<std::size_t, kNumBehaviors> dec_correct{};
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        if (!o.ok) {
            rep.failures.push_back({scenarios[i].id, o.error});
            continue;
        }
        const auto b = static_cast<std::size_t>(o.behavior);
        ++rep.counts[b];
        dec_total[b] += o.decisions_total;
        dec_correct[b] += o.decisions_correct;
        rep.dropped_candidates += o.dropped;
    }
    for (std::size_t b = 0; b < kNumBehaviors; ++b) {
        if (rep.counts[b] == 0) rep.absent.push_back(static_cast<Behavior>(b));
        if (dec_total[b] > 0) {
            rep.decision_accuracy[b] = static_cast<double>(dec_correct[b]) / static_cast<double>(dec_total[b]);
        }
    }

    for (std::size_t h = 0; h < config.horizons.size(); ++h) {
        std::vector<BehaviorSample> samples;
        for (const auto& o : outcomes) {
            if (o.ok) samples.push_back({o.ades[h], o.behavior});
        }
        HorizonMetrics m;
        m.horizon_s = config.horizons[h];
        if (!samples.empty()) {
            const BadeResult br = bade(samples, config.divisor);
            m.ade = mean_ade(samples);
            m.bade = br.value;
            m.per_behavior = br.per_behavior;
        }
        rep.horizons.push_back(m);
    }
    return rep;
}

std::vector<std::string> EvalReport::self_check() const {
    std::vector<std::string> bad;
    std::size_t total = failures.size();
    for (auto c : counts) total += c;
    if (total != scenarios) bad.push_back("behavior counts plus failures do not sum to the corpus size");
    if (failures.size() == scenarios) bad.push_back("every scenario failed");
    for (const auto& h : horizons) {
        if (!std::isfinite(h.ade) || h.ade < 0.0) bad.push_back("ADE is negative or not finite");
        if (!std::isfinite(h.bade) || h.bade < 0.0) bad.push_back("bADE is negative or not finite");
        for (std::size_t b = 0; b < kNumBehaviors; ++b) {
            if (h.per_behavior[b].has_value() != (counts[b] > 0)) {
                bad.push_back("per-behavior table disagrees with behavior counts");
            }
        }
    }
    for (const auto& a : decision_accuracy) {
        if (a && (*a < 0.0 || *a > 1.0)) bad.push_back("decision accuracy outside [0, 1]");
    }
    return bad;
}

std::string EvalReport::to_json() const {
    ordered_json j;
    j["schema"] = kReportSchema;
    j["planner"] = planner;
    j["bade_divisor"] = to_string(divisor);
    j["scenarios"] = scenarios;
    j["failed"] = failures.size();
    j["dropped_candidates"] = dropped_candidates;

    ordered_json counts_j = ordered_json::object();
    for (std::size_t b = 0; b < kNumBehaviors; ++b) counts_j[std::string(to_string(static_cast<Behavior>(b)))] = counts[b];
    j["counts"] = counts_j;
    ordered_json absent_j = ordered_json::array();
    for (auto b : absent) absent_j.push_back(std::string(to_string(b)));
    j["absent_behaviors"] = absent_j;

    ordered_json hs = ordered_json::array();
    for (const auto& h : horizons) {
        ordered_json hj;
        hj["horizon_s"] = h.horizon_s;
        hj["ade"] = h.ade;
        hj["bade"] = h.bade;
        ordered_json per = ordered_json::object();
        for (std::size_t b = 0; b < kNumBehaviors; ++b) {
            per[std::string(to_string(static_cast<Behavior>(b)))] = optional_number(h.per_behavior[b]);
        }
        hj["ade_by_behavior"] = per;
        hs.push_back(hj);
    }
    j["horizons"] = hs;

    ordered_json acc = ordered_json::object();
    for (std::size_t b = 0; b < kNumBehaviors; ++b) {
        acc[std::string(to_string(static_cast<Behavior>(b)))] = optional_number(decision_accuracy[b]);
    }
    j["decision_accuracy"] = acc;

    ordered_json fails = ordered_json::array();
    for (const auto& f : failures) fails.push_back({{"id", f.scenario_id}, {"error", f.message}});
    j["failures"] = fails;
    j["config"] = ordered_json::parse(config_echo);
    return j.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "horizon_s,behavior,count,ade\n";
    for (const auto& h : horizons) {
        os << h.horizon_s << ",all," << (scenarios - failures.size()) << ',' << h.ade << '\n';
        os << h.horizon_s << ",bade,," << h.bade << '\n';
        for (std::size_t b = 0; b < kNumBehaviors; ++b) {
            os << h.horizon_s << ',' << to_string(static_cast<Behavior>(b)) << ',' << counts[b] << ',';
            if (h.per_behavior[b]) os << *h.per_behavior[b];
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace volplan
