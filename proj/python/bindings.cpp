#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "volplan/attention_bias.hpp"
#include "volplan/behavior.hpp"
#include "volplan/corpus_io.hpp"
#include "volplan/evalrun.hpp"
#include "volplan/metrics.hpp"
#include "volplan/numcheck.hpp"
#include "volplan/planner.hpp"
#include "volplan/synthetic.hpp"
#include "volplan/text_codec.hpp"
#include "volplan/volume_lift.hpp"

namespace py = pybind11;
using namespace volplan;

namespace {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

std::vector<Vec2> to_vec2(const Points& p) {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back({p(i, 0), p(i, 1)});
    return out;
}

Points from_vec2(const std::vector<Vec2>& v) {
    Points p(static_cast<Eigen::Index>(v.size()), 2);
    for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Eigen::Index>(i)) << v[i].x, v[i].y;
    return p;
}

template <typename T>
T parse_or_throw(std::optional<T> v, const std::string& what, const std::string& name) {
    if (!v) throw py::value_error("unknown " + what + " '" + name + "'");
    return *v;
}

FutureTrack make_track(const Points& positions, const std::optional<std::vector<double>>& headings, double dt) {
    FutureTrack t;
    t.positions = to_vec2(positions);
    t.headings = headings ? *headings : derive_headings(t.positions);
    t.dt = dt;
    return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Native core of the volplan toolkit";

    py::register_exception<PlanParseError>(m, "PlanParseError", PyExc_ValueError);
    py::register_exception<PlanningError>(m, "PlanningError", PyExc_RuntimeError);

    // text codec
    m.def("format2", &format2, py::arg("x"), "Two-decimal text, half away from zero.");
    m.def("quantize2", &quantize2, py::arg("x"));
    m.def(
        "encode_prompt",
        [](const Points& p, const Points& v, const Points& a, double frequency_hz, const std::string& command) {
            if (p.rows() != v.rows() || p.rows() != a.rows()) throw py::value_error("history arrays differ in length");
            std::vector<EgoState> steps;
            for (Eigen::Index i = 0; i < p.rows(); ++i) {
                steps.push_back({{p(i, 0), p(i, 1)}, {v(i, 0), v(i, 1)}, {a(i, 0), a(i, 1)}});
            }
            return encode_prompt(EgoStateHistory(std::move(steps), frequency_hz),
                                 parse_or_throw(parse_command(command), "command", command));
        },
        py::arg("positions"), py::arg("velocities"), py::arg("accelerations"), py::arg("frequency_hz"),
        py::arg("command"));
    m.def(
        "encode_target",
        [](const std::vector<std::string>& decisions, const Points& waypoints, double frequency_hz) {
            std::vector<MetaDecision> ds;
            for (const auto& d : decisions) ds.push_back(parse_or_throw(parse_decision(d), "decision", d));
            return encode_target(ds, PlanTrajectory::from_waypoints(to_vec2(waypoints), frequency_hz),
                                 static_cast<int>(ds.size()));
        },
        py::arg("decisions"), py::arg("waypoints"), py::arg("frequency_hz"));
    m.def(
        "decode_plan",
        [](const std::string& text, const std::string& profile) {
            const DecodedPlan plan = decode_plan(text, PlanningProfile::by_name(profile));
            std::vector<std::string> ds;
            for (auto d : plan.decisions) ds.emplace_back(to_string(d));
            return py::make_tuple(ds, from_vec2(plan.trajectory.waypoints()));
        },
        py::arg("text"), py::arg("profile") = "womd");

    // attention bias bins
    m.def("bin_index", &bin_index, py::arg("delta"));
    m.def("log_bin_edges", [] {
        const auto& e = log_bin_edges();
        return std::vector<double>(e.begin(), e.end());
    });
    m.attr("BIAS_BINS") = kBiasBins;

    // behavior heuristics
    m.def(
        "classify_behavior",
        [](const Points& positions, std::optional<std::vector<double>> headings, double dt) {
            return std::string(to_string(classify_behavior(make_track(positions, headings, dt))));
        },
        py::arg("positions"), py::arg("headings") = py::none(), py::arg("dt") = 0.2,
        "Behavior of an ego-frame track whose first row is the origin.");
    m.def(
        "derive_command",
        [](const Points& positions, std::optional<std::vector<double>> headings, double dt, double base, double step) {
            return std::string(to_string(derive_command(make_track(positions, headings, dt), base, step)));
        },
        py::arg("positions"), py::arg("headings") = py::none(), py::arg("dt") = 0.2, py::arg("base_horizon_s") = 8.0,
        py::arg("step_s") = 2.0);
    m.def(
        "label_meta_decision",
        [](const Points& positions, const Points& velocities, double dt) {
            return std::string(to_string(label_meta_decision({to_vec2(positions), to_vec2(velocities), dt})));
        },
        py::arg("positions"), py::arg("velocities"), py::arg("dt") = 0.2);

    // sampling
    m.def(
        "nucleus_support", [](const std::vector<double>& p, double top_p) { return nucleus_support(p, top_p); },
        py::arg("probs"), py::arg("top_p"));

    // metrics
    m.def(
        "ade",
        [](const Points& pred, const Points& gt, double frequency_hz, double horizon_s) {
            return ade(PlanTrajectory::from_waypoints(to_vec2(pred), frequency_hz),
                       PlanTrajectory::from_waypoints(to_vec2(gt), frequency_hz), horizon_s);
        },
        py::arg("pred"), py::arg("gt"), py::arg("frequency_hz"), py::arg("horizon_s"));
    m.def(
        "bade",
        [](const std::vector<double>& ades, const std::vector<std::string>& behaviors, bool strict_divisor_7) {
            if (ades.size() != behaviors.size()) throw py::value_error("need one behavior per ADE value");
            std::vector<BehaviorSample> samples;
            for (std::size_t i = 0; i < ades.size(); ++i) {
                samples.push_back({ades[i], parse_or_throw(parse_behavior(behaviors[i]), "behavior", behaviors[i])});
            }
            const BadeResult r =
                bade(samples, strict_divisor_7 ? BadeDivisor::AllBehaviors : BadeDivisor::PresentBehaviors);
            py::dict per;
            for (std::size_t b = 0; b < kNumBehaviors; ++b) {
                if (r.per_behavior[b]) per[py::str(std::string(to_string(static_cast<Behavior>(b))))] = *r.per_behavior[b];
            }
            std::vector<std::string> absent;
            for (auto b : r.absent) absent.emplace_back(to_string(b));
            py::dict out;
            out["value"] = r.value;
            out["per_behavior"] = per;
            out["absent"] = absent;
            return out;
        },
        py::arg("ades"), py::arg("behaviors"), py::arg("strict_divisor_7") = false);

    // volume lifting
    m.def(
        "lift_dense",
        [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& maps, int views,
           double fov_deg, int image_size, const Eigen::Vector3d& grid_min, const Eigen::Vector3d& grid_max,
           const Eigen::Vector3d& resolution) {
            if (static_cast<int>(maps.size()) != views) throw py::value_error("need one feature map per view");
            std::vector<FeatureMap> fms;
            for (const auto& a : maps) {
                if (a.ndim() != 3) throw py::value_error("feature maps must be (H, W, C) arrays");
                fms.emplace_back(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                                 static_cast<int>(a.shape(2)), std::vector<double>(a.data(), a.data() + a.size()));
            }
            VolumeGrid grid{grid_min, grid_max, resolution};
            grid.validate();
            const DenseVolume vol = lift_dense(fms, make_surround_rig(views, fov_deg, image_size), grid);
            return py::make_tuple(vol.features, std::vector<bool>(vol.valid.begin(), vol.valid.end()));
        },
        py::arg("maps"), py::arg("views"), py::arg("fov_deg") = 90.0, py::arg("image_size") = 448,
        py::arg("grid_min") = Eigen::Vector3d(-30.0, -30.0, -2.0), py::arg("grid_max") = Eigen::Vector3d(80.0, 30.0, 8.0),
        py::arg("resolution") = Eigen::Vector3d(5.0, 5.0, 2.0),
        "Lift per-view maps of a surround rig into voxel features (x-major order).");

    // gradient checks
    m.def("registered_ops", &registered_ops);
    m.def(
        "check_grad",
        [](const std::string& op, std::uint64_t seed, double tol_rel, double tol_abs) {
            if (!is_registered(op)) throw py::key_error("no gradient check registered for op '" + op + "'");
            const GradCheckReport r = check_grad(op, seed, tol_rel, tol_abs);
            py::dict d;
            d["op"] = r.op;
            d["pass"] = r.pass;
            d["max_rel"] = r.max_rel;
            d["max_abs"] = r.max_abs;
            d["worst_index"] = r.worst_index;
            return d;
        },
        py::arg("op"), py::arg("seed") = 0, py::arg("tol_rel") = 1e-5, py::arg("tol_abs") = kDefaultTolAbs);

    // corpora and evaluation
    m.def(
        "generate_corpus",
        [](const std::filesystem::path& out, std::size_t n, std::uint64_t seed, const std::string& mix) {
            SyntheticSpec spec;
            if (mix == "uniform") {
                spec.mix = BehaviorMix::uniform();
            } else if (mix != "long_tail") {
                spec.mix = BehaviorMix::only(parse_or_throw(parse_behavior(mix), "behavior", mix));
            }
            const auto scenarios = generate_synthetic(spec, seed, n);
            write_corpus(out, scenarios);
            std::vector<std::string> labels;
            for (const auto& sc : scenarios) labels.emplace_back(to_string(label_behavior(sc)));
            return labels;
        },
        py::arg("out"), py::arg("n"), py::arg("seed") = 0, py::arg("mix") = "long_tail",
        "Write a synthetic JSONL corpus; returns the behavior label of each scenario.");
    m.def(
        "evalrun",
        [](const std::filesystem::path& corpus, const std::filesystem::path& out, std::optional<std::string> planner,
           std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> config,
           std::optional<std::vector<double>> horizons, bool strict_divisor_7, std::optional<int> threads) {
            EvalRunOptions o;
            o.corpus = corpus;
            o.out = out;
            o.planner = planner;
            o.seed = seed;
            o.config = config;
            o.horizons = horizons;
            o.strict_divisor_7 = strict_divisor_7;
            o.threads = threads;
            EvalRunResult r;
            {
                py::gil_scoped_release release;
                r = run_evalrun(o);
            }
            return py::make_tuple(r.report.to_json(), r.violations);
        },
        py::arg("corpus"), py::arg("out"), py::arg("planner") = py::none(), py::arg("seed") = py::none(),
        py::arg("config") = py::none(), py::arg("horizons") = py::none(), py::arg("strict_divisor_7") = false,
        py::arg("threads") = py::none(), "Run an evaluation; returns (report JSON text, self-check violations).");
}
