#include "volplan/corpus_io.hpp"

#include <fstream>

#include "json.hpp"

namespace volplan {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json pair(const Vec2& v) { return ordered_json::array({v.x, v.y}); }

Vec2 read_pair(const json& j) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("expected an [x, y] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

ordered_json pose_json(const RigidPose& p) {
    ordered_json rot = ordered_json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) rot.push_back(p.rotation(r, c));
    }
    return {{"rotation", rot},
            {"translation", ordered_json::array({p.translation.x(), p.translation.y(), p.translation.z()})}};
}

RigidPose read_pose(const json& j) {
    const auto rot = j.at("rotation").get<std::vector<double>>();
    const auto tr = j.at("translation").get<std::vector<double>>();
    if (rot.size() != 9 || tr.size() != 3) throw std::invalid_argument("pose needs 9 rotation and 3 translation values");
    RigidPose p;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) p.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
    }
    p.translation = {tr[0], tr[1], tr[2]};
    return p;
}

}  // namespace

std::string scenario_to_json(const Scenario& sc) {
    ordered_json j;
    j["id"] = sc.id;
    j["profile"] = sc.profile;
    j["command"] = std::string(to_string(sc.command));

    ordered_json steps = ordered_json::array();
    for (const auto& s : sc.history.steps()) {
        steps.push_back({{"p", pair(s.position)}, {"v", pair(s.velocity)}, {"a", pair(s.acceleration)}});
    }
    j["history"] = {{"frequency_hz", sc.history.frequency_hz()}, {"steps", steps}};

    ordered_json wps = ordered_json::array();
    for (const auto& w : sc.ground_truth.waypoints()) wps.push_back(pair(w));
    ordered_json gt = {{"horizon_s", sc.ground_truth.horizon_s()},
                       {"frequency_hz", sc.ground_truth.frequency_hz()},
                       {"waypoints", wps}};
    if (!sc.ground_truth_headings.empty()) gt["headings"] = sc.ground_truth_headings;
    j["ground_truth"] = gt;

    ordered_json rig = ordered_json::array();
    for (const auto& cam : sc.rig) {
        ordered_json c = {{"fx", cam.intrinsics.fx},     {"fy", cam.intrinsics.fy},
                          {"cx", cam.intrinsics.cx},     {"cy", cam.intrinsics.cy},
                          {"width", cam.image_width},    {"height", cam.image_height},
                          {"near_plane", cam.near_plane}};
        c["extrinsic"] = pose_json(cam.extrinsic);
        rig.push_back(c);
    }
    j["rig"] = rig;

    ordered_json frames = ordered_json::array();
    for (const auto& f : sc.frames) {
        ordered_json fj;
        fj["timestamp_s"] = f.timestamp_s;
        ordered_json blobs = ordered_json::array();
        for (const auto& b : f.blobs) {
            ordered_json bj = {{"center", ordered_json::array({b.center.x(), b.center.y(), b.center.z()})},
                               {"radius", b.radius}};
            if (b.feature.empty()) {
                bj["feature_seed"] = b.feature_seed;
            } else {
                bj["feature"] = b.feature;
            }
            blobs.push_back(bj);
        }
        fj["blobs"] = blobs;
        if (!f.maps.empty()) {
            ordered_json maps = ordered_json::array();
            for (const auto& m : f.maps) {
                maps.push_back(
                    {{"height", m.height()}, {"width", m.width()}, {"channels", m.channels()}, {"data", m.data()}});
            }
            fj["maps"] = maps;
        }
        frames.push_back(fj);
    }
    j["frames"] = frames;

    ordered_json poses = ordered_json::array();
    for (const auto& p : sc.ego_poses) poses.push_back(pose_json(p));
    j["ego_poses"] = poses;
    return j.dump();
}

Scenario scenario_from_json(std::string_view line) {
    const json j = json::parse(line);
    Scenario sc;
    sc.id = j.at("id").get<std::string>();
    sc.profile = j.value("profile", std::string("womd"));
    const auto cmd = parse_command(j.at("command").get<std::string>());
    if (!cmd) throw std::invalid_argument("unknown command '" + j.at("command").get<std::string>() + "'");
    sc.command = *cmd;

    const json& h = j.at("history");
    std::vector<EgoState> steps;
    for (const auto& s : h.at("steps")) {
        steps.push_back({read_pair(s.at("p")), read_pair(s.at("v")), read_pair(s.at("a"))});
    }
    sc.history = EgoStateHistory(std::move(steps), h.at("frequency_hz").get<double>());

    const json& gt = j.at("ground_truth");
    std::vector<Vec2> wps;
    for (const auto& w : gt.at("waypoints")) wps.push_back(read_pair(w));
    sc.ground_truth = PlanTrajectory(std::move(wps), gt.at("horizon_s").get<double>(),
                                     gt.at("frequency_hz").get<double>());
    if (gt.contains("headings")) sc.ground_truth_headings = gt.at("headings").get<std::vector<double>>();

    for (const auto& c : j.value("rig", json::array())) {
        CameraModel cam;
        cam.intrinsics = {c.at("fx").get<double>(), c.at("fy").get<double>(), c.at("cx").get<double>(),
                          c.at("cy").get<double>()};
        cam.image_width = c.at("width").get<int>();
        cam.image_height = c.at("height").get<int>();
        cam.near_plane = c.value("near_plane", 0.1);
        cam.extrinsic = read_pose(c.at("extrinsic"));
        sc.rig.push_back(cam);
    }

    for (const auto& fj : j.value("frames", json::array())) {
        SensorFrame f;
        f.timestamp_s = fj.value("timestamp_s", 0.0);
        for (const auto& bj : fj.value("blobs", json::array())) {
            SceneBlob b;
            const auto c = bj.at("center").get<std::vector<double>>();
            if (c.size() != 3) throw std::invalid_argument("blob center needs three values");
            b.center = {c[0], c[1], c[2]};
            b.radius = bj.at("radius").get<double>();
            b.feature_seed = bj.value("feature_seed", std::uint64_t{0});
            if (bj.contains("feature")) b.feature = bj.at("feature").get<std::vector<double>>();
            f.blobs.push_back(std::move(b));
        }
        for (const auto& mj : fj.value("maps", json::array())) {
            f.maps.emplace_back(mj.at("height").get<int>(), mj.at("width").get<int>(), mj.at("channels").get<int>(),
                                mj.at("data").get<std::vector<double>>());
        }
        sc.frames.push_back(std::move(f));
    }
    for (const auto& pj : j.value("ego_poses", json::array())) sc.ego_poses.push_back(read_pose(pj));
    return sc;
}

void write_corpus(const std::filesystem::path& path, std::span<const Scenario> scenarios) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (const auto& sc : scenarios) out << scenario_to_json(sc) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Scenario> read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus " + path.string());
    std::vector<Scenario> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            Scenario sc = scenario_from_json(line);
            sc.validate(PlanningProfile::by_name(sc.profile));
            out.push_back(std::move(sc));
        } catch (const std::exception& e) {
            throw CorpusError(lineno, e.what());
        }
    }
    return out;
}

}  // namespace volplan
