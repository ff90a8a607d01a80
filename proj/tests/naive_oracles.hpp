#pragma once

// Brute-force reference implementations. They only share input types with the
// library and are written with plain loops so that a bug in a vectorized or
// cached code path cannot hide in both places.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "volplan/attention_bias.hpp"
#include "volplan/behavior.hpp"
#include "volplan/geometry.hpp"
#include "volplan/planner.hpp"
#include "volplan/scenario.hpp"
#include "volplan/volume_lift.hpp"

namespace oracle {

using Vec = std::vector<double>;

struct Pixel {
    double u;
    double v;
};

inline std::optional<Pixel> project(const double p[3], const volplan::CameraModel& cam) {
    double c[3];
    for (int r = 0; r < 3; ++r) {
        c[r] = cam.extrinsic.translation[r];
        for (int k = 0; k < 3; ++k) c[r] += cam.extrinsic.rotation(r, k) * p[k];
    }
    if (c[2] <= cam.near_plane) return std::nullopt;
    const double u = cam.intrinsics.fx * c[0] / c[2] + cam.intrinsics.cx;
    const double v = cam.intrinsics.fy * c[1] / c[2] + cam.intrinsics.cy;
    if (u < 0.0 || u >= cam.image_width || v < 0.0 || v >= cam.image_height) return std::nullopt;
    return Pixel{u, v};
}

inline Vec bilinear(const volplan::FeatureMap& fm, double u, double v) {
    const int w = fm.width();
    const int h = fm.height();
    u = std::min(std::max(u, 0.0), w - 1.0);
    v = std::min(std::max(v, 0.0), h - 1.0);
    int c0 = static_cast<int>(std::floor(u));
    int r0 = static_cast<int>(std::floor(v));
    if (c0 == w - 1) c0 = w - 2;
    if (r0 == h - 1) r0 = h - 2;
    const double a = u - c0;
    const double b = v - r0;
    Vec out(static_cast<std::size_t>(fm.channels()), 0.0);
    for (int k = 0; k < fm.channels(); ++k) {
        out[k] = (1 - a) * (1 - b) * fm.at(r0, c0)[k] + a * (1 - b) * fm.at(r0, c0 + 1)[k] +
                 (1 - a) * b * fm.at(r0 + 1, c0)[k] + a * b * fm.at(r0 + 1, c0 + 1)[k];
    }
    return out;
}

// Mean feature over the views that see p, or nothing.
inline std::optional<Vec> semantic(const double p[3], const std::vector<volplan::FeatureMap>& maps,
                                   const volplan::CameraRig& rig) {
    Vec acc;
    int seen = 0;
    for (std::size_t i = 0; i < rig.size(); ++i) {
        const auto px = project(p, rig[i]);
        if (!px) continue;
        const auto& fm = maps[i];
        const double fu = (px->u + 0.5) * fm.width() / rig[i].image_width - 0.5;
        const double fv = (px->v + 0.5) * fm.height() / rig[i].image_height - 0.5;
        const Vec s = bilinear(fm, fu, fv);
        if (acc.empty()) acc.assign(s.size(), 0.0);
        for (std::size_t k = 0; k < s.size(); ++k) acc[k] += s[k];
        ++seen;
    }
    if (seen == 0) return std::nullopt;
    for (double& x : acc) x /= seen;
    return acc;
}

inline void voxel_center(const volplan::VolumeGrid& g, int ix, int iy, int iz, double out[3]) {
    const int idx[3] = {ix, iy, iz};
    for (int a = 0; a < 3; ++a) out[a] = g.min_corner[a] + (idx[a] + 0.5) * g.resolution[a];
}

struct Dense {
    std::vector<Vec> features;  // per voxel, x-major
    std::vector<bool> valid;
};

inline Dense lift_dense(const std::vector<volplan::FeatureMap>& maps, const volplan::CameraRig& rig,
                        const volplan::VolumeGrid& g) {
    Dense out;
    const int channels = maps.front().channels();
    for (int ix = 0; ix < g.nx(); ++ix) {
        for (int iy = 0; iy < g.ny(); ++iy) {
            for (int iz = 0; iz < g.nz(); ++iz) {
                double c[3];
                voxel_center(g, ix, iy, iz, c);
                const auto f = semantic(c, maps, rig);
                out.features.push_back(f ? *f : Vec(static_cast<std::size_t>(channels), 0.0));
                out.valid.push_back(f.has_value());
            }
        }
    }
    return out;
}

inline Vec affine(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Vec& x) {
    Vec y(static_cast<std::size_t>(w.rows()), 0.0);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
        double s = b[r];
        for (Eigen::Index k = 0; k < w.cols(); ++k) s += w(r, k) * x[static_cast<std::size_t>(k)];
        y[static_cast<std::size_t>(r)] = s;
    }
    return y;
}

inline Vec mlp(const volplan::Mlp& m, const Vec& x) {
    Vec h = affine(m.hidden.weight, m.hidden.bias, x);
    for (double& v : h) v = v > 0.0 ? v : 0.0;
    return affine(m.output.weight, m.output.bias, h);
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void to_frame(const volplan::RigidPose& pose, const double p[3], double out[3]) {
    // inverse rigid transform: R^T (p - t)
    for (int r = 0; r < 3; ++r) {
        out[r] = 0.0;
        for (int k = 0; k < 3; ++k) out[r] += pose.rotation(k, r) * (p[k] - pose.translation[k]);
    }
}

// Gate per voxel. The reduction FC is applied after averaging the raw samples,
// the reverse of the library's order; both agree because the FC is affine and
// the averaging weights sum to one.
inline Vec gate_field(const std::vector<std::vector<volplan::FeatureMap>>& frames,
                      const std::vector<volplan::RigidPose>& poses, const volplan::CameraRig& rig,
                      const volplan::VolumeGrid& g, const volplan::LiftParams& params) {
    Vec gates;
    const auto cr = static_cast<std::size_t>(params.config.reduced_channels);
    for (int ix = 0; ix < g.nx(); ++ix) {
        for (int iy = 0; iy < g.ny(); ++iy) {
            for (int iz = 0; iz < g.nz(); ++iz) {
                double c[3];
                voxel_center(g, ix, iy, iz, c);
                Vec concat;
                for (std::size_t t = 0; t < frames.size(); ++t) {
                    double q[3];
                    to_frame(poses[t], c, q);
                    const auto f = semantic(q, frames[t], rig);
                    const Vec r = f ? affine(params.gate_fc.weight, params.gate_fc.bias, *f) : Vec(cr, 0.0);
                    concat.insert(concat.end(), r.begin(), r.end());
                }
                gates.push_back(logistic(mlp(params.gate_mlp, concat)[0]));
            }
        }
    }
    return gates;
}

inline Vec pos_embed(const double c[3], const volplan::VolumeGrid& g, const volplan::LiftParams& params) {
    Vec fourier;
    for (int a = 0; a < 3; ++a) {
        const double n = (c[a] - g.min_corner[a]) / (g.max_corner[a] - g.min_corner[a]) * 2.0 - 1.0;
        double freq = std::numbers::pi;
        for (int l = 0; l < params.config.fourier_levels; ++l) {
            fourier.push_back(std::sin(freq * n));
            fourier.push_back(std::cos(freq * n));
            freq *= 2.0;
        }
    }
    return mlp(params.posemb, fourier);
}

// Fused token of one voxel given its gate.
inline Vec sparse_token(const std::vector<std::vector<volplan::FeatureMap>>& frames,
                        const std::vector<volplan::RigidPose>& poses, const volplan::CameraRig& rig,
                        const volplan::VolumeGrid& g, const volplan::LiftParams& params, std::size_t index,
                        double gate) {
    const auto per_x = static_cast<std::size_t>(g.ny() * g.nz());
    const auto ix = static_cast<int>(index / per_x);
    const auto iy = static_cast<int>(index % per_x / static_cast<std::size_t>(g.nz()));
    const auto iz = static_cast<int>(index % static_cast<std::size_t>(g.nz()));
    double c[3];
    voxel_center(g, ix, iy, iz, c);
    const Vec pe = pos_embed(c, g, params);
    const auto ch = static_cast<std::size_t>(params.config.channels);
    Vec concat;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        double q[3];
        to_frame(poses[t], c, q);
        const auto f = semantic(q, frames[t], rig);
        for (std::size_t k = 0; k < ch; ++k) {
            const double sem = f ? (*f)[k] : 0.0;
            concat.push_back(gate * sem + (1.0 - gate) * params.vacant[static_cast<Eigen::Index>(k)] + pe[k]);
        }
    }
    return affine(params.temporal_fc.weight, params.temporal_fc.bias, concat);
}

// Sort every voxel by (seen first, larger gate, lower index), keep M, return
// ascending indices.
inline std::vector<std::size_t> top_m(const std::vector<double>& gates, const std::vector<std::uint8_t>& valid,
                                      std::size_t m) {
    std::vector<std::pair<std::pair<int, double>, std::size_t>> keyed;
    for (std::size_t i = 0; i < gates.size(); ++i) {
        const int seen = valid.empty() ? 1 : valid[i];
        keyed.push_back({{-seen, -gates[i]}, i});
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m; ++i) out.push_back(keyed[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

// Explicit bin table: bin b covers (lo, hi] or [lo, hi) per the closure flag.
struct Bin {
    double lo;
    double hi;
    bool closed_lo;
    bool closed_hi;
};

inline std::vector<Bin> bin_table() {
    const double inf = std::numeric_limits<double>::infinity();
    double e[9];
    for (int j = 0; j <= 8; ++j) e[j] = 8.0 * std::pow(2.0, j / 2.0);
    std::vector<Bin> t;
    t.push_back({-inf, -e[7], false, false});
    for (int b = 1; b < 8; ++b) t.push_back({-e[8 - b], -e[7 - b], true, false});
    for (int k = -8; k < 8; ++k) t.push_back({static_cast<double>(k), k + 1.0, true, k == 7});
    for (int j = 0; j < 7; ++j) t.push_back({e[j], e[j + 1], false, true});
    t.push_back({e[7], inf, false, false});
    return t;
}

inline int bin_of(double d, const std::vector<Bin>& table) {
    for (std::size_t b = 0; b < table.size(); ++b) {
        const Bin& bin = table[b];
        const bool above = bin.closed_lo ? d >= bin.lo : d > bin.lo;
        const bool below = bin.closed_hi ? d <= bin.hi : d < bin.hi;
        if (above && below) return static_cast<int>(b);
    }
    return -1;
}

// Bias of query i on key j by double loop.
inline Eigen::MatrixXd bias_matrix(const volplan::TokenSequence& seq, const volplan::HeadBias& hb) {
    const auto m = static_cast<std::size_t>(seq.visual_count());
    const auto n = static_cast<std::size_t>(seq.size());
    const auto table = bin_table();
    Eigen::MatrixXd b(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double v;
            if (i < m && j < m) {
                const auto& ci = seq.visual_coords[i];
                const auto& cj = seq.visual_coords[j];
                v = hb.x[bin_of(cj.x() - ci.x(), table)] + hb.y[bin_of(cj.y() - ci.y(), table)] +
                    hb.z[bin_of(cj.z() - ci.z(), table)];
            } else if (i >= m && j >= m) {
                v = hb.p[bin_of(seq.text_positions[j - m] - seq.text_positions[i - m], table)];
            } else if (i >= m) {
                v = hb.text_to_visual;
            } else {
                v = hb.visual_to_text;
            }
            b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    return b;
}

inline Eigen::MatrixXd attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k, const Eigen::MatrixXd& v,
                                 const Eigen::MatrixXd& bias) {
    const Eigen::Index n = q.rows();
    const Eigen::Index keys = k.rows();
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, v.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> logit(static_cast<std::size_t>(keys));
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < keys; ++j) {
            double s = 0.0;
            for (Eigen::Index c = 0; c < q.cols(); ++c) s += q(i, c) * k(j, c);
            logit[j] = s * scale - bias(i, j);
            mx = std::max(mx, logit[j]);
        }
        double z = 0.0;
        for (double& l : logit) {
            l = std::exp(l - mx);
            z += l;
        }
        for (Eigen::Index j = 0; j < keys; ++j) {
            for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += logit[j] / z * v(j, c);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rule tables for the heuristic labels. Each row is a guard and its label; the
// first matching row wins.

struct TrackFacts {
    double max_disp_sq;
    double max_step_sq;  // squared largest per-step displacement
    double dt;
    double heading_deg;
    double final_x;
    double final_y;
};

inline TrackFacts facts(const volplan::FutureTrack& t) {
    TrackFacts f{0.0, 0.0, t.dt, t.headings.back() / std::numbers::pi * 180.0,
                 t.positions.back().x - t.positions.front().x, t.positions.back().y - t.positions.front().y};
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
        const double dx = t.positions[i].x - t.positions[0].x;
        const double dy = t.positions[i].y - t.positions[0].y;
        f.max_disp_sq = std::max(f.max_disp_sq, dx * dx + dy * dy);
        if (i > 0) {
            const double sx = t.positions[i].x - t.positions[i - 1].x;
            const double sy = t.positions[i].y - t.positions[i - 1].y;
            f.max_step_sq = std::max(f.max_step_sq, sx * sx + sy * sy);
        }
    }
    return f;
}

inline volplan::Behavior classify(const volplan::FutureTrack& t) {
    using volplan::Behavior;
    const TrackFacts f = facts(t);
    struct Row {
        bool (*guard)(const TrackFacts&);
        Behavior label;
    };
    static const Row rows[] = {
        {[](const TrackFacts& f) { return f.max_disp_sq < 25.0 && f.max_step_sq < 4.0 * f.dt * f.dt; },
         Behavior::Stop},
        {[](const TrackFacts& f) { return f.heading_deg > 30.0 && f.final_x < -5.0; }, Behavior::LeftUTurn},
        {[](const TrackFacts& f) { return f.heading_deg > 30.0; }, Behavior::LeftTurn},
        {[](const TrackFacts& f) { return f.heading_deg < -30.0; }, Behavior::RightTurn},
        {[](const TrackFacts& f) { return f.final_y > 5.0; }, Behavior::StraightLeft},
        {[](const TrackFacts& f) { return f.final_y < -5.0; }, Behavior::StraightRight},
        {[](const TrackFacts&) { return true; }, Behavior::StraightForward},
    };
    for (const Row& r : rows) {
        if (r.guard(f)) return r.label;
    }
    return Behavior::StraightForward;
}

inline volplan::FutureTrack first_samples(const volplan::FutureTrack& t, std::size_t n) {
    volplan::FutureTrack out;
    out.dt = t.dt;
    n = std::min(n, t.positions.size());
    out.positions.assign(t.positions.begin(), t.positions.begin() + static_cast<std::ptrdiff_t>(n));
    out.headings.assign(t.headings.begin(), t.headings.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

inline volplan::BehaviorCommand command(const volplan::FutureTrack& t) {
    using volplan::Behavior;
    using volplan::BehaviorCommand;
    static const std::pair<Behavior, BehaviorCommand> table[] = {
        {Behavior::StraightForward, BehaviorCommand::GoStraightForward},
        {Behavior::StraightLeft, BehaviorCommand::GoStraightLeft},
        {Behavior::StraightRight, BehaviorCommand::GoStraightRight},
        {Behavior::LeftTurn, BehaviorCommand::LeftTurn},
        {Behavior::RightTurn, BehaviorCommand::RightTurn},
        {Behavior::LeftUTurn, BehaviorCommand::LeftUTurn},
    };
    const std::size_t total = t.positions.size();
    // windows of 8, 10, 12, ... seconds, the last one covering the recording
    for (double w = 8.0;; w += 2.0) {
        const auto n = static_cast<std::size_t>(std::llround(w / t.dt)) + 1;
        const Behavior b = classify(first_samples(t, n));
        for (const auto& [beh, cmd] : table) {
            if (beh == b) return cmd;
        }
        if (n >= total) return BehaviorCommand::GoStraightForward;
    }
}

inline volplan::MetaDecision meta_decision(const volplan::MotionSegment& s) {
    using volplan::MetaDecision;
    double top_sq = 0.0;
    for (const auto& v : s.velocities) top_sq = std::max(top_sq, v.x * v.x + v.y * v.y);
    const double dx = s.positions.back().x - s.positions.front().x;
    const double dy = s.positions.back().y - s.positions.front().y;
    const double speed_end = std::sqrt(s.velocities.back().x * s.velocities.back().x +
                                       s.velocities.back().y * s.velocities.back().y);
    const double speed_start = std::sqrt(s.velocities.front().x * s.velocities.front().x +
                                         s.velocities.front().y * s.velocities.front().y);
    const double duration = (s.positions.size() - 1) * s.dt;
    const double accel = duration > 0.0 ? (speed_end - speed_start) / duration : 0.0;
    struct Row {
        bool hit;
        MetaDecision label;
    };
    const Row rows[] = {
        {top_sq < 4.0 && dx * dx + dy * dy < 2.25, MetaDecision::KeepStationary},
        {accel > 0.5, MetaDecision::Accelerate},
        {accel < -0.5, MetaDecision::Decelerate},
        {true, MetaDecision::KeepSpeed},
    };
    for (const Row& r : rows) {
        if (r.hit) return r.label;
    }
    return MetaDecision::KeepSpeed;
}

}  // namespace oracle
