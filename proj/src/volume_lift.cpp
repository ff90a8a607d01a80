#include "volplan/volume_lift.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "volplan/parallel.hpp"

namespace volplan {

VolumeGrid VolumeGrid::desk() { return {}; }

VolumeGrid VolumeGrid::full() {
    VolumeGrid g;
    g.resolution = {1.0, 1.0, 2.0};
    return g;
}

int VolumeGrid::count(int axis) const {
    return static_cast<int>(std::lround((max_corner[axis] - min_corner[axis]) / resolution[axis]));
}

void VolumeGrid::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (!(max_corner[a] > min_corner[a])) throw std::invalid_argument("grid range max must exceed min");
        if (!(resolution[a] > 0.0)) throw std::invalid_argument("grid resolution must be positive");
        if (count(a) < 1) throw std::invalid_argument("grid axis has no cells");
    }
}

std::array<int, 3> VolumeGrid::cell(std::size_t index) const {
    const auto z = static_cast<std::size_t>(nz());
    const auto y = static_cast<std::size_t>(ny());
    return {static_cast<int>(index / (y * z)), static_cast<int>((index / z) % y), static_cast<int>(index % z)};
}

Eigen::Vector3d VolumeGrid::center(std::size_t index) const {
    const auto c = cell(index);
    return {min_corner.x() + (c[0] + 0.5) * resolution.x(), min_corner.y() + (c[1] + 0.5) * resolution.y(),
            min_corner.z() + (c[2] + 0.5) * resolution.z()};
}

bool VolumeGrid::contains(const Eigen::Vector3d& p) const {
    for (int a = 0; a < 3; ++a) {
        if (!(p[a] >= min_corner[a] && p[a] <= max_corner[a])) return false;
    }
    return true;
}

void LiftConfig::validate() const {
    if (channels < 1 || reduced_channels < 1) throw std::invalid_argument("lift channel counts must be positive");
    if (history_frames < 0) throw std::invalid_argument("history frame count must be non-negative");
    if (fourier_levels < 1) throw std::invalid_argument("need at least one Fourier level");
    if (gate_hidden < 1 || posemb_hidden < 1) throw std::invalid_argument("hidden widths must be positive");
}

namespace {

LiftParams allocate(const LiftConfig& config) {
    config.validate();
    LiftParams p;
    p.config = config;
    p.gate_fc = Linear(config.channels, config.reduced_channels);
    p.gate_mlp = Mlp(static_cast<Eigen::Index>(config.frames()) * config.reduced_channels, config.gate_hidden, 1);
    p.vacant = Eigen::VectorXd::Zero(config.channels);
    p.posemb = Mlp(config.fourier_dim(), config.posemb_hidden, config.channels);
    p.temporal_fc = Linear(static_cast<Eigen::Index>(config.frames()) * config.channels, config.channels);
    return p;
}

void check_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        throw std::invalid_argument(std::string("lift parameter has wrong shape: ") + name);
    }
}

}  // namespace

LiftParams LiftParams::fresh(const LiftConfig& config, std::mt19937_64& rng) {
    LiftParams p = allocate(config);
    p.gate_fc.init_uniform(rng);
    p.gate_mlp.hidden.init_uniform(rng);
    p.gate_mlp.output.init_uniform(rng);
    p.posemb.hidden.init_uniform(rng);
    p.posemb.output.zero();
    p.vacant.setZero();
    p.temporal_fc.zero();
    p.temporal_fc.weight.leftCols(config.channels).setIdentity();
    return p;
}

LiftParams LiftParams::random(const LiftConfig& config, std::mt19937_64& rng) {
    LiftParams p = allocate(config);
    p.gate_fc.init_uniform(rng);
    p.gate_mlp.hidden.init_uniform(rng);
    p.gate_mlp.output.init_uniform(rng);
    p.posemb.hidden.init_uniform(rng);
    p.posemb.output.init_uniform(rng);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (Eigen::Index i = 0; i < p.vacant.size(); ++i) p.vacant[i] = dist(rng);
    p.temporal_fc.init_uniform(rng);
    return p;
}

void LiftParams::validate() const {
    config.validate();
    const Eigen::Index c = config.channels;
    const Eigen::Index cr = config.reduced_channels;
    const Eigen::Index f = config.frames();
    check_shape(gate_fc.weight, cr, c, "gate_fc.weight");
    check_shape(gate_fc.bias, cr, 1, "gate_fc.bias");
    check_shape(gate_mlp.hidden.weight, config.gate_hidden, f * cr, "gate_mlp.hidden.weight");
    check_shape(gate_mlp.hidden.bias, config.gate_hidden, 1, "gate_mlp.hidden.bias");
    check_shape(gate_mlp.output.weight, 1, config.gate_hidden, "gate_mlp.output.weight");
    check_shape(gate_mlp.output.bias, 1, 1, "gate_mlp.output.bias");
    check_shape(vacant, c, 1, "vacant");
    check_shape(posemb.hidden.weight, config.posemb_hidden, config.fourier_dim(), "posemb.hidden.weight");
    check_shape(posemb.hidden.bias, config.posemb_hidden, 1, "posemb.hidden.bias");
    check_shape(posemb.output.weight, c, config.posemb_hidden, "posemb.output.weight");
    check_shape(posemb.output.bias, c, 1, "posemb.output.bias");
    check_shape(temporal_fc.weight, c, f * c, "temporal_fc.weight");
    check_shape(temporal_fc.bias, c, 1, "temporal_fc.bias");
}

std::optional<Eigen::VectorXd> sample_semantic(const Eigen::Vector3d& point_ego, std::span<const FeatureMap> maps,
                                               const CameraRig& rig) {
    Eigen::VectorXd sum;
    int seen = 0;
    for (std::size_t v = 0; v < rig.size(); ++v) {
        const auto px = project_to_view(point_ego, rig[v]);
        if (!px) continue;
        const FeatureMap& fm = maps[v];
        const PixelCoord at =
            pixel_to_feature_coords(*px, rig[v].image_width, rig[v].image_height, fm.width(), fm.height());
        Eigen::VectorXd s = bilinear_sample(fm, at);
        if (seen == 0) {
            sum = std::move(s);
        } else {
            sum += s;
        }
        ++seen;
    }
    if (seen == 0) return std::nullopt;
    return sum / static_cast<double>(seen);
}

namespace {

int check_frame_maps(std::span<const FeatureMap> maps, const CameraRig& rig) {
    if (rig.empty()) throw std::invalid_argument("camera rig is empty");
    if (maps.size() != rig.size()) throw std::invalid_argument("need one feature map per view");
    const int c = maps.front().channels();
    for (const auto& m : maps) {
        if (m.channels() != c) throw std::invalid_argument("feature maps disagree on channel count");
    }
    return c;
}

void check_frames(std::span<const FrameMaps> frames, std::span<const RigidPose> poses, const CameraRig& rig,
                  const LiftParams& params) {
    params.validate();
    if (frames.size() != static_cast<std::size_t>(params.config.frames())) {
        throw std::invalid_argument("frame count does not match T + 1");
    }
    if (poses.size() != frames.size()) throw std::invalid_argument("pose count does not match frame count");
    if (!poses[0].rotation.isIdentity(0.0) || !poses[0].translation.isZero(0.0)) {
        throw std::invalid_argument("current-frame pose must be the identity");
    }
    for (const auto& f : frames) {
        if (check_frame_maps(f, rig) != params.config.channels) {
            throw std::invalid_argument("feature maps do not have C channels");
        }
    }
}

}  // namespace

DenseVolume lift_dense(std::span<const FeatureMap> maps, const CameraRig& rig, const VolumeGrid& grid, int threads) {
    const int c = check_frame_maps(maps, rig);
    grid.validate();
    DenseVolume out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()), c),
                    std::vector<std::uint8_t>(grid.size(), 0)};
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        if (auto f = sample_semantic(grid.center(i), maps, rig)) {
            out.features.row(static_cast<Eigen::Index>(i)) = f->transpose();
            out.valid[i] = 1;
        }
    });
    return out;
}

FrameMaps reduce_maps(std::span<const FeatureMap> maps, const Linear& gate_fc) {
    FrameMaps out;
    out.reserve(maps.size());
    const auto cr = static_cast<int>(gate_fc.out_features());
    for (const auto& m : maps) {
        if (m.channels() != gate_fc.in_features()) throw std::invalid_argument("gate_fc input width mismatch");
        FeatureMap r(m.height(), m.width(), cr);
        Eigen::VectorXd x(m.channels());
        for (int row = 0; row < m.height(); ++row) {
            for (int col = 0; col < m.width(); ++col) {
                const auto cell = m.at(row, col);
                for (int k = 0; k < m.channels(); ++k) x[k] = cell[k];
                const Eigen::VectorXd y = gate_fc.forward(x);
                auto dst = r.at(row, col);
                for (int k = 0; k < cr; ++k) dst[k] = y[k];
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

double gate_value(const LiftParams& params, const Eigen::VectorXd& concat) {
    return sigmoid(params.gate_mlp.forward(concat)[0]);
}

GateField compute_gate_field(std::span<const FrameMaps> frames, std::span<const RigidPose> poses,
                             const CameraRig& rig, const VolumeGrid& grid, const LiftParams& params, int threads) {
    check_frames(frames, poses, rig, params);
    grid.validate();
    std::vector<FrameMaps> reduced;
    reduced.reserve(frames.size());
    for (const auto& f : frames) reduced.push_back(reduce_maps(f, params.gate_fc));

    const Eigen::Index cr = params.config.reduced_channels;
    GateField out{std::vector<double>(grid.size(), 0.0), std::vector<std::uint8_t>(grid.size(), 0)};
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        const Eigen::Vector3d center = grid.center(i);
        Eigen::VectorXd concat = Eigen::VectorXd::Zero(cr * static_cast<Eigen::Index>(frames.size()));
        for (std::size_t t = 0; t < frames.size(); ++t) {
            const Eigen::Vector3d q = t == 0 ? center : compensate_ego_motion(center, poses[t]);
            if (auto f = sample_semantic(q, reduced[t], rig)) {
                concat.segment(static_cast<Eigen::Index>(t) * cr, cr) = *f;
                if (t == 0) out.valid[i] = 1;
            }
        }
        out.values[i] = gate_value(params, concat);
    });
    return out;
}

std::vector<std::size_t> select_top_m(const GateField& gates, std::size_t m) {
    const std::size_t n = gates.values.size();
    if (m < 1 || m > n) {
        throw std::invalid_argument("M must lie in [1, " + std::to_string(n) + "], got " + std::to_string(m));
    }
    if (!gates.valid.empty() && gates.valid.size() != n) {
        throw std::invalid_argument("gate validity mask has the wrong length");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto better = [&](std::size_t a, std::size_t b) {
        if (!gates.valid.empty() && gates.valid[a] != gates.valid[b]) return gates.valid[a] > gates.valid[b];
        if (gates.values[a] != gates.values[b]) return gates.values[a] > gates.values[b];
        return a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m - 1), order.end(), better);
    order.resize(m);
    std::sort(order.begin(), order.end());
    return order;
}

Eigen::VectorXd blend_vacant(const Eigen::VectorXd& f_sem, double g, const Eigen::VectorXd& f_vac) {
    if (f_sem.size() != f_vac.size()) throw std::invalid_argument("blend operands differ in width");
    return g * f_sem + (1.0 - g) * f_vac;
}

BlendGrad blend_vacant_grad(const Eigen::VectorXd& f_sem, double g, const Eigen::VectorXd& f_vac) {
    if (f_sem.size() != f_vac.size()) throw std::invalid_argument("blend operands differ in width");
    return {f_sem - f_vac, g, 1.0 - g};
}

Eigen::Vector3d normalize_coord(const Eigen::Vector3d& coord, const VolumeGrid& grid) {
    if (!grid.contains(coord)) throw std::invalid_argument("coordinate lies outside the grid range");
    return (2.0 * (coord - grid.min_corner).array() / (grid.max_corner - grid.min_corner).array() - 1.0).matrix();
}

Eigen::VectorXd fourier_features(const Eigen::Vector3d& n, int levels) {
    Eigen::VectorXd out(6 * levels);
    Eigen::Index k = 0;
    for (int a = 0; a < 3; ++a) {
        for (int l = 0; l < levels; ++l) {
            const double w = std::ldexp(std::numbers::pi, l);
            out[k++] = std::sin(w * n[a]);
            out[k++] = std::cos(w * n[a]);
        }
    }
    return out;
}

Eigen::MatrixXd fourier_jacobian(const Eigen::Vector3d& n, int levels) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(6 * levels, 3);
    Eigen::Index k = 0;
    for (int a = 0; a < 3; ++a) {
        for (int l = 0; l < levels; ++l) {
            const double w = std::ldexp(std::numbers::pi, l);
            jac(k++, a) = w * std::cos(w * n[a]);
            jac(k++, a) = -w * std::sin(w * n[a]);
        }
    }
    return jac;
}

Eigen::VectorXd pos_embed(const Eigen::Vector3d& coord, const VolumeGrid& grid, const LiftParams& params) {
    return params.posemb.forward(fourier_features(normalize_coord(coord, grid), params.config.fourier_levels));
}

SparseVolumeSet gather_sparse_tokens(std::span<const FrameMaps> frames, std::span<const RigidPose> poses,
                                     const CameraRig& rig, const VolumeGrid& grid, const LiftParams& params,
                                     std::span<const double> gates, std::span<const std::uint8_t> valid,
                                     std::span<const std::size_t> selected) {
    check_frames(frames, poses, rig, params);
    if (gates.size() != grid.size()) throw std::invalid_argument("gate count does not match grid size");
    const Eigen::Index c = params.config.channels;
    const auto nframes = static_cast<Eigen::Index>(frames.size());

    SparseVolumeSet out;
    out.voxel_index.assign(selected.begin(), selected.end());
    out.features.resize(static_cast<Eigen::Index>(selected.size()), c);
    Eigen::VectorXd concat(c * nframes);
    for (std::size_t s = 0; s < selected.size(); ++s) {
        const std::size_t idx = selected[s];
        if (idx >= grid.size()) throw std::invalid_argument("selected voxel index out of range");
        const Eigen::Vector3d center = grid.center(idx);
        const double g = gates[idx];
        const Eigen::VectorXd pe = pos_embed(center, grid, params);
        for (Eigen::Index t = 0; t < nframes; ++t) {
            const Eigen::Vector3d q = t == 0 ? center : compensate_ego_motion(center, poses[t]);
            const auto f_sem = sample_semantic(q, frames[t], rig);
            const Eigen::VectorXd sem = f_sem ? *f_sem : Eigen::VectorXd::Zero(c);
            concat.segment(t * c, c) = blend_vacant(sem, g, params.vacant) + pe;
        }
        out.coords.push_back(center);
        out.gates.push_back(g);
        out.valid.push_back(valid.empty() ? 1 : valid[idx]);
        out.features.row(static_cast<Eigen::Index>(s)) = params.temporal_fc.forward(concat).transpose();
    }
    return out;
}

SparseVolumeSet build_sparse_tokens(std::span<const FrameMaps> frames, std::span<const RigidPose> poses,
                                    const CameraRig& rig, const VolumeGrid& grid, const LiftParams& params,
                                    std::size_t m, int threads) {
    const GateField field = compute_gate_field(frames, poses, rig, grid, params, threads);
    const auto selected = select_top_m(field, m);
    return gather_sparse_tokens(frames, poses, rig, grid, params, field.values, field.valid, selected);
}

}  // namespace volplan
