#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "volplan/geometry.hpp"
#include "volplan/nn.hpp"

namespace volplan {

// Axis-aligned voxel lattice in the current ego frame (x forward, y left, z up).
struct VolumeGrid {
    Eigen::Vector3d min_corner{-30.0, -30.0, -2.0};
    Eigen::Vector3d max_corner{80.0, 30.0, 8.0};
    Eigen::Vector3d resolution{5.0, 5.0, 2.0};

    // 22 x 12 x 5 cells at 5 m x 5 m x 2 m.
    static VolumeGrid desk();
    // 110 x 60 x 5 cells at 1 m x 1 m x 2 m.
    static VolumeGrid full();

    void validate() const;
    int nx() const { return count(0); }
    int ny() const { return count(1); }
    int nz() const { return count(2); }
    std::size_t size() const {
        return static_cast<std::size_t>(nx()) * static_cast<std::size_t>(ny()) * static_cast<std::size_t>(nz());
    }
    // x-major linearization: ((ix * ny) + iy) * nz + iz.
    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(ix) * ny() + iy) * nz() + iz;
    }
    std::array<int, 3> cell(std::size_t index) const;
    Eigen::Vector3d center(std::size_t index) const;
    bool contains(const Eigen::Vector3d& p) const;

private:
    int count(int axis) const;
};

struct LiftConfig {
    int channels = 64;          // C
    int reduced_channels = 8;   // C'
    int history_frames = 1;     // T
    int fourier_levels = 6;
    int gate_hidden = 64;
    int posemb_hidden = 64;

    static LiftConfig desk() { return {}; }
    static LiftConfig full() { return {1536, 96, 1, 6, 64, 64}; }
    int frames() const { return history_frames + 1; }
    int fourier_dim() const { return 6 * fourier_levels; }
    void validate() const;
};

struct LiftParams {
    LiftConfig config;
    Linear gate_fc;        // C -> C', applied per feature cell
    Mlp gate_mlp;          // (T+1) C' -> hidden -> 1
    Eigen::VectorXd vacant;  // f_vac, C
    Mlp posemb;            // Fourier features -> hidden -> C
    Linear temporal_fc;    // (T+1) C -> C

    // Fresh parameters: zero last pos-emb layer, zero vacant feature,
    // temporal FC = [I 0] with zero bias; the rest drawn uniformly.
    static LiftParams fresh(const LiftConfig& config, std::mt19937_64& rng);
    // Every block random, for oracle comparisons away from initialization.
    static LiftParams random(const LiftConfig& config, std::mt19937_64& rng);

    void validate() const;
};

// Maps of all views for one frame.
using FrameMaps = std::vector<FeatureMap>;

struct DenseVolume {
    Eigen::MatrixXd features;          // grid.size() x C
    std::vector<std::uint8_t> valid;   // seen by at least one view
};

// Mean of bilinear samples over the views the point projects into.
std::optional<Eigen::VectorXd> sample_semantic(const Eigen::Vector3d& point_ego, std::span<const FeatureMap> maps,
                                               const CameraRig& rig);

DenseVolume lift_dense(std::span<const FeatureMap> maps, const CameraRig& rig, const VolumeGrid& grid,
                       int threads = 1);

// gate_fc applied to every cell of every view map.
FrameMaps reduce_maps(std::span<const FeatureMap> maps, const Linear& gate_fc);

struct GateField {
    std::vector<double> values;        // grid.size(), each in (0, 1)
    std::vector<std::uint8_t> valid;   // seen by a view in the current frame
};

GateField compute_gate_field(std::span<const FrameMaps> frames, std::span<const RigidPose> poses,
                             const CameraRig& rig, const VolumeGrid& grid, const LiftParams& params,
                             int threads = 1);

// Gate of a single concatenated reduced-feature vector.
double gate_value(const LiftParams& params, const Eigen::VectorXd& concat);

// Linear indices of the M largest gates, ascending. Ties go to the lower
// index; voxels flagged invalid rank below every valid voxel.
std::vector<std::size_t> select_top_m(const GateField& gates, std::size_t m);

Eigen::VectorXd blend_vacant(const Eigen::VectorXd& f_sem, double g, const Eigen::VectorXd& f_vac);

struct BlendGrad {
    Eigen::VectorXd d_gate;   // d out / d g, per output channel
    double d_sem = 0.0;       // d out_c / d f_sem_c
    double d_vac = 0.0;       // d out_c / d f_vac_c
};
BlendGrad blend_vacant_grad(const Eigen::VectorXd& f_sem, double g, const Eigen::VectorXd& f_vac);

// Per-axis [-1, 1] normalization of a coordinate by the grid range.
Eigen::Vector3d normalize_coord(const Eigen::Vector3d& coord, const VolumeGrid& grid);
// sin/cos(2^k pi n_a) for each axis a, level k; layout [axis][level][sin, cos].
Eigen::VectorXd fourier_features(const Eigen::Vector3d& normalized, int levels);
// Jacobian of fourier_features with respect to the normalized coordinate.
Eigen::MatrixXd fourier_jacobian(const Eigen::Vector3d& normalized, int levels);

Eigen::VectorXd pos_embed(const Eigen::Vector3d& coord, const VolumeGrid& grid, const LiftParams& params);

struct SparseVolumeSet {
    std::vector<std::size_t> voxel_index;
    std::vector<Eigen::Vector3d> coords;
    std::vector<double> gates;
    Eigen::MatrixXd features;           // M x C
    std::vector<std::uint8_t> valid;

    std::size_t size() const { return voxel_index.size(); }
};

// Blends, embeds and temporally fuses the given voxels. `gates` is indexed by
// linear voxel index and is not range-checked, so tests may force g = 1.
SparseVolumeSet gather_sparse_tokens(std::span<const FrameMaps> frames, std::span<const RigidPose> poses,
                                     const CameraRig& rig, const VolumeGrid& grid, const LiftParams& params,
                                     std::span<const double> gates, std::span<const std::uint8_t> valid,
                                     std::span<const std::size_t> selected);

SparseVolumeSet build_sparse_tokens(std::span<const FrameMaps> frames, std::span<const RigidPose> poses,
                                    const CameraRig& rig, const VolumeGrid& grid, const LiftParams& params,
                                    std::size_t m, int threads = 1);

}  // namespace volplan
