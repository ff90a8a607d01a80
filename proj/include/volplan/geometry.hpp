#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace volplan {

// Rigid transform x -> R x + t.
struct RigidPose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static RigidPose identity() { return {}; }
    // Rotation about +z by yaw (rad), then translation.
    static RigidPose from_yaw(double yaw, const Eigen::Vector3d& translation);

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
    Eigen::Vector3d apply_inverse(const Eigen::Vector3d& p) const {
        return rotation.transpose() * (p - translation);
    }
    RigidPose inverse() const;
    RigidPose compose(const RigidPose& inner) const;  // this ∘ inner

    bool is_orthonormal(double tol = 1e-6) const;
};

struct Intrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
};

// Pinhole camera. Camera axes: +z optical axis, +x right, +y down.
struct CameraModel {
    Intrinsics intrinsics;
    int image_width = 448;
    int image_height = 448;
    RigidPose extrinsic;  // ego -> camera
    double near_plane = 0.1;

    void validate() const;
};

using CameraRig = std::vector<CameraModel>;

// Dense H x W x C feature grid, row-major with channels innermost.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int height, int width, int channels);
    FeatureMap(int height, int width, int channels, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }

    std::span<double> at(int row, int col) {
        return {data_.data() + offset(row, col), static_cast<std::size_t>(channels_)};
    }
    std::span<const double> at(int row, int col) const {
        return {data_.data() + offset(row, col), static_cast<std::size_t>(channels_)};
    }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    void validate() const;

private:
    std::size_t offset(int row, int col) const {
        return (static_cast<std::size_t>(row) * width_ + col) * channels_;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

struct PixelCoord {
    double u = 0.0;  // column
    double v = 0.0;  // row
};

// Pixel coordinates of an ego-frame point, or nothing when the point is behind
// the near plane or outside [0, W) x [0, H).
std::optional<PixelCoord> project_to_view(const Eigen::Vector3d& point_ego, const CameraModel& cam);

// Expresses a current-ego point in the ego frame of an older frame, given the
// pose mapping that frame into the current one.
Eigen::Vector3d compensate_ego_motion(const Eigen::Vector3d& point_current, const RigidPose& pose_t);

// Cell-center mapping from image pixels to feature-grid coordinates.
PixelCoord pixel_to_feature_coords(PixelCoord pixel, int image_width, int image_height,
                                   int feature_width, int feature_height);

// Bilinear interpolation of the four cells around (u, v); u indexes columns.
// Coordinates are clamped to [0, W-1] x [0, H-1].
Eigen::VectorXd bilinear_sample(const FeatureMap& fm, PixelCoord at);

struct BilinearSampleGrad {
    Eigen::VectorXd value;
    Eigen::VectorXd d_du;
    Eigen::VectorXd d_dv;
};

// Value plus partial derivatives with respect to the sampling position. On a
// clamped axis the derivative is zero.
BilinearSampleGrad bilinear_sample_with_grad(const FeatureMap& fm, PixelCoord at);

// Surround rig of `views` cameras at evenly spaced yaws, mounted at `mount`
// in the ego frame (x forward, y left, z up).
CameraRig make_surround_rig(int views, double fov_deg = 90.0, int image_size = 448,
                            const Eigen::Vector3d& mount = Eigen::Vector3d(0.0, 0.0, 1.5));

}  // namespace volplan
