#include "volplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

namespace volplan {

RigidPose RigidPose::from_yaw(double yaw, const Eigen::Vector3d& translation) {
    RigidPose pose;
    pose.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    pose.translation = translation;
    return pose;
}

RigidPose RigidPose::inverse() const {
    RigidPose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

RigidPose RigidPose::compose(const RigidPose& inner) const {
    RigidPose out;
    out.rotation = rotation * inner.rotation;
    out.translation = rotation * inner.translation + translation;
    return out;
}

bool RigidPose::is_orthonormal(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const Eigen::Matrix3d gram = rotation.transpose() * rotation;
    return (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
}

void CameraModel::validate() const {
    if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
        throw std::invalid_argument("camera focal lengths must be positive");
    }
    if (image_width <= 0 || image_height <= 0) {
        throw std::invalid_argument("camera image size must be positive");
    }
    if (!(near_plane > 0.0)) throw std::invalid_argument("camera near plane must be positive");
    if (!extrinsic.is_orthonormal()) {
        throw std::invalid_argument("camera extrinsic rotation is not orthonormal");
    }
}

FeatureMap::FeatureMap(int height, int width, int channels)
    : FeatureMap(height, width, channels,
                 std::vector<double>(static_cast<std::size_t>(height) * width * channels, 0.0)) {}

FeatureMap::FeatureMap(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height < 2 || width < 2) throw std::invalid_argument("feature map must be at least 2x2");
    if (channels < 1) throw std::invalid_argument("feature map needs at least one channel");
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
        throw std::invalid_argument("feature map data size does not match its shape");
    }
}

void FeatureMap::validate() const {
    if (height_ < 2 || width_ < 2 || channels_ < 1) {
        throw std::invalid_argument("feature map must be at least 2x2 with one channel");
    }
    for (double x : data_) {
        if (!std::isfinite(x)) throw std::invalid_argument("feature map holds a non-finite value");
    }
}

std::optional<PixelCoord> project_to_view(const Eigen::Vector3d& point_ego, const CameraModel& cam) {
    const Eigen::Vector3d pc = cam.extrinsic.apply(point_ego);
    if (!(pc.z() > cam.near_plane)) return std::nullopt;
    const double u = cam.intrinsics.fx * pc.x() / pc.z() + cam.intrinsics.cx;
    const double v = cam.intrinsics.fy * pc.y() / pc.z() + cam.intrinsics.cy;
    if (!(u >= 0.0 && u < cam.image_width && v >= 0.0 && v < cam.image_height)) return std::nullopt;
    return PixelCoord{u, v};
}

Eigen::Vector3d compensate_ego_motion(const Eigen::Vector3d& point_current, const RigidPose& pose_t) {
    return pose_t.apply_inverse(point_current);
}

PixelCoord pixel_to_feature_coords(PixelCoord pixel, int image_width, int image_height,
                                   int feature_width, int feature_height) {
    return {
        (pixel.u + 0.5) * feature_width / image_width - 0.5,
        (pixel.v + 0.5) * feature_height / image_height - 0.5,
    };
}

namespace {

struct AxisStencil {
    int lo;
    double frac;   // weight of lo + 1
    bool clamped;  // position was outside [0, n-1]
};

AxisStencil stencil(double x, int n) {
    bool clamped = false;
    if (x <= 0.0) {
        clamped = x < 0.0;
        x = 0.0;
    } else if (x >= n - 1) {
        clamped = x > n - 1;
        x = n - 1;
    }
    int lo = static_cast<int>(std::floor(x));
    if (lo > n - 2) lo = n - 2;
    return {lo, x - lo, clamped};
}

}  // namespace

Eigen::VectorXd bilinear_sample(const FeatureMap& fm, PixelCoord at) {
    const AxisStencil su = stencil(at.u, fm.width());
    const AxisStencil sv = stencil(at.v, fm.height());
    const double w00 = (1.0 - su.frac) * (1.0 - sv.frac);
    const double w01 = su.frac * (1.0 - sv.frac);
    const double w10 = (1.0 - su.frac) * sv.frac;
    const double w11 = su.frac * sv.frac;
    const auto c00 = fm.at(sv.lo, su.lo);
    const auto c01 = fm.at(sv.lo, su.lo + 1);
    const auto c10 = fm.at(sv.lo + 1, su.lo);
    const auto c11 = fm.at(sv.lo + 1, su.lo + 1);
    Eigen::VectorXd out(fm.channels());
    for (int c = 0; c < fm.channels(); ++c) {
        out[c] = w00 * c00[c] + w01 * c01[c] + w10 * c10[c] + w11 * c11[c];
    }
    return out;
}

BilinearSampleGrad bilinear_sample_with_grad(const FeatureMap& fm, PixelCoord at) {
    const AxisStencil su = stencil(at.u, fm.width());
    const AxisStencil sv = stencil(at.v, fm.height());
    const auto c00 = fm.at(sv.lo, su.lo);
    const auto c01 = fm.at(sv.lo, su.lo + 1);
    const auto c10 = fm.at(sv.lo + 1, su.lo);
    const auto c11 = fm.at(sv.lo + 1, su.lo + 1);
    const double fu = su.frac;
    const double fv = sv.frac;
    BilinearSampleGrad g{bilinear_sample(fm, at), Eigen::VectorXd::Zero(fm.channels()),
                         Eigen::VectorXd::Zero(fm.channels())};
    for (int c = 0; c < fm.channels(); ++c) {
        if (!su.clamped) {
            g.d_du[c] = (1.0 - fv) * (c01[c] - c00[c]) + fv * (c11[c] - c10[c]);
        }
        if (!sv.clamped) {
            g.d_dv[c] = (1.0 - fu) * (c10[c] - c00[c]) + fu * (c11[c] - c01[c]);
        }
    }
    return g;
}

CameraRig make_surround_rig(int views, double fov_deg, int image_size, const Eigen::Vector3d& mount) {
    if (views < 1) throw std::invalid_argument("rig needs at least one view");
    // Camera axes expressed in the ego frame for a forward-looking camera:
    // optical +z along ego +x, image +x along ego -y, image +y along ego -z.
    Eigen::Matrix3d cam_from_ego_forward;
    cam_from_ego_forward << 0.0, -1.0, 0.0,
                            0.0, 0.0, -1.0,
                            1.0, 0.0, 0.0;
    const double f = 0.5 * image_size / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
    CameraRig rig;
    rig.reserve(views);
    for (int k = 0; k < views; ++k) {
        const double yaw = 2.0 * std::numbers::pi * k / views;
        // ego -> camera: undo the mount yaw and offset, then permute axes.
        const RigidPose mount_pose = RigidPose::from_yaw(yaw, mount);
        const RigidPose ego_to_mount = mount_pose.inverse();
        CameraModel cam;
        cam.intrinsics = {f, f, 0.5 * image_size, 0.5 * image_size};
        cam.image_width = image_size;
        cam.image_height = image_size;
        cam.extrinsic.rotation = cam_from_ego_forward * ego_to_mount.rotation;
        cam.extrinsic.translation = cam_from_ego_forward * ego_to_mount.translation;
        rig.push_back(cam);
    }
    return rig;
}

}  // namespace volplan
