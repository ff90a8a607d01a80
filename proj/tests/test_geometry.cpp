#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "naive_oracles.hpp"
#include "test_support.hpp"
#include "volplan/geometry.hpp"

using namespace volplan;
using testing_support::uniform;

namespace {

CameraModel simple_camera() {
    CameraModel cam;
    cam.intrinsics = {100.0, 100.0, 50.0, 50.0};
    cam.image_width = 100;
    cam.image_height = 100;
    return cam;
}

}  // namespace

TEST_SUITE("geometry") {
    TEST_CASE("projection fixtures") {
        const CameraModel cam = simple_camera();
        const auto a = project_to_view({0.0, 0.0, 10.0}, cam);
        REQUIRE(a);
        CHECK(a->u == 50.0);
        CHECK(a->v == 50.0);
        const auto b = project_to_view({1.0, 0.0, 10.0}, cam);
        REQUIRE(b);
        CHECK(b->u == doctest::Approx(60.0).epsilon(1e-15));
        CHECK(b->v == 50.0);
        CHECK_FALSE(project_to_view({0.0, 0.0, -5.0}, cam));
        CHECK_FALSE(project_to_view({0.0, 0.0, 0.05}, cam));   // inside the near plane
        CHECK_FALSE(project_to_view({6.0, 0.0, 10.0}, cam));   // u = 110, off the image
        CHECK(project_to_view({-5.0, 0.0, 10.0}, cam));         // u = 0 is inside
        CHECK_FALSE(project_to_view({-5.0 - 1e-9, 0.0, 10.0}, cam));
        CHECK_FALSE(project_to_view({5.0, 0.0, 10.0}, cam));    // u = W is outside
    }

    TEST_CASE("projection agrees with the loop oracle") {
        std::mt19937_64 rng(21);
        for (int trial = 0; trial < 50; ++trial) {
            const auto rig = testing_support::random_rig(rng, 4);
            for (int i = 0; i < 200; ++i) {
                const double p[3] = {uniform(rng, -40, 40), uniform(rng, -40, 40), uniform(rng, -3, 6)};
                for (const auto& cam : rig) {
                    const auto got = project_to_view({p[0], p[1], p[2]}, cam);
                    const auto want = oracle::project(p, cam);
                    REQUIRE(got.has_value() == want.has_value());
                    if (got) {
                        CHECK(got->u == doctest::Approx(want->u).epsilon(1e-12));
                        CHECK(got->v == doctest::Approx(want->v).epsilon(1e-12));
                    }
                }
            }
        }
    }

    TEST_CASE("ego-motion compensation fixtures") {
        const Eigen::Vector3d p(10.0, 0.0, 0.0);
        CHECK(compensate_ego_motion(p, RigidPose::identity()) == p);
        CHECK(compensate_ego_motion(p, RigidPose::from_yaw(0.0, {5.0, 0.0, 0.0})).isApprox(Eigen::Vector3d(5, 0, 0)));
        const RigidPose yaw90 = RigidPose::from_yaw(std::numbers::pi / 2, {1.0, 2.0, 0.5});
        const Eigen::Vector3d q(3.0, -4.0, 1.0);
        CHECK((yaw90.apply(compensate_ego_motion(q, yaw90)) - q).norm() < 1e-9);
    }

    TEST_CASE("projection is neutral under a pose round trip") {
        std::mt19937_64 rng(4);
        const CameraRig rig = make_surround_rig(6);
        for (int i = 0; i < 2000; ++i) {
            const RigidPose pose = testing_support::random_pose(rng);
            const Eigen::Vector3d p(uniform(rng, -30, 30), uniform(rng, -30, 30), uniform(rng, -2, 5));
            const Eigen::Vector3d back = compensate_ego_motion(pose.apply(p), pose);
            for (const auto& cam : rig) {
                const auto a = project_to_view(p, cam);
                const auto b = project_to_view(back, cam);
                if (a && b) {
                    CHECK(std::abs(a->u - b->u) < 1e-8);
                    CHECK(std::abs(a->v - b->v) < 1e-8);
                } else if (a || b) {
                    // only points within rounding of an image border may flip
                    const PixelCoord px = a ? *a : *b;
                    const double border = std::min({px.u, px.v, cam.image_width - px.u, cam.image_height - px.v});
                    CHECK(border < 1e-6);
                }
            }
        }
    }

    TEST_CASE("rigid pose algebra") {
        std::mt19937_64 rng(8);
        for (int i = 0; i < 100; ++i) {
            const RigidPose a = testing_support::random_pose(rng);
            const RigidPose b = testing_support::random_pose(rng);
            const Eigen::Vector3d p(uniform(rng, -9, 9), uniform(rng, -9, 9), uniform(rng, -9, 9));
            CHECK((a.compose(b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
            CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
            CHECK(a.is_orthonormal());
        }
        RigidPose skew;
        skew.rotation(0, 1) = 0.1;
        CHECK_FALSE(skew.is_orthonormal());
    }

    TEST_CASE("camera validation") {
        CameraModel cam = simple_camera();
        CHECK_NOTHROW(cam.validate());
        cam.intrinsics.fx = 0.0;
        CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
        cam = simple_camera();
        cam.near_plane = 0.0;
        CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
        cam = simple_camera();
        cam.extrinsic.rotation *= 1.01;
        CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
        for (const auto& c : make_surround_rig(8)) CHECK_NOTHROW(c.validate());
    }

    TEST_CASE("feature map validation") {
        CHECK_THROWS(FeatureMap(1, 4, 2).validate());
        FeatureMap fm(2, 2, 1);
        fm.data()[3] = std::nan("");
        CHECK_THROWS(fm.validate());
        CHECK_THROWS(FeatureMap(2, 2, 2, std::vector<double>(5)));
    }

    TEST_CASE("bilinear sampling fixtures") {
        FeatureMap fm(4, 5, 2);
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 5; ++c) {
                fm.at(r, c)[0] = 10.0 * r + c;
                fm.at(r, c)[1] = -1.0 * c;
            }
        }
        // u = column 2, v = row 3
        const Eigen::VectorXd exact = bilinear_sample(fm, {2.0, 3.0});
        CHECK(exact[0] == 32.0);
        CHECK(exact[1] == -2.0);

        FeatureMap sq(2, 2, 1, {0.0, 0.0, 2.0, 2.0});
        CHECK(bilinear_sample(sq, {0.5, 0.5})[0] == 1.0);

        // clamping to the border
        CHECK(bilinear_sample(fm, {-3.0, -0.4})[0] == 0.0);
        CHECK(bilinear_sample(fm, {9.0, 7.0})[0] == 34.0);
    }

    TEST_CASE("bilinear sampling agrees with the loop oracle") {
        std::mt19937_64 rng(31);
        for (int i = 0; i < 500; ++i) {
            const FeatureMap fm = testing_support::random_map(rng, testing_support::uniform_int(rng, 2, 9),
                                                              testing_support::uniform_int(rng, 2, 9), 3);
            const double u = uniform(rng, -1.0, fm.width());
            const double v = uniform(rng, -1.0, fm.height());
            const Eigen::VectorXd got = bilinear_sample(fm, {u, v});
            const auto want = oracle::bilinear(fm, u, v);
            for (int k = 0; k < 3; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-12);
        }
    }

    TEST_CASE("bilinear sampling is linear in the map") {
        std::mt19937_64 rng(2);
        for (int i = 0; i < 200; ++i) {
            const FeatureMap a = testing_support::random_map(rng, 6, 7, 4);
            const FeatureMap b = testing_support::random_map(rng, 6, 7, 4);
            const double alpha = uniform(rng, 0.0, 1.0);
            FeatureMap mix(6, 7, 4);
            for (std::size_t k = 0; k < mix.data().size(); ++k) {
                mix.data()[k] = alpha * a.data()[k] + (1.0 - alpha) * b.data()[k];
            }
            const PixelCoord at{uniform(rng, 0.0, 6.0), uniform(rng, 0.0, 5.0)};
            const Eigen::VectorXd lhs = bilinear_sample(mix, at);
            const Eigen::VectorXd rhs = alpha * bilinear_sample(a, at) + (1.0 - alpha) * bilinear_sample(b, at);
            CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    TEST_CASE("bilinear position gradient matches central differences at 50 interior points") {
        std::mt19937_64 rng(50);
        const FeatureMap fm = testing_support::random_map(rng, 8, 11, 5);
        const double eps = 1e-4;
        for (int i = 0; i < 50; ++i) {
            // keep clear of cell boundaries, where the derivative jumps
            const double u = std::floor(uniform(rng, 0.0, 10.0)) + uniform(rng, 0.05, 0.95);
            const double v = std::floor(uniform(rng, 0.0, 7.0)) + uniform(rng, 0.05, 0.95);
            const BilinearSampleGrad g = bilinear_sample_with_grad(fm, {u, v});
            const Eigen::VectorXd du =
                (bilinear_sample(fm, {u + eps, v}) - bilinear_sample(fm, {u - eps, v})) / (2 * eps);
            const Eigen::VectorXd dv =
                (bilinear_sample(fm, {u, v + eps}) - bilinear_sample(fm, {u, v - eps})) / (2 * eps);
            for (int c = 0; c < 5; ++c) {
                CHECK(std::abs(g.d_du[c] - du[c]) <= 1e-5 * std::max({std::abs(du[c]), std::abs(g.d_du[c]), 1e-8}));
                CHECK(std::abs(g.d_dv[c] - dv[c]) <= 1e-5 * std::max({std::abs(dv[c]), std::abs(g.d_dv[c]), 1e-8}));
            }
        }
    }

    TEST_CASE("pixel to feature coordinates") {
        const PixelCoord same = pixel_to_feature_coords({17.25, 3.5}, 32, 20, 32, 20);
        CHECK(same.u == doctest::Approx(17.25).epsilon(1e-15));
        CHECK(same.v == doctest::Approx(3.5).epsilon(1e-15));
        const PixelCoord center = pixel_to_feature_coords({0.5 * 448 - 0.5, 0.5 * 224 - 0.5}, 448, 224, 32, 16);
        CHECK(center.u == doctest::Approx(0.5 * 32 - 0.5).epsilon(1e-15));
        CHECK(center.v == doctest::Approx(0.5 * 16 - 0.5).epsilon(1e-15));
        const PixelCoord corner = pixel_to_feature_coords({0.0, 0.0}, 448, 448, 32, 32);
        CHECK(corner.u == doctest::Approx(-0.4642857142857143).epsilon(1e-12));
    }

    TEST_CASE("visible views do not depend on rig order") {
        std::mt19937_64 rng(77);
        const CameraRig rig = testing_support::random_rig(rng, 5);
        CameraRig reversed(rig.rbegin(), rig.rend());
        for (int i = 0; i < 500; ++i) {
            const Eigen::Vector3d p(uniform(rng, -30, 30), uniform(rng, -30, 30), uniform(rng, -2, 6));
            for (std::size_t v = 0; v < rig.size(); ++v) {
                CHECK(project_to_view(p, rig[v]).has_value() ==
                      project_to_view(p, reversed[rig.size() - 1 - v]).has_value());
            }
        }
    }

    TEST_CASE("surround rig covers the horizon") {
        const CameraRig rig = make_surround_rig(4);
        REQUIRE(rig.size() == 4);
        for (double yaw = 0.0; yaw < 2 * std::numbers::pi; yaw += 0.1) {
            const Eigen::Vector3d p(20 * std::cos(yaw), 20 * std::sin(yaw), 1.5);
            int seen = 0;
            for (const auto& cam : rig) seen += project_to_view(p, cam).has_value();
            CHECK(seen >= 1);
        }
        // the first camera looks forward
        const auto fwd = project_to_view({10.0, 0.0, 1.5}, rig[0]);
        REQUIRE(fwd);
        CHECK(fwd->u == doctest::Approx(224.0));
        CHECK(fwd->v == doctest::Approx(224.0));
        // +y (left) appears left of center, +z (up) above
        CHECK(project_to_view({10.0, 1.0, 1.5}, rig[0])->u < 224.0);
        CHECK(project_to_view({10.0, 0.0, 2.5}, rig[0])->v < 224.0);
    }
}
