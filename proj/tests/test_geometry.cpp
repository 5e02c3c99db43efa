#include <Eigen/Dense>

#include "doctest.h"
#include "splatedit/geometry.hpp"
#include "splatedit/rng.hpp"
#include "test_support.hpp"

using namespace splatedit;
using testsupport::make_camera;

namespace {

Eigen::Matrix3d to_eigen(const Mat3<double>& m) {
    Eigen::Matrix3d e;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) e(i, j) = m[i][j];
    return e;
}

}  // namespace

TEST_CASE("quat_to_rotation basics") {
    const auto id = quat_to_rotation(Quaternion<double>{1, 0, 0, 0});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(id[i][j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));

    // Hand-evaluated standard formula for q = (0,0,0,1): rotating the basis
    // vectors by 180 degrees about z gives diag(-1,-1,1).
    const auto rz = quat_to_rotation(Quaternion<double>{0, 0, 0, 1});
    CHECK(rz[0][0] == doctest::Approx(-1.0));
    CHECK(rz[1][1] == doctest::Approx(-1.0));
    CHECK(rz[2][2] == doctest::Approx(1.0));
    CHECK(std::abs(rz[0][1]) < 1e-12);

    // Scale invariance after normalization.
    const auto scaled = quat_to_rotation(Quaternion<double>{2, 0, 0, 0});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(scaled[i][j] == doctest::Approx(id[i][j]).epsilon(1e-12));

    CHECK_THROWS_AS(quat_to_rotation(Quaternion<double>{0, 0, 0, 0}), std::invalid_argument);
}

TEST_CASE("quat_to_rotation orthonormality over random quaternions") {
    Rng rng(11);
    for (int k = 0; k < 1000; ++k) {
        Quaternion<double> q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        if (q.norm() < 1e-6) q.w += 1.0;
        const auto r = quat_to_rotation(q);
        Mat3<double> gram = r.transposed() * r;
        for (int i = 0; i < 3; ++i) gram[i][i] -= 1.0;
        CHECK(gram.max_abs() < 1e-6);
        const auto e = to_eigen(r);
        CHECK(e.determinant() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("build_covariance axis-aligned and rotated") {
    const auto c1 = build_covariance(Quaternion<double>{1, 0, 0, 0}, Vec3<double>{1, 2, 3});
    CHECK(c1.m[0][0] == doctest::Approx(1.0));
    CHECK(c1.m[1][1] == doctest::Approx(4.0));
    CHECK(c1.m[2][2] == doctest::Approx(9.0));
    CHECK(std::abs(c1.m[0][1]) < 1e-12);

    // 90 degrees about z maps the y axis onto x: conjugating diag(1,4,1)
    // gives diag(4,1,1).
    const double s = std::sin(M_PI / 4.0), w = std::cos(M_PI / 4.0);
    const auto c2 = build_covariance(Quaternion<double>{w, 0, 0, s}, Vec3<double>{1, 2, 1});
    CHECK(c2.m[0][0] == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(c2.m[1][1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c2.m[2][2] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("build_covariance eigenvalues equal squared scales (eigen-decomposition oracle)") {
    Rng rng(21);
    for (int k = 0; k < 200; ++k) {
        Quaternion<double> q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        if (q.norm() < 1e-6) q.w += 1.0;
        Vec3<double> s{rng.uniform(1e-3, 10.0), rng.uniform(1e-3, 10.0), rng.uniform(1e-3, 10.0)};
        const auto cov = build_covariance(q, s);

        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(to_eigen(cov.m));
        std::array<double, 3> expected{s.x * s.x, s.y * s.y, s.z * s.z};
        std::sort(expected.begin(), expected.end());
        for (int i = 0; i < 3; ++i)
            CHECK(solver.eigenvalues()[i] == doctest::Approx(expected[i]).epsilon(1e-8));
    }
}

TEST_CASE("build_covariance positive semi-definite for random inputs") {
    Rng rng(31);
    for (int k = 0; k < 1000; ++k) {
        Quaternion<double> q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        if (q.norm() < 1e-6) q.w += 1.0;
        Vec3<double> s{rng.uniform(1e-3, 10.0), rng.uniform(1e-3, 10.0), rng.uniform(1e-3, 10.0)};
        const auto cov = build_covariance(q, s);
        // Symmetry.
        CHECK(cov.m[0][1] == doctest::Approx(cov.m[1][0]).epsilon(1e-12));
        CHECK(cov.m[0][2] == doctest::Approx(cov.m[2][0]).epsilon(1e-12));
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(to_eigen(cov.m));
        const double trace = cov.m[0][0] + cov.m[1][1] + cov.m[2][2];
        CHECK(solver.eigenvalues()[0] >= -1e-9 * trace);
    }
}

TEST_CASE("project_gaussian optical axis and near-plane culling") {
    const auto cam = make_camera<double>(64, 64);
    const auto sigma = build_covariance(Quaternion<double>{1, 0, 0, 0}, Vec3<double>{0.1, 0.2, 0.1});

    const auto proj = project_gaussian(Vec3<double>{0, 0, 3.0}, sigma, cam);
    REQUIRE(proj.has_value());
    CHECK(proj->mu.x == doctest::Approx(cam.cx).epsilon(1e-12));
    CHECK(proj->mu.y == doctest::Approx(cam.cy).epsilon(1e-12));
    CHECK(proj->depth == doctest::Approx(3.0));

    CHECK(!project_gaussian(Vec3<double>{0, 0, cam.znear / 2}, sigma, cam).has_value());
}

TEST_CASE("project_gaussian tiny covariance collapses to the low-pass floor") {
    const auto cam = make_camera<double>(64, 64);
    const double eps = 1e-9;
    const auto sigma = build_covariance(Quaternion<double>{1, 0, 0, 0}, Vec3<double>{eps, eps, eps});
    const auto proj = project_gaussian(Vec3<double>{0.4, -0.2, 3.0}, sigma, cam);
    REQUIRE(proj.has_value());
    CHECK(proj->cov.xx == doctest::Approx(kLowpassFloor).epsilon(1e-6));
    CHECK(proj->cov.yy == doctest::Approx(kLowpassFloor).epsilon(1e-6));
    CHECK(std::abs(proj->cov.xy) < 1e-9);
    // Pinhole position computed independently.
    CHECK(proj->mu.x == doctest::Approx(cam.fx * 0.4 / 3.0 + cam.cx));
    CHECK(proj->mu.y == doctest::Approx(cam.fy * -0.2 / 3.0 + cam.cy));
    // Conic is the inverse within 1e-6 relative.
    CHECK(proj->cov.conic_a * proj->cov.xx + proj->cov.conic_b * proj->cov.xy ==
          doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("projection agrees with a Monte-Carlo pinhole oracle for small extents") {
    // Sample points from N(x, Sigma), project each through the pinhole, and
    // compare the sample mean/covariance with (mu, Sigma' - floor) within 3
    // standard errors. Valid in the small-extent regime where the EWA
    // linearization is accurate.
    const auto cam = make_camera<double>(64, 64);
    Rng rng(97);
    const int kGaussians = 100;
    const int kSamples = 100000;

    for (int g = 0; g < kGaussians; ++g) {
        const Vec3<double> x{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(2.5, 4.5)};
        Quaternion<double> q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        if (q.norm() < 1e-6) q.w += 1.0;
        // Well inside the spec's s < 0.05 * depth regime: at 1e5 samples the
        // projection's second-order bias must stay below the statistical band.
        const double max_s = 0.003 * x.z;
        const Vec3<double> s{rng.uniform(0.2, 1.0) * max_s, rng.uniform(0.2, 1.0) * max_s,
                             rng.uniform(0.2, 1.0) * max_s};
        const auto sigma = build_covariance(q, s);
        const auto proj = project_gaussian(x, sigma, cam);
        REQUIRE(proj.has_value());

        const auto rot = quat_to_rotation(q);
        double mean_u = 0, mean_v = 0;
        std::vector<double> us(kSamples), vs(kSamples);
        for (int i = 0; i < kSamples; ++i) {
            const Vec3<double> local{rng.normal() * s.x, rng.normal() * s.y, rng.normal() * s.z};
            const Vec3<double> p = x + rot * local;
            const double u = cam.fx * p.x / p.z + cam.cx;
            const double v = cam.fy * p.y / p.z + cam.cy;
            us[i] = u;
            vs[i] = v;
            mean_u += u;
            mean_v += v;
        }
        mean_u /= kSamples;
        mean_v /= kSamples;
        double cov_uu = 0, cov_uv = 0, cov_vv = 0;
        for (int i = 0; i < kSamples; ++i) {
            cov_uu += (us[i] - mean_u) * (us[i] - mean_u);
            cov_uv += (us[i] - mean_u) * (vs[i] - mean_v);
            cov_vv += (vs[i] - mean_v) * (vs[i] - mean_v);
        }
        cov_uu /= kSamples - 1;
        cov_uv /= kSamples - 1;
        cov_vv /= kSamples - 1;

        const double exp_uu = proj->cov.xx - kLowpassFloor;
        const double exp_uv = proj->cov.xy;
        const double exp_vv = proj->cov.yy - kLowpassFloor;

        const double se_mu_u = std::sqrt(exp_uu / kSamples);
        const double se_mu_v = std::sqrt(exp_vv / kSamples);
        CHECK(std::abs(mean_u - proj->mu.x) < 3 * se_mu_u);
        CHECK(std::abs(mean_v - proj->mu.y) < 3 * se_mu_v);

        const double se_uu = std::sqrt(2.0 * exp_uu * exp_uu / kSamples);
        const double se_vv = std::sqrt(2.0 * exp_vv * exp_vv / kSamples);
        const double se_uv = std::sqrt((exp_uu * exp_vv + exp_uv * exp_uv) / kSamples);
        CHECK(std::abs(cov_uu - exp_uu) < 3 * se_uu);
        CHECK(std::abs(cov_vv - exp_vv) < 3 * se_vv);
        CHECK(std::abs(cov_uv - exp_uv) < 3 * se_uv);
    }
}

TEST_CASE("camera validation") {
    auto cam = make_camera<double>(32, 32);
    CHECK_NOTHROW(cam.validate());
    cam.rotation[0][1] = 0.5;
    CHECK_THROWS_AS(cam.validate(), std::invalid_argument);
    auto cam2 = make_camera<double>(32, 32);
    cam2.fx = -1.0;
    CHECK_THROWS_AS(cam2.validate(), std::invalid_argument);
}
