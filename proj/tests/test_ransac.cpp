#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace planar;
using namespace planar::testing;

namespace {

std::vector<OrientedPoint> square_points(const Vec3& center, const Vec3& n, double half, int count, std::mt19937_64& rng,
                                         int label = -1) {
    const auto [e1, e2] = plane_basis<double>(n);
    std::uniform_real_distribution<double> u(-half, half);
    std::vector<OrientedPoint> out;
    for (int i = 0; i < count; ++i) out.push_back({center + u(rng) * e1 + u(rng) * e2, n, label});
    return out;
}

std::vector<OrientedPoint> unit_cube(int per_face, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<OrientedPoint> pts;
    for (int axis = 0; axis < 3; ++axis)
        for (int side : {0, 1}) {
            Vec3 c = Vec3::Constant(0.5), n = Vec3::Zero();
            c[axis] = side;
            n[axis] = side ? 1 : -1;
            const auto face = square_points(c, n, 0.5, per_face, rng, axis * 2 + side);
            pts.insert(pts.end(), face.begin(), face.end());
        }
    return pts;
}

double rms(std::span<const OrientedPoint> pts, const std::vector<int>& idx, const Vec3& n, double d) {
    double s = 0;
    for (int i : idx) s += std::pow(n.dot(pts[i].position) + d, 2);
    return std::sqrt(s / static_cast<double>(idx.size()));
}

RansacParams cube_params() {
    RansacParams p;
    p.eps_dist = 0.02;
    p.eps_angle = deg2rad(10.0);
    return p;
}

}  // namespace

TEST_CASE("unit cube faces are recovered") {
    const auto pts = unit_cube(1000, 1);
    const auto planes = sequential_ransac(pts, cube_params());
    REQUIRE(planes.size() == 6);
    std::vector<int> face_hits(6, 0);
    for (const RansacPlane& p : planes) {
        int best = -1;
        double best_angle = 180;
        for (int f = 0; f < 6; ++f) {
            Vec3 n = Vec3::Zero();
            n[f / 2] = (f % 2) ? 1 : -1;
            const double a = rad2deg(angle_between(p.normal, n));
            if (a < best_angle) best_angle = a, best = f;
        }
        CHECK(best_angle < 1.0);
        ++face_hits[best];
        CHECK(p.inliers.size() >= 950);
    }
    for (int h : face_hits) CHECK(h == 1);
}

TEST_CASE("a single noiseless plane is exact") {
    std::mt19937_64 rng(2);
    const Vec3 n = Vec3(0.3, -0.2, 0.9).normalized();
    const auto pts = square_points(Vec3(1, 2, 3), n, 1.0, 500, rng);
    const auto planes = sequential_ransac(pts, RansacParams{});
    REQUIRE(planes.size() == 1);
    CHECK((planes[0].normal - n).norm() < 1e-6);
    CHECK(std::abs(planes[0].offset + n.dot(Vec3(1, 2, 3))) < 1e-6);
    CHECK(planes[0].inliers.size() == 500);
}

TEST_CASE("parallel planes closer than the distance threshold merge") {
    std::mt19937_64 rng(3);
    auto pts = square_points(Vec3(0, 0, 0), Vec3::UnitZ(), 1.0, 500, rng, 0);
    const auto upper = square_points(Vec3(0, 0, 0.01), Vec3::UnitZ(), 1.0, 500, rng, 1);
    pts.insert(pts.end(), upper.begin(), upper.end());
    const auto a = sequential_ransac(pts, RansacParams{});
    REQUIRE(a.size() == 1);
    CHECK(a[0].inliers.size() == 1000);
    CHECK(std::abs(a[0].offset + 0.005) < 1e-3);
    const auto b = sequential_ransac(pts, RansacParams{});
    CHECK(b[0].inliers == a[0].inliers);
    CHECK(b[0].normal == a[0].normal);
    CHECK(b[0].offset == a[0].offset);
}

TEST_CASE("extraction invariants") {
    auto pts = unit_cube(300, 4);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0, 0.005);
    for (OrientedPoint& p : pts) p.position += Vec3(noise(rng), noise(rng), noise(rng));
    RansacParams params = cube_params();
    params.min_inliers = 100;
    const auto planes = sequential_ransac(pts, params);
    std::vector<int> owner(pts.size(), -1);
    for (std::size_t k = 0; k < planes.size(); ++k) {
        const RansacPlane& p = planes[k];
        CHECK(static_cast<int>(p.inliers.size()) >= params.min_inliers);
        CHECK(std::is_sorted(p.inliers.begin(), p.inliers.end()));
        CHECK(p.normal.norm() == doctest::Approx(1.0).epsilon(1e-9));
        const double refit = rms(pts, p.inliers, p.normal, p.offset);
        // Least squares beats every point-and-normal hypothesis on the same inliers.
        for (int h : p.inliers) CHECK(refit <= rms(pts, p.inliers, pts[h].normal, -pts[h].normal.dot(pts[h].position)) + 1e-12);
        for (int i : p.inliers) {
            CHECK(owner[i] == -1);
            owner[i] = static_cast<int>(k);
        }
    }
    params.seed = 99;
    const auto again = sequential_ransac(pts, params);
    params.seed = 0;
    const auto same = sequential_ransac(pts, params);
    REQUIRE(same.size() == planes.size());
    for (std::size_t k = 0; k < planes.size(); ++k) CHECK(same[k].inliers == planes[k].inliers);
    CHECK(again.size() == planes.size());
}

TEST_CASE("too few points and line-like sets give nothing") {
    std::mt19937_64 rng(5);
    const auto few = square_points(Vec3::Zero(), Vec3::UnitZ(), 1.0, 49, rng);
    CHECK(sequential_ransac(few, RansacParams{}).empty());

    std::vector<OrientedPoint> row;
    for (int i = 0; i < 200; ++i) row.push_back({Vec3(0.01 * i, 0, 0), Vec3::UnitZ(), -1});
    CHECK(sequential_ransac(row, RansacParams{}).empty());

    RansacParams bad;
    bad.eps_dist = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("least-squares plane and instances") {
    const std::vector<Vec3> pts{{0, 0, 1}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    const auto [n, d] = fit_plane_least_squares(pts, -Vec3::UnitZ());
    CHECK((n + Vec3::UnitZ()).norm() < 1e-12);
    CHECK(d == doctest::Approx(1.0));

    const auto cube = unit_cube(500, 6);
    const auto planes = sequential_ransac(cube, cube_params());
    const auto inst = ransac_instances(cube, planes, 0.04);
    REQUIRE(inst.size() == planes.size());
    for (std::size_t k = 0; k < inst.size(); ++k) {
        CHECK(inst[k].normal == planes[k].normal);
        CHECK(inst[k].offset == planes[k].offset);
        CHECK(!inst[k].support.empty());
        CHECK(std::is_sorted(inst[k].support.begin(), inst[k].support.end()));
        CHECK(inst[k].voxel_size == 0.04);
        CHECK(inst[k].weight == doctest::Approx(static_cast<double>(planes[k].inliers.size())));
    }
}
