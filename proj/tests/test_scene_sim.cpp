#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace planar;
using namespace planar::testing;

namespace {

// Nearest ray hit over every polygon by direct intersection, id -1 on a miss.
std::pair<int, double> nearest_hit(const SyntheticScene& scene, const Vec3& origin, const Vec3& dir) {
    int id = -1;
    double best = std::numeric_limits<double>::infinity();
    for (const ScenePlane& p : scene.planes) {
        const double den = p.normal.dot(dir);
        if (std::abs(den) < 1e-12) continue;
        const double t = -(p.normal.dot(origin) + p.offset) / den;
        if (t <= 0 || t >= best) continue;
        if (distance_to_polygon(p, origin + t * dir) > 1e-9) continue;
        best = t;
        id = p.id;
    }
    return {id, best};
}

}  // namespace

TEST_CASE("empty box room has six axis-aligned faces") {
    const SyntheticScene s = build_room_scene(RoomSpec{{4, 3, 2.5}, 0}, 3);
    REQUIRE(s.planes.size() == 6);
    const Vec3 expected[6] = {Vec3::UnitZ(), -Vec3::UnitZ(), Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY()};
    for (int i = 0; i < 6; ++i) {
        CHECK(s.planes[i].id == i);
        CHECK((s.planes[i].normal - expected[i]).norm() < 1e-12);
        for (const Vec3& q : s.planes[i].boundary) CHECK(std::abs(s.planes[i].normal.dot(q) + s.planes[i].offset) < 1e-12);
    }
    CHECK(polygon_area(s.planes[0]) == doctest::Approx(12.0));
    CHECK(polygon_area(s.planes[2]) == doctest::Approx(7.5));
}

TEST_CASE("two tables at one height share their plane equation") {
    const SyntheticScene s = build_room_scene(RoomSpec{{4, 3, 2.5}, 2}, 3);
    REQUIRE(s.planes.size() == 8);
    const ScenePlane& a = s.planes[6];
    const ScenePlane& b = s.planes[7];
    // Analytic plane of a table top at height h: normal +z, offset -h.
    for (const ScenePlane* t : {&a, &b}) {
        CHECK((t->normal - Vec3::UnitZ()).norm() < 1e-12);
        CHECK(t->offset == doctest::Approx(-0.7).epsilon(1e-12));
        for (const Vec3& q : t->boundary) CHECK(q.z() == doctest::Approx(0.7));
    }
    Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
    for (const Vec3& q : a.boundary) ca += q / static_cast<double>(a.boundary.size());
    for (const Vec3& q : b.boundary) cb += q / static_cast<double>(b.boundary.size());
    CHECK((ca - cb).norm() == doctest::Approx(3.0));
    CHECK(polygon_area(a) == doctest::Approx(0.36));
}

TEST_CASE("room construction is deterministic") {
    const RoomSpec spec{{4, 3, 2.5}, 4, true};
    const SyntheticScene a = build_room_scene(spec, 11), b = build_room_scene(spec, 11);
    REQUIRE(a.planes.size() == b.planes.size());
    for (std::size_t i = 0; i < a.planes.size(); ++i) {
        CHECK(a.planes[i].normal == b.planes[i].normal);
        CHECK(a.planes[i].offset == b.planes[i].offset);
        CHECK(a.planes[i].boundary == b.planes[i].boundary);
    }
    CHECK_THROWS_AS(build_room_scene(RoomSpec{{0, 3, 2.5}, 0}, 1), std::invalid_argument);
}

TEST_CASE("trajectory stays inside the room with bounded steps") {
    const SyntheticScene s = build_room_scene(RoomSpec{}, 1);
    const auto one = generate_trajectory(s, 1, 5);
    REQUIRE(one.size() == 1);
    CHECK(s.bounds.contains(one[0].center()));

    const auto poses = generate_trajectory(s, 100, 5);
    REQUIRE(poses.size() == 100);
    for (std::size_t i = 0; i < poses.size(); ++i) {
        CHECK(s.bounds.contains(poses[i].center()));
        CHECK((poses[i].rotation.transpose() * poses[i].rotation - Mat3::Identity()).norm() < 1e-12);
        // half a meter ahead is still inside the room
        CHECK(s.bounds.contains(poses[i].to_world(Vec3(0, 0, 0.5))));
        if (i == 0) continue;
        CHECK((poses[i].center() - poses[i - 1].center()).norm() <= 0.15);
        CHECK(rotation_angle(poses[i - 1].rotation.transpose() * poses[i].rotation) <= deg2rad(20.0));
    }
    const auto again = generate_trajectory(s, 100, 5);
    for (std::size_t i = 0; i < poses.size(); ++i) {
        CHECK(poses[i].rotation == again[i].rotation);
        CHECK(poses[i].translation == again[i].translation);
    }
    CHECK_THROWS_AS(generate_trajectory(SyntheticScene{}, 5, 1), std::invalid_argument);
}

TEST_CASE("fronto-parallel wall renders constant depth") {
    const DepthFrame f = render_depth(wall_scene(2.0), square_camera(), facing_z());
    int hits = 0;
    for (int v = 0; v < f.depth.rows(); ++v)
        for (int u = 0; u < f.depth.cols(); ++u) {
            CHECK(f.depth(v, u) == doctest::Approx(2.0).epsilon(1e-12));
            CHECK((*f.gt_plane_id)(v, u) == 0);
            ++hits;
        }
    CHECK(hits == 100 * 100);
}

TEST_CASE("slanted plane depth matches ray intersection") {
    // plane z = x + 2: normal (-1, 0, 1)/sqrt2, offset -2/sqrt2
    SyntheticScene s;
    const Vec3 u = Vec3(1, 0, 1).normalized();
    s.planes.push_back(make_rectangle(0, {0, 0, 2}, u, Vec3::UnitY(), 20, 20));
    s.bounds = {Vec3::Constant(-20), Vec3::Constant(20)};
    const CameraIntrinsics k = square_camera();
    const DepthFrame f = render_depth(s, k, facing_z());
    // pixel (u, v) = (cx + 0.1 fx, cy) looks along (0.1, 0, 1)
    CHECK(f.depth(50, 60) == doctest::Approx(2.0 / 0.9).epsilon(1e-12));
    CHECK(f.depth(50, 60) == doctest::Approx(2.2222).epsilon(1e-4));
}

TEST_CASE("missed rays are empty") {
    SyntheticScene s;
    s.planes.push_back(make_rectangle(4, {5, 5, 2}, Vec3::UnitX(), Vec3::UnitY(), 0.1, 0.1));
    s.bounds = {Vec3::Constant(-10), Vec3::Constant(10)};
    const DepthFrame f = render_depth(s, square_camera(), facing_z());
    CHECK((f.depth.array() == 0.0).all());
    CHECK((f.gt_plane_id->array() == -1).all());
}

TEST_CASE("rendered pixels back-project onto their nearest plane") {
    const SyntheticScene s = build_room_scene(RoomSpec{{4, 3, 2.5}, 2}, 7);
    const CameraIntrinsics k;
    const auto poses = generate_trajectory(s, 30, 7);
    int checked = 0;
    for (std::size_t fi = 0; fi < poses.size(); fi += 5) {
        const DepthFrame f = render_depth(s, k, poses[fi]);
        for (int v = 0; v < k.height; v += 3)
            for (int u = 0; u < k.width; u += 3) {
                const Vec3 dir = poses[fi].rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
                const auto [id, t] = nearest_hit(s, poses[fi].center(), dir);
                REQUIRE((*f.gt_plane_id)(v, u) == id);
                if (id < 0) continue;
                const Vec3 p = back_project(k, poses[fi], u, v, f.depth(v, u));
                const ScenePlane& plane = *s.find(id);
                CHECK(std::abs(plane.normal.dot(p) + plane.offset) < 1e-6);
                CHECK(f.depth(v, u) == doctest::Approx(t).epsilon(1e-9));
                ++checked;
            }
    }
    CHECK(checked > 5000);
}

TEST_CASE("noise and quantisation are reproducible") {
    const SyntheticScene s = wall_scene();
    const RenderOptions o{0.005, true, 9};
    const DepthFrame a = render_depth(s, square_camera(), facing_z(), o);
    const DepthFrame b = render_depth(s, square_camera(), facing_z(), o);
    CHECK(a.depth == b.depth);
    const double mm = a.depth(10, 10) * 1000.0;
    CHECK(mm == doctest::Approx(std::round(mm)).epsilon(1e-9));
    CHECK(std::abs(a.depth(10, 10) - 2.0) < 0.05);
}

TEST_CASE("ground-truth samples follow area") {
    SyntheticScene s;
    s.planes.push_back(make_rectangle(0, {0, 0, 1}, Vec3::UnitX(), Vec3::UnitY(), 0.5, 0.5));
    const auto pts = sample_gt_points(s, 100, 1);
    CHECK(pts.size() >= 90);
    CHECK(pts.size() <= 110);
    for (const OrientedPoint& p : pts) {
        CHECK(std::abs(s.planes[0].normal.dot(p.position) + s.planes[0].offset) < 1e-12);
        CHECK(distance_to_polygon(s.planes[0], p.position) < 1e-9);
        CHECK(p.label == 0);
    }

    SyntheticScene flat;
    flat.planes.push_back(make_rectangle(0, {0, 0, 1}, Vec3::UnitX(), Vec3::UnitY(), 0.5, 0.0));
    CHECK(sample_gt_points(flat, 100, 1).empty());

    SyntheticScene two;
    two.planes.push_back(make_rectangle(0, {0, 0, 0}, Vec3::UnitX(), Vec3::UnitY(), 0.5, 0.5));
    two.planes.push_back(make_rectangle(1, {5, 0, 0}, Vec3::UnitX(), Vec3::UnitY(), 1.5, 0.5));
    const auto both = sample_gt_points(two, 400, 2);
    double n0 = 0, n1 = 0;
    for (const OrientedPoint& p : both) (p.label == 0 ? n0 : n1) += 1;
    CHECK(n1 / n0 == doctest::Approx(3.0).epsilon(0.1));
    CHECK_THROWS_AS(sample_gt_points(two, 0, 2), std::invalid_argument);
}

TEST_CASE("observed-point filter keeps only visible samples") {
    const SyntheticScene s = build_room_scene(RoomSpec{{4, 3, 2.5}, 0}, 1);
    const Pose p = look_along({2, 1.5, 1.2}, Vec3::UnitX());
    const DepthFrame f = render_depth(s, CameraIntrinsics{}, p);
    const auto pts = sample_gt_points(s, 200, 3);
    const auto kept = filter_observed(pts, {f});
    CHECK(!kept.empty());
    CHECK(kept.size() < pts.size());
    for (const OrientedPoint& q : kept) {
        const Vec3 c = p.to_camera(q.position);
        CHECK(c.z() > 0);
        CHECK(q.label != 2);   // wall behind the camera
    }
}
