#include "planar/io.hpp"
#include "planar/mesh.hpp"
#include "planar/polygon.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace planar;
using namespace planar::testing;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "planar_tests";
    fs::create_directories(dir);
    return dir / name;
}

PlaneInstance support_plane(const std::vector<Cell>& cells, double v = 0.04) {
    PlaneInstance p;
    p.id = 2;
    p.normal = Vec3::UnitZ();
    p.offset = -0.5;
    p.voxel_size = v;
    for (const auto& [i, j] : cells) p.support.push_back({static_cast<int>(i), static_cast<int>(j), 12});
    std::sort(p.support.begin(), p.support.end());
    return p;
}

double mesh_area(const io::Mesh& m) {
    double a = 0;
    for (const auto& f : m.faces)
        a += 0.5 * (m.vertices[f[1]] - m.vertices[f[0]]).cross(m.vertices[f[2]] - m.vertices[f[0]]).norm();
    return a;
}

std::vector<Cell> block(int lo, int hi, std::vector<Cell> skip = {}) {
    std::vector<Cell> out;
    for (int i = lo; i < hi; ++i)
        for (int j = lo; j < hi; ++j)
            if (std::find(skip.begin(), skip.end(), Cell{i, j}) == skip.end()) out.push_back({i, j});
    return out;
}

}  // namespace

TEST_CASE("a square support meshes to a flat patch") {
    const PlaneInstance p = support_plane(block(0, 5));
    const io::Mesh m = plane_patch(p);
    CHECK(m.faces.size() >= 2);
    CHECK(m.face_colors.size() == m.faces.size());
    for (const Vec3& q : m.vertices) CHECK(std::abs(q.z() - 0.5) < 1e-6);
    CHECK(mesh_area(m) == doctest::Approx(25 * 0.04 * 0.04).epsilon(1e-9));
    for (const auto& c : m.face_colors) CHECK(c == plane_color(2));
}

TEST_CASE("a ring keeps its hole") {
    std::vector<Cell> hole;
    for (int i = 2; i < 5; ++i)
        for (int j = 2; j < 5; ++j) hole.push_back({i, j});
    const auto cells = block(0, 7, hole);
    const auto loops = contour_cells(cells);
    REQUIRE(loops.size() == 2);
    std::vector<double> areas;
    for (const auto& l : loops) areas.push_back(signed_area(l));
    std::sort(areas.begin(), areas.end());
    CHECK(areas[0] == doctest::Approx(-9.0));
    CHECK(areas[1] == doctest::Approx(49.0));

    const io::Mesh m = plane_patch(support_plane(cells));
    CHECK(mesh_area(m) == doctest::Approx(40 * 0.04 * 0.04).epsilon(1e-9));
    // no face covers the hole centre
    const Vec3 centre(3.5 * 0.04, 3.5 * 0.04, 0.5);
    for (const auto& f : m.faces) {
        const Vec3 a = m.vertices[f[0]], b = m.vertices[f[1]], c = m.vertices[f[2]];
        const double s1 = (b - a).cross(centre - a).z(), s2 = (c - b).cross(centre - b).z(), s3 = (a - c).cross(centre - c).z();
        CHECK(!((s1 > 0 && s2 > 0 && s3 > 0) || (s1 < 0 && s2 < 0 && s3 < 0)));
    }
}

TEST_CASE("saddles are filled before contouring") {
    const std::vector<Cell> diag{{0, 0}, {1, 1}};
    const auto fixed = remove_saddles(diag);
    CHECK(fixed.size() == 3);
    CHECK(contour_cells(fixed).size() == 1);
    CHECK(remove_saddles(block(0, 3)).size() == 9);
}

TEST_CASE("triangulation of a polygon with a hole") {
    const Ring outer{{0, 0}, {4, 0}, {4, 4}, {0, 4}};
    const Ring hole{{1, 1}, {1, 2}, {2, 2}, {2, 1}};
    std::vector<Vec2> verts;
    const auto tris = triangulate(outer, {hole}, verts);
    double area = 0;
    for (const Triangle& t : tris) {
        const double a = 0.5 * ((verts[t[1]] - verts[t[0]]).x() * (verts[t[2]] - verts[t[0]]).y() -
                                (verts[t[1]] - verts[t[0]]).y() * (verts[t[2]] - verts[t[0]]).x());
        CHECK(a > 0);
        area += a;
    }
    CHECK(area == doctest::Approx(15.0));
    CHECK(signed_area(outer) == 16.0);
    CHECK(point_in_ring(Vec2(0.5, 0.5), outer));
    CHECK(!point_in_ring(Vec2(5, 0.5), outer));
    CHECK(simplify_collinear(Ring{{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}}).size() == 4);
}

TEST_CASE("exported meshes re-import with the same counts") {
    GlobalPlaneMap map;
    map.planes.push_back(support_plane(block(0, 6)));
    PlaneInstance wall = support_plane(block(0, 4));
    wall.id = 5;
    wall.normal = Vec3::UnitX();
    wall.offset = -1.0;
    map.planes.push_back(wall);
    const fs::path path = scratch("planes.ply");
    export_planes_mesh(map, path);
    const io::Mesh back = io::read_ply_mesh(path);
    const io::Mesh direct = planes_mesh(map.planes);
    CHECK(back.vertices.size() == direct.vertices.size());
    CHECK(back.faces.size() == direct.faces.size());
    CHECK(back.face_colors == direct.face_colors);
    for (std::size_t i = 0; i < back.vertices.size(); ++i) CHECK(back.vertices[i] == direct.vertices[i]);

    CHECK_THROWS_AS(export_planes_mesh(GlobalPlaneMap{}, path), std::invalid_argument);
    try {
        export_planes_mesh(map, "/nonexistent-dir/x/planes.ply");
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("/nonexistent-dir/x/planes.ply") != std::string::npos);
    }
}

TEST_CASE("point clouds round-trip through PLY") {
    std::vector<OrientedPoint> pts{{Vec3(1, 2, 3), Vec3::UnitX(), 4}, {Vec3(-0.5, 0.25, 1e-3), Vec3::UnitZ(), -1}};
    const fs::path path = scratch("points.ply");
    io::write_ply_points(path, pts);
    const auto back = io::read_ply_points(path);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].position == pts[i].position);
        CHECK(back[i].normal == pts[i].normal);
        CHECK(back[i].label == pts[i].label);
    }

    const fs::path ascii = scratch("ascii.ply");
    std::ofstream(ascii) << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                            "property float z\nproperty float nx\nproperty float ny\nproperty float nz\n"
                            "end_header\n1 2 3 0 0 1\n";
    const auto a = io::read_ply_points(ascii);
    REQUIRE(a.size() == 1);
    CHECK(a[0].position == Vec3(1, 2, 3));
    CHECK(a[0].label == -1);
}

TEST_CASE("sequence files round-trip") {
    const SyntheticScene s = build_room_scene(RoomSpec{{4, 3, 2.5}, 2}, 5);
    const CameraIntrinsics k;
    std::vector<DepthFrame> frames;
    for (const Pose& p : generate_trajectory(s, 3, 5)) frames.push_back(render_depth(s, k, p, RenderOptions{0, true, 0}));
    const fs::path dir = scratch("seq");
    fs::remove_all(dir);
    io::write_sequence(dir, frames, &s);
    const io::Sequence back = io::load_sequence(dir);
    REQUIRE(back.frames.size() == 3);
    CHECK(back.intrinsics.fx == k.fx);
    CHECK(back.intrinsics.width == k.width);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK((back.frames[i].depth - frames[i].depth).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((back.frames[i].pose.rotation - frames[i].pose.rotation).norm() < 1e-12);
        CHECK((back.frames[i].pose.translation - frames[i].pose.translation).norm() < 1e-12);
        REQUIRE(back.frames[i].gt_plane_id);
        CHECK(*back.frames[i].gt_plane_id == *frames[i].gt_plane_id);
    }
    REQUIRE(back.scene);
    REQUIRE(back.scene->planes.size() == s.planes.size());
    for (std::size_t i = 0; i < s.planes.size(); ++i) {
        CHECK(back.scene->planes[i].id == s.planes[i].id);
        CHECK((back.scene->planes[i].normal - s.planes[i].normal).norm() < 1e-12);
        CHECK(back.scene->planes[i].boundary.size() == s.planes[i].boundary.size());
    }
    CHECK_THROWS(io::load_sequence(scratch("missing-seq")));
}

TEST_CASE("depth png stores whole millimetres") {
    DepthImage d(2, 3);
    d << 0.0, 1.0004, 2.5, 65.535, 70.0, 0.001;
    const fs::path path = scratch("depth.png");
    io::write_depth_png(path, d);
    const DepthImage back = io::read_depth_png(path);
    CHECK(back(0, 0) == 0.0);
    CHECK(back(0, 1) == doctest::Approx(1.0));
    CHECK(back(0, 2) == doctest::Approx(2.5));
    CHECK(back(1, 0) == doctest::Approx(65.535));
    CHECK(back(1, 1) == 0.0);
    CHECK(back(1, 2) == doctest::Approx(0.001));
}

TEST_CASE("rounded pose files are snapped to a rotation") {
    const fs::path path = scratch("pose.txt");
    std::ofstream(path) << "0.866 -0.5 0 1\n0.5 0.866 0 2\n0 0 1 3\n0 0 0 1\n";
    const Pose p = io::read_pose(path);
    CHECK((p.rotation.transpose() * p.rotation - Mat3::Identity()).norm() < 1e-12);
    CHECK(p.rotation.determinant() == doctest::Approx(1.0));
    CHECK(p.translation == Vec3(1, 2, 3));
    std::ofstream(path) << "1 0 0 0\n0 1 0 0\n0 0 -1 0\n0 0 0 1\n";
    CHECK_THROWS_AS(io::read_pose(path), std::runtime_error);
}
