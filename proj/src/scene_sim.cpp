#include "planar/scene_sim.hpp"

#include "planar/polygon.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace planar {
namespace {

struct PlaneFrame {
    Vec3 e1;
    Vec3 e2;
    Ring polygon;
};

PlaneFrame plane_frame(const ScenePlane& plane) {
    auto [e1, e2] = plane_basis<double>(plane.normal);
    PlaneFrame f{e1, e2, {}};
    f.polygon.reserve(plane.boundary.size());
    for (const Vec3& p : plane.boundary) f.polygon.emplace_back(p.dot(e1), p.dot(e2));
    return f;
}

double segment_distance_2d(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (a + t * ab - p).norm();
}

}  // namespace

void CameraIntrinsics::validate() const {
    if (!(fx > 0 && fy > 0)) throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: image size must be positive");
    if (!(cx > 0 && cx < width && cy > 0 && cy < height))
        throw std::invalid_argument("intrinsics: principal point outside the image");
}

Pose look_along(const Vec3& position, const Vec3& forward) {
    const Vec3 f = forward.normalized();
    Vec3 right = f.cross(Vec3::UnitZ());
    if (right.norm() < 1e-9) right = Vec3::UnitX();  // looking straight up or down
    right.normalize();
    const Vec3 down = f.cross(right);
    Pose pose;
    pose.rotation.col(0) = right;
    pose.rotation.col(1) = down;
    pose.rotation.col(2) = f;
    pose.translation = position;
    return pose;
}

Vec3 back_project(const CameraIntrinsics& k, const Pose& pose, double u, double v, double z) {
    const Vec3 p_cam((u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z);
    return pose.to_world(p_cam);
}

const ScenePlane* SyntheticScene::find(int id) const {
    for (const ScenePlane& p : planes)
        if (p.id == id) return &p;
    return nullptr;
}

ScenePlane make_rectangle(int id, const Vec3& center, const Vec3& u, const Vec3& v, double hu, double hv) {
    ScenePlane plane;
    plane.id = id;
    plane.normal = u.cross(v).normalized();
    plane.offset = -plane.normal.dot(center);
    plane.boundary = {center - hu * u - hv * v, center + hu * u - hv * v, center + hu * u + hv * v,
                      center - hu * u + hv * v};
    return plane;
}

SyntheticScene build_room_scene(const RoomSpec& spec, std::uint64_t seed) {
    if (!(spec.size.array() > 0.0).all())
        throw std::invalid_argument("build_room_scene: room dimensions must be positive");
    if (spec.extra_planes < 0) throw std::invalid_argument("build_room_scene: negative extra-plane count");

    const double X = spec.size.x();
    const double Y = spec.size.y();
    const double Z = spec.size.z();
    const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();

    SyntheticScene scene;
    scene.bounds = {Vec3::Zero(), spec.size};
    auto& planes = scene.planes;
    planes.push_back(make_rectangle(0, {X / 2, Y / 2, 0}, ex, ey, X / 2, Y / 2));  // floor
    planes.push_back(make_rectangle(1, {X / 2, Y / 2, Z}, ey, ex, Y / 2, X / 2));  // ceiling
    planes.push_back(make_rectangle(2, {0, Y / 2, Z / 2}, ey, ez, Y / 2, Z / 2));
    planes.push_back(make_rectangle(3, {X, Y / 2, Z / 2}, ez, ey, Z / 2, Y / 2));
    planes.push_back(make_rectangle(4, {X / 2, 0, Z / 2}, ez, ex, Z / 2, X / 2));
    planes.push_back(make_rectangle(5, {X / 2, Y, Z / 2}, ex, ez, X / 2, Z / 2));

    std::mt19937_64 rng(seed);
    auto uniform = [&rng](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };

    const double hs = spec.table_half_size;
    for (int i = 0; i < spec.extra_planes; ++i) {
        const int id = 6 + i;
        if (!spec.tilted && i < 2 && spec.table_separation / 2 + hs < X / 2 && spec.table_height < Z) {
            const double sx = (i == 0 ? -0.5 : 0.5) * spec.table_separation;
            planes.push_back(make_rectangle(id, {X / 2 + sx, Y / 2, spec.table_height}, ex, ey, hs, hs));
            continue;
        }
        const double half = std::min({uniform(0.2, 0.4), 0.25 * X, 0.25 * Y, 0.25 * Z});
        const double margin = half + 0.05;
        const Vec3 c(uniform(margin, X - margin), uniform(margin, Y - margin),
                     uniform(std::min(0.4, Z / 2), std::max(Z / 2, Z - margin)));
        if (!spec.tilted) {
            planes.push_back(make_rectangle(id, c, ex, ey, half, half));
        } else {
            const double tilt = deg2rad(uniform(20.0, 45.0));
            const double yaw = uniform(0.0, 2.0 * kPi);
            const Vec3 axis(std::cos(yaw), std::sin(yaw), 0.0);
            const Eigen::AngleAxisd rot(tilt, axis);
            // Normal is rot * ez, so the panel tilts away from horizontal but faces up.
            planes.push_back(make_rectangle(id, c, axis, rot * ez.cross(axis), half, half));
        }
    }
    return scene;
}

std::vector<Pose> generate_trajectory(const SyntheticScene& scene, int n_frames, std::uint64_t seed,
                                      const TrajectoryOptions& options) {
    if (scene.planes.empty()) throw std::invalid_argument("generate_trajectory: empty scene");
    if (n_frames < 1) throw std::invalid_argument("generate_trajectory: n_frames must be >= 1");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const double yaw0 = phase(rng);
    const double orbit0 = phase(rng);
    const double pitch_phase = phase(rng);

    const AlignedBox& b = scene.bounds;
    const Vec3 extent = b.max - b.min;
    const double radius = std::min(options.orbit_radius, 0.4 * std::min(extent.x(), extent.y()));
    const Vec3 c = b.center();
    const double height = b.min.z() + options.height_fraction * extent.z();

    std::vector<Pose> poses;
    poses.reserve(static_cast<std::size_t>(n_frames));
    for (int k = 0; k < n_frames; ++k) {
        const double yaw = yaw0 + k * deg2rad(options.yaw_step_deg);
        const double pitch =
            deg2rad(options.pitch_center_deg +
                    options.pitch_amplitude_deg *
                        std::sin(2.0 * kPi * k / options.pitch_period_frames + pitch_phase));
        const double orbit = orbit0 + options.orbit_rate * k * deg2rad(options.yaw_step_deg);
        const Vec3 position(c.x() + radius * std::cos(orbit), c.y() + radius * std::sin(orbit), height);
        const Vec3 forward(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
        poses.push_back(look_along(position, forward));
    }
    return poses;
}

DepthFrame render_depth(const SyntheticScene& scene, const CameraIntrinsics& k, const Pose& pose,
                        const RenderOptions& options) {
    k.validate();
    std::vector<PlaneFrame> frames;
    frames.reserve(scene.planes.size());
    for (const ScenePlane& p : scene.planes) frames.push_back(plane_frame(p));

    DepthFrame out;
    out.intrinsics = k;
    out.pose = pose;
    out.depth = DepthImage::Zero(k.height, k.width);
    out.gt_plane_id = LabelImage::Constant(k.height, k.width, -1);

    const Vec3& o = pose.translation;
    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            // dir has unit camera-z, so the ray parameter is the z-depth.
            const Vec3 dir = pose.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            double best = std::numeric_limits<double>::infinity();
            int best_id = -1;
            for (std::size_t i = 0; i < scene.planes.size(); ++i) {
                const ScenePlane& pl = scene.planes[i];
                const double denom = pl.normal.dot(dir);
                if (std::abs(denom) < 1e-12) continue;
                const double t = -(pl.normal.dot(o) + pl.offset) / denom;
                if (!(t > 1e-9) || t >= best) continue;
                const Vec3 hit = o + t * dir;
                const Vec2 q(hit.dot(frames[i].e1), hit.dot(frames[i].e2));
                if (!point_in_ring(q, frames[i].polygon)) continue;
                best = t;
                best_id = pl.id;
            }
            if (best_id >= 0) {
                out.depth(v, u) = best;
                (*out.gt_plane_id)(v, u) = best_id;
            }
        }
    }

    if (options.noise_sigma > 0.0 || options.quantize_mm) {
        std::mt19937_64 rng(options.seed);
        std::normal_distribution<double> noise(0.0, options.noise_sigma > 0 ? options.noise_sigma : 1.0);
        for (Eigen::Index i = 0; i < out.depth.size(); ++i) {
            double& z = out.depth.data()[i];
            if (z <= 0.0) continue;
            if (options.noise_sigma > 0.0) z = std::max(0.0, z + noise(rng));
            if (options.quantize_mm) z = std::round(z * 1000.0) / 1000.0;
        }
    }
    return out;
}

double polygon_area(const ScenePlane& plane) {
    if (plane.boundary.size() < 3) return 0.0;
    return std::abs(signed_area(plane_frame(plane).polygon));
}

std::vector<OrientedPoint> sample_gt_points(const SyntheticScene& scene, double density, std::uint64_t seed) {
    if (!(density > 0.0)) throw std::invalid_argument("sample_gt_points: density must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<OrientedPoint> out;
    for (const ScenePlane& plane : scene.planes) {
        if (plane.boundary.size() < 3) continue;
        const PlaneFrame f = plane_frame(plane);
        std::vector<Vec2> verts;
        const std::vector<Triangle> tris = triangulate(f.polygon, {}, verts);
        std::vector<double> cumulative;
        double total = 0.0;
        for (const Triangle& t : tris) {
            total += 0.5 * std::abs((verts[t[1]] - verts[t[0]]).x() * (verts[t[2]] - verts[t[0]]).y() -
                                    (verts[t[1]] - verts[t[0]]).y() * (verts[t[2]] - verts[t[0]]).x());
            cumulative.push_back(total);
        }
        if (total <= 0.0) continue;
        const auto count = static_cast<std::size_t>(std::llround(density * total));
        const Vec3 base = -plane.offset * plane.normal;
        for (std::size_t s = 0; s < count; ++s) {
            const double pick = unit(rng) * total;
            std::size_t ti = static_cast<std::size_t>(
                std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
            ti = std::min(ti, tris.size() - 1);
            double r1 = std::sqrt(unit(rng));
            double r2 = unit(rng);
            const Vec2& a = verts[tris[ti][0]];
            const Vec2& b = verts[tris[ti][1]];
            const Vec2& c = verts[tris[ti][2]];
            const Vec2 q = (1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c;
            out.push_back({base + q.x() * f.e1 + q.y() * f.e2, plane.normal, plane.id});
        }
    }
    return out;
}

std::vector<OrientedPoint> filter_observed(const std::vector<OrientedPoint>& points,
                                           const std::vector<DepthFrame>& frames, double depth_tol) {
    std::vector<OrientedPoint> out;
    for (const OrientedPoint& pt : points) {
        for (const DepthFrame& fr : frames) {
            const Vec3 pc = fr.pose.to_camera(pt.position);
            if (pc.z() <= 1e-6) continue;
            const CameraIntrinsics& k = fr.intrinsics;
            const long u = std::lround(k.fx * pc.x() / pc.z() + k.cx);
            const long v = std::lround(k.fy * pc.y() / pc.z() + k.cy);
            if (u < 0 || v < 0 || u >= k.width || v >= k.height) continue;
            const double z = fr.depth(v, u);
            if (z <= 0.0 || std::abs(z - pc.z()) > depth_tol) continue;
            if (fr.gt_plane_id && (*fr.gt_plane_id)(v, u) != pt.label) continue;
            out.push_back(pt);
            break;
        }
    }
    return out;
}

PolygonDistance::PolygonDistance(const ScenePlane& plane) : normal_(plane.normal), offset_(plane.offset) {
    const PlaneFrame f = plane_frame(plane);
    e1_ = f.e1;
    e2_ = f.e2;
    ring_ = f.polygon;
}

double PolygonDistance::operator()(const Vec3& p) const {
    const double h = plane_distance<double>(p, normal_, offset_);
    const Vec2 q(p.dot(e1_), p.dot(e2_));
    if (point_in_ring(q, ring_)) return std::abs(h);
    double edge = std::numeric_limits<double>::infinity();
    const std::size_t n = ring_.size();
    for (std::size_t i = 0; i < n; ++i) edge = std::min(edge, segment_distance_2d(q, ring_[i], ring_[(i + 1) % n]));
    return std::sqrt(h * h + edge * edge);
}

double distance_to_polygon(const ScenePlane& plane, const Vec3& p) { return PolygonDistance(plane)(p); }

}  // namespace planar
