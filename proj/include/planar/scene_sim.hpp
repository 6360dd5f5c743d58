#pragma once

#include "planar/geometry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace planar {

struct CameraIntrinsics {
    double fx = 120.0;
    double fy = 120.0;
    double cx = 79.5;
    double cy = 59.5;
    int width = 160;
    int height = 120;

    /// Throws std::invalid_argument when the invariants do not hold.
    void validate() const;
};

/// Camera-to-world rigid transform. Camera looks along +z, x right, y down.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
    Vec3 to_camera(const Vec3& p_world) const { return rotation.transpose() * (p_world - translation); }
    const Vec3& center() const { return translation; }
};

/// Pose pointing the camera along `forward` with world +z as up.
Pose look_along(const Vec3& position, const Vec3& forward);

using DepthImage = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using LabelImage = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DepthFrame {
    CameraIntrinsics intrinsics;
    Pose pose;
    DepthImage depth;                     ///< z-depth in meters, 0 = invalid; rows = height
    std::optional<LabelImage> gt_plane_id;  ///< -1 = no plane
};

/// Back-projects pixel (u, v) with z-depth `z` into world coordinates.
Vec3 back_project(const CameraIntrinsics& k, const Pose& pose, double u, double v, double z);

struct ScenePlane {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;           ///< plane is {p : <normal, p> + offset = 0}
    std::vector<Vec3> boundary;    ///< simple polygon on the plane
    int id = 0;
};

struct AlignedBox {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    bool contains(const Vec3& p, double tol = 0.0) const {
        return (p.array() >= min.array() - tol).all() && (p.array() <= max.array() + tol).all();
    }
    Vec3 center() const { return 0.5 * (min + max); }
};

struct SyntheticScene {
    std::vector<ScenePlane> planes;
    AlignedBox bounds;

    const ScenePlane* find(int id) const;
};

/// Makes a rectangular plane patch centred at `center`, spanned by the unit
/// in-plane axes `u` and `v` with half extents `hu`, `hv`. The normal is u x v.
ScenePlane make_rectangle(int id, const Vec3& center, const Vec3& u, const Vec3& v, double hu,
                          double hv);

struct RoomSpec {
    Vec3 size{4.0, 3.0, 2.5};   ///< x, y extents and height (z up)
    int extra_planes = 0;       ///< interior planes beyond floor, ceiling and walls
    bool tilted = false;        ///< extras become tilted panels instead of table tops
    double table_height = 0.7;
    double table_separation = 3.0;  ///< centre distance of the first two tables
    double table_half_size = 0.3;
};

/// Box room with corner at the origin: floor (id 0), ceiling (1), walls
/// x=0, x=X, y=0, y=Y (2..5), then extras. Normals face the room interior.
SyntheticScene build_room_scene(const RoomSpec& spec, std::uint64_t seed);

struct TrajectoryOptions {
    double yaw_step_deg = 6.0;
    double pitch_center_deg = -12.0;
    double pitch_amplitude_deg = 22.0;
    double pitch_period_frames = 23.0;
    double orbit_radius = 0.35;         ///< meters around the room centre
    double orbit_rate = 0.5;            ///< orbit angle advance per unit of yaw
    double height_fraction = 0.6;       ///< camera height as a fraction of the room height
};

/// Smooth look-around trajectory inside the scene bounds. Deterministic in seed.
std::vector<Pose> generate_trajectory(const SyntheticScene& scene, int n_frames, std::uint64_t seed,
                                      const TrajectoryOptions& options = {});

struct RenderOptions {
    double noise_sigma = 0.0;   ///< additive Gaussian on z-depth (meters)
    bool quantize_mm = false;   ///< round to whole millimetres after noise
    std::uint64_t seed = 0;
};

/// Nearest ray-polygon intersection per pixel; misses get depth 0, id -1.
DepthFrame render_depth(const SyntheticScene& scene, const CameraIntrinsics& intrinsics,
                        const Pose& pose, const RenderOptions& options = {});

/// Uniform samples on every plane polygon, round(density * area) per plane.
std::vector<OrientedPoint> sample_gt_points(const SyntheticScene& scene, double density,
                                            std::uint64_t seed = 0);

/// Keeps points that some frame observes: they project inside the image and
/// the rendered label there is their own plane, at matching depth.
std::vector<OrientedPoint> filter_observed(const std::vector<OrientedPoint>& points,
                                           const std::vector<DepthFrame>& frames,
                                           double depth_tol = 0.05);

/// Unsigned point-to-polygon distance with the in-plane frame precomputed.
class PolygonDistance {
public:
    explicit PolygonDistance(const ScenePlane& plane);
    double operator()(const Vec3& p) const;

private:
    Vec3 normal_;
    double offset_;
    Vec3 e1_, e2_;
    std::vector<Vec2> ring_;
};

/// Unsigned distance from p to the polygon of `plane`.
double distance_to_polygon(const ScenePlane& plane, const Vec3& p);

double polygon_area(const ScenePlane& plane);

}  // namespace planar
