#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace planar {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

/// Integer lattice coordinate of a voxel. Coordinates are global: voxel
/// (i,j,k) at size s covers [i*s, (i+1)*s) x ... in world space.
struct VoxelKey {
    std::int32_t x = 0;
    std::int32_t y = 0;
    std::int32_t z = 0;

    friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
    friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const noexcept {
        std::uint64_t h = static_cast<std::uint32_t>(k.x) * 73856093ULL;
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.y)) * 19349663ULL;
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.z)) * 83492791ULL;
        h ^= h >> 29;
        return static_cast<std::size_t>(h * 0x9E3779B97F4A7C15ULL);
    }
};

inline VoxelKey voxel_of(const Vec3& p, double voxel_size) {
    return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size)),
            static_cast<std::int32_t>(std::floor(p.y() / voxel_size)),
            static_cast<std::int32_t>(std::floor(p.z() / voxel_size))};
}

inline Vec3 voxel_center(const VoxelKey& k, double voxel_size) {
    return {(k.x + 0.5) * voxel_size, (k.y + 0.5) * voxel_size, (k.z + 0.5) * voxel_size};
}

/// Parent of a voxel one level coarser (side doubled).
inline VoxelKey parent_of(const VoxelKey& k) {
    auto half = [](std::int32_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
    return {half(k.x), half(k.y), half(k.z)};
}

/// Signed distance of p to the plane {q : <n,q> + d = 0}.
template <typename Scalar>
Scalar plane_distance(const Vector3<Scalar>& p, const Vector3<Scalar>& n, Scalar d) {
    return n.dot(p) + d;
}

template <typename Scalar>
Vector3<Scalar> project_to_plane(const Vector3<Scalar>& p, const Vector3<Scalar>& n, Scalar d) {
    return p - plane_distance(p, n, d) * n;
}

/// Orthonormal in-plane basis (e1, e2) with e1 x e2 = n. e1 is built from the
/// world axis least aligned with n (lowest index on ties), so axis-aligned
/// planes get an axis-aligned basis.
template <typename Scalar>
std::pair<Vector3<Scalar>, Vector3<Scalar>> plane_basis(const Vector3<Scalar>& n) {
    int axis = 0;
    for (int i = 1; i < 3; ++i) {
        if (std::abs(n[i]) < std::abs(n[axis])) axis = i;
    }
    Vector3<Scalar> a = Vector3<Scalar>::Unit(axis);
    Vector3<Scalar> e1 = (a - a.dot(n) * n).normalized();
    Vector3<Scalar> e2 = n.cross(e1);
    return {e1, e2};
}

/// Angle of a rotation matrix, from the trace with clamping.
inline double rotation_angle(const Mat3& r) {
    const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
}

inline double angle_between(const Vec3& a, const Vec3& b) {
    const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
    return std::acos(c);
}

/// A point with a unit normal and an optional instance label (-1 = none).
struct OrientedPoint {
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    int label = -1;
};

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace planar
