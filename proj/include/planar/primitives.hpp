#pragma once

#include "planar/fragmenter.hpp"
#include "planar/scene_sim.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace planar {

template <typename Scalar>
using AnchorSet = std::array<Vector3<Scalar>, 6>;

/// Six anchor normals: two horizontal axes and their negations, then +/-up.
/// For up = +z the order is +x, -x, +y, -y, +z, -z.
template <typename Scalar>
AnchorSet<Scalar> make_anchor_set(const Vector3<Scalar>& up) {
    using std::abs;
    if (abs(up.norm() - Scalar(1)) > Scalar(1e-9)) throw std::invalid_argument("make_anchor_set: up axis must be unit length");
    const auto [h1, h2] = plane_basis<Scalar>(up);
    return {h1, Vector3<Scalar>(-h1), h2, Vector3<Scalar>(-h2), up, Vector3<Scalar>(-up)};
}

template <typename Scalar>
struct AnchorCode {
    int index = 0;
    Vector3<Scalar> residual = Vector3<Scalar>::Zero();
};

/// Closest anchor by inner product (lowest index wins ties) and the residual
/// n - anchor.
template <typename Scalar>
AnchorCode<Scalar> classify_anchor(const Vector3<Scalar>& n, const AnchorSet<Scalar>& anchors) {
    int best = 0;
    Scalar best_dot = n.dot(anchors[0]);
    for (int i = 1; i < 6; ++i) {
        const Scalar d = n.dot(anchors[i]);
        if (d > best_dot) {
            best_dot = d;
            best = i;
        }
    }
    return {best, n - anchors[best]};
}

template <typename Scalar>
Vector3<Scalar> decode_anchor(const AnchorCode<Scalar>& code, const AnchorSet<Scalar>& anchors) {
    return (anchors[code.index] + code.residual).normalized();
}

template <typename Scalar>
struct PlaneOffset {
    Vector3<Scalar> foot;   ///< x + D n, the voxel centre moved onto its plane
    Scalar offset;          ///< d = -<foot, n>
};

/// Offset of the plane through x + D n with normal n.
template <typename Scalar>
PlaneOffset<Scalar> plane_offset(const Vector3<Scalar>& x, const Vector3<Scalar>& n, Scalar distance) {
    const Vector3<Scalar> foot = x + distance * n;
    return {foot, -foot.dot(n)};
}

constexpr int kDescriptorSize = 7;
using Descriptor = Eigen::Matrix<double, kDescriptorSize, 1>;

/// Per-voxel plane evidence.
struct VoxelPrimitive {
    VoxelKey voxel;
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    double distance = 0.0;               ///< signed, along normal, to the supporting plane
    Vec3 displacement = Vec3::Zero();    ///< vote towards the plane centroid
    int anchor = 0;
    Vec3 residual = Vec3::Zero();
    Descriptor descriptor = Descriptor::Zero();
    bool reliable = true;

    Vec3 foot() const { return plane_offset<double>(center, normal, distance).foot; }
    double offset() const { return plane_offset<double>(center, normal, distance).offset; }
    Vec3 shifted() const { return center + displacement; }
};

/// Builds a primitive, filling anchor code and descriptor
/// (normal, d / cube diagonal, (vote target - cube origin) / cube side).
VoxelPrimitive make_primitive(const VoxelKey& voxel, const Vec3& center, const Vec3& normal, double distance,
                              const Vec3& displacement, const AnchorSet<double>& anchors, const BoundingCube& cube);

/// Ground-truth primitives: each voxel takes its nearest scene polygon (ties to
/// the lower id) and votes for the centroid of that plane's voxels. Voxels
/// farther than 2 * truncation from every polygon are dropped.
std::vector<VoxelPrimitive> estimate_primitives_oracle(const SparseVoxelGrid& grid, const SyntheticScene& scene,
                                                       double truncation,
                                                       const AnchorSet<double>& anchors = make_anchor_set<double>(Vec3::UnitZ()));

struct GeometricParams {
    double radius = 0.12;                 ///< neighbourhood radius, meters
    int vote_iters = 3;
    int min_neighbors = 8;
    double normal_gate = deg2rad(30.0);   ///< vote graph: max normal disagreement
    double offset_gate_voxels = 2.0;      ///< vote graph: max offset disagreement in voxels
    double max_surface_variation = 0.02;  ///< lambda_min / trace above this is not planar
    double min_spread = 0.1;              ///< lambda_mid / lambda_max below this is a line, not a patch

    void validate(double voxel_size) const;
};

/// Classical plane and voting estimates from fused surface samples.
///
/// Normals come from PCA over samples within `radius`, oriented towards the
/// majority of keyframes that see the voxel. Votes: voxels are grown into
/// regions from the most planar seeds, a voxel joining when it is within
/// `radius` of a member and agrees with the region plane within the gates.
/// Each later round regrows the regions from their seeds using the refit
/// plane. Every vote points at its region's centroid. Unreliable voxels (too few
/// neighbours, non-planar or line-like support) are returned with reliable = false.
std::vector<VoxelPrimitive> estimate_primitives_geometric(const SparseVoxelGrid& grid, const FusedSurface& surface,
                                                          const GeometricParams& params,
                                                          const AnchorSet<double>& anchors = make_anchor_set<double>(Vec3::UnitZ()));

/// Sets every displacement to zero (ablation of the voting branch).
void zero_votes(std::vector<VoxelPrimitive>& primitives, const BoundingCube& cube);

}  // namespace planar
