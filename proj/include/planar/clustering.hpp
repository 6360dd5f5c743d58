#pragma once

#include "planar/primitives.hpp"

#include <span>
#include <vector>

namespace planar {

/// A detected plane.
struct PlaneInstance {
    int id = -1;                     ///< assigned when registered in the global map
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;             ///< <normal, p> + offset = 0
    Vec3 centroid = Vec3::Zero();
    std::vector<VoxelKey> support;   ///< sorted finest-level voxels
    double voxel_size = 0.0;         ///< size of the support voxels
    Descriptor descriptor = Descriptor::Zero();
    double weight = 0.0;             ///< observation mass (voxel count)
    int observations = 1;
};

/// What the mean-shift feature is built from. `shifted_position` is the normal
/// mode. `plane_parameters` groups by (n, d) only, as a detector without the
/// voting branch would.
enum class ClusterSpace { shifted_position, plane_parameters };

struct ClusterConfig {
    double bandwidth_pos = 0.4;
    double bandwidth_normal = 0.3;
    double bandwidth_offset = 0.1;   ///< only used in plane_parameters space
    int max_iter = 50;
    double tol = 1e-4;
    int min_cluster_size = 20;
    ClusterSpace space = ClusterSpace::shifted_position;

    void validate() const;
};

using Feature = Eigen::Matrix<double, 6, 1>;

/// Bandwidth-normalised clustering feature. The first three entries are the
/// spatial part: x'/bandwidth_pos, or (d/bandwidth_offset, 0, 0) in
/// plane_parameters space. The last three are n/bandwidth_normal.
Feature cluster_feature(const VoxelPrimitive& p, const ClusterConfig& config);

std::vector<Vec3> shift_voxels(std::span<const VoxelPrimitive> primitives);

/// One flat-kernel mean-shift step by brute force: mean of the points within
/// unit distance of `at` (returns `at` when none are).
Feature mean_shift_step(std::span<const Feature> points, const Feature& at);

struct Clustering {
    std::vector<int> labels;                ///< per input primitive; -1 = outlier or unreliable
    std::vector<Feature> modes;             ///< per cluster
    std::vector<std::vector<int>> members;  ///< per cluster, input indices in voxel-key order
    std::vector<int> outliers;              ///< reliable primitives left unclustered
};

/// Flat-kernel mean-shift over the reliable primitives. Every primitive seeds
/// a trajectory; converged modes closer than 0.5 are merged by single linkage
/// and each primitive joins the group of the mode its own seed reached.
Clustering mean_shift_cluster(std::span<const VoxelPrimitive> primitives, const ClusterConfig& config);

/// One instance per cluster: normal from the mode, centroid = mean foot point.
std::vector<PlaneInstance> form_plane_instances(std::span<const VoxelPrimitive> primitives,
                                                const Clustering& clustering, const ClusterConfig& config,
                                                double voxel_size);

}  // namespace planar
