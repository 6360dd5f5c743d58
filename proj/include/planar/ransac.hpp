#pragma once

#include "planar/clustering.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace planar {

struct RansacParams {
    double eps_dist = 0.05;              ///< meters
    double eps_angle = deg2rad(30.0);    ///< radians
    int min_inliers = 50;
    int max_planes = 32;
    int iters_per_plane = 200;
    std::uint64_t seed = 0;
    bool split_components = false;       ///< split inlier sets into connected pieces
    double component_cell = 0.10;        ///< adjacency lattice for the split, meters
    double min_width = 0.05;             ///< inliers whose second principal std is below this are a line, meters

    void validate() const;
};

struct RansacPlane {
    Vec3 normal = Vec3::UnitZ();
    double offset = 0.0;
    std::vector<int> inliers;   ///< indices into the input, ascending
};

/// Least-squares plane through `points` (PCA), oriented to agree with `hint`.
std::pair<Vec3, double> fit_plane_least_squares(std::span<const Vec3> points, const Vec3& hint);

/// Sequential RANSAC with one-point-plus-normal hypotheses. Each round keeps
/// the best of iters_per_plane hypotheses, refits it by least squares on its
/// inliers and removes them. Stops at max_planes or when no hypothesis reaches
/// min_inliers. Hypotheses whose inliers are a line at the given width (a
/// crease seen as a row of points) fix no plane and are skipped.
std::vector<RansacPlane> sequential_ransac(std::span<const OrientedPoint> points, const RansacParams& params);

/// Wraps RANSAC planes as plane instances with support voxels at `voxel_size`.
std::vector<PlaneInstance> ransac_instances(std::span<const OrientedPoint> points,
                                            std::span<const RansacPlane> planes, double voxel_size);

}  // namespace planar
