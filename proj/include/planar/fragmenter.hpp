#pragma once

#include "planar/scene_sim.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace planar {

struct KeyframeParams {
    double t_max = 0.1;               ///< meters
    double r_max = deg2rad(15.0);     ///< radians
    int n_k = 9;                      ///< keyframes per fragment

    void validate() const;
};

struct Fragment {
    int index = 0;
    std::vector<DepthFrame> keyframes;
};

/// True when `frame` is far enough from `last_keyframe` to become a keyframe.
bool is_new_keyframe(const Pose& last_keyframe, const Pose& frame, double t_max, double r_max);

/// Streaming keyframe selection. Feed frames in order; a fragment is returned
/// every n_k keyframes and `flush` emits the trailing partial group.
class KeyframeSelector {
public:
    explicit KeyframeSelector(KeyframeParams params);

    std::optional<Fragment> push(const DepthFrame& frame);
    std::optional<Fragment> flush();

    std::size_t keyframe_count() const { return keyframes_seen_; }

private:
    KeyframeParams params_;
    std::optional<Pose> last_keyframe_;
    std::vector<DepthFrame> pending_;
    int next_index_ = 0;
    std::size_t keyframes_seen_ = 0;
};

std::vector<Fragment> select_keyframes(std::span<const DepthFrame> stream, double t_max, double r_max, int n_k);

struct BoundingCube {
    Vec3 origin = Vec3::Zero();  ///< minimum corner
    double side = 0.0;

    bool contains(const Vec3& p) const {
        return (p.array() >= origin.array()).all() && (p.array() <= (origin.array() + side)).all();
    }
    double diagonal() const { return side * std::sqrt(3.0); }
};

/// Smallest axis-aligned cube holding every keyframe's frustum corners between
/// d_min and d_max, centred on the corners' bounding box.
BoundingCube fragment_bounds(const Fragment& fragment, double d_min, double d_max);

struct TsdfVoxel {
    VoxelKey key;
    double tsdf = 0.0;    ///< meters, clamped to [-lambda, lambda]
    double weight = 0.0;
};

struct SurfaceSample {
    VoxelKey voxel;
    Vec3 position;        ///< zero-crossing estimate
    Vec3 normal;          ///< unit, towards the observing cameras
    double tsdf = 0.0;
    double weight = 0.0;
};

struct CameraView {
    CameraIntrinsics intrinsics;
    Pose pose;
};

struct FusedSurface {
    double voxel_size = 0.0;
    double truncation = 0.0;           ///< lambda
    BoundingCube bounds;
    std::vector<TsdfVoxel> voxels;     ///< observed voxels, sorted by key
    std::vector<SurfaceSample> samples;  ///< one per surface candidate with a usable gradient, sorted by key
    std::vector<CameraView> views;

    bool empty() const { return voxels.empty(); }
};

struct FusionParams {
    double voxel_size = 0.04;
    double truncation = 0.12;
    double max_depth = std::numeric_limits<double>::infinity();
};

/// Projective truncated signed-distance fusion of the fragment's keyframes on
/// the global voxel lattice, restricted to `bounds`.
FusedSurface fuse_depth(const Fragment& fragment, const BoundingCube& bounds, const FusionParams& params);

inline FusedSurface fuse_depth(const Fragment& fragment, const BoundingCube& bounds, double finest_voxel,
                               double truncation) {
    return fuse_depth(fragment, bounds, FusionParams{finest_voxel, truncation});
}

struct SparseVoxelGrid {
    int level = 0;                 ///< 0 = coarsest
    double voxel_size = 0.0;
    Vec3 origin = Vec3::Zero();    ///< lattice origin; keys are global
    BoundingCube bounds;
    std::vector<VoxelKey> keys;    ///< sorted
    std::vector<double> scores;    ///< parallel to keys, each >= theta

    std::size_t size() const { return keys.size(); }
    bool contains(const VoxelKey& k) const;
    Vec3 center(std::size_t i) const { return voxel_center(keys[i], voxel_size); }
};

/// Occupancy score of a fused voxel: proximity to the zero crossing,
/// 1 - |tsdf| / lambda, scaled by min(1, weight / full_weight).
double occupancy_score(const TsdfVoxel& v, double truncation, double full_weight = 1.0);

/// Three levels, coarsest first, with voxel sizes 4x, 2x and 1x the finest.
/// Coarse scores are the max over children; voxels scoring below theta are dropped.
std::array<SparseVoxelGrid, 3> build_grid_hierarchy(const FusedSurface& surface, double theta,
                                                    double full_weight = 1.0);

}  // namespace planar
