#pragma once

#include "planar/clustering.hpp"

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace planar {

struct GlobalPlaneMap {
    std::vector<PlaneInstance> planes;   ///< each carries its id and observation count
    int next_id = 0;
};

struct MatchResult {
    std::vector<std::pair<int, int>> pairs;  ///< (global index, new index)
    std::vector<int> unmatched_global;
    std::vector<int> unmatched_new;
    Eigen::MatrixXd scores;                  ///< global x new
};

constexpr int kPlaneFeatureSize = 8;
using PlaneFeature = Eigen::Matrix<double, kPlaneFeatureSize, 1>;

/// Unit feature (normal; relative offset; standardised centroid; standardised
/// log support). Centroids are centred on the context mean and divided by the
/// RMS centroid spread; the offset is taken relative to the context mean, so
/// a common translation of all instances leaves every feature unchanged.
PlaneFeature plane_feature(const PlaneInstance& instance, std::span<const PlaneInstance> context);

std::vector<PlaneFeature> plane_features(std::span<const PlaneInstance> instances,
                                         std::span<const PlaneInstance> context);

/// S(m, n) = <h_m, h_n>.
Eigen::MatrixXd similarity_matrix(std::span<const PlaneFeature> global, std::span<const PlaneFeature> fresh);

/// Geometric compatibility required before two planes may match. Pairs that
/// fail get the lowest possible similarity, -1.
///
/// Besides agreeing in normal and offset, two patches must not be separated by
/// observed free space: the segment between their centroids is sampled on the
/// plane, and if the keyframes see past the plane along a stretch of at least
/// `free_gap` the patches are distinct surfaces (two tables at one height).
struct MatchGate {
    bool enabled = true;
    double max_angle = deg2rad(30.0);   ///< between normals
    double max_offset = 0.1;            ///< each centroid's distance to the other plane, meters
    double free_gap = 0.2;              ///< meters of free space that split coplanar patches
    double free_margin = 0.05;          ///< depth beyond the plane that counts as free, meters
    double step = 0.05;                 ///< sample spacing along the segment, meters
};

/// Length of the longest run of the segment a -> b (sampled every `step`)
/// that the frames observe as free space.
double free_run_length(const Vec3& a, const Vec3& b, std::span<const DepthFrame> frames, double margin,
                       double step);

bool planes_compatible(const PlaneInstance& a, const PlaneInstance& b, const MatchGate& gate,
                       std::span<const DepthFrame> frames = {});

/// Copy of `scores` with incompatible pairs set to -1.
Eigen::MatrixXd gate_scores(const Eigen::MatrixXd& scores, std::span<const PlaneInstance> global,
                            std::span<const PlaneInstance> fresh, const MatchGate& gate,
                            std::span<const DepthFrame> frames = {});

struct SinkhornParams {
    double dustbin = -0.6;
    int n_iters = 100;
    double epsilon = 0.1;
    double accept = 0.2;       ///< minimum transport mass of an accepted pair
    bool maximize = true;      ///< false uses the scores as costs (literal argmin)

    void validate() const;
};

struct SinkhornResult {
    Eigen::MatrixXd transport;   ///< (M+1) x (N+1), last row and column are dustbins
    int iterations = 0;
    double residual = 0.0;       ///< max deviation of row and column sums from their marginals
};

/// Entropic transport over S augmented with a dustbin row and column. Real
/// rows and columns carry mass 1; the dustbin row carries N and the dustbin
/// column M. Runs in log space; each iteration balances the rows and updates
/// the column potentials by a safeguarded Newton step on the dual, until the
/// residual drops below 1e-9 or n_iters is reached.
SinkhornResult sinkhorn(const Eigen::MatrixXd& scores, const SinkhornParams& params);

/// Pairs are non-dustbin cells that are the argmax of both their row and
/// their column of the transport matrix and carry more than `accept` mass.
MatchResult sinkhorn_match(const Eigen::MatrixXd& scores, const SinkhornParams& params);

/// |A n B| / |A u B| of two sorted voxel sets.
double support_iou(std::span<const VoxelKey> a, std::span<const VoxelKey> b);

/// Greedy matching by descending IoU (ties to lower indices), pairs need IoU >= threshold.
MatchResult iou_match(std::span<const std::vector<VoxelKey>> global, std::span<const std::vector<VoxelKey>> fresh,
                      double iou_threshold);

enum class GammaPolicy { fixed, observation_count };

struct FusionPolicy {
    GammaPolicy policy = GammaPolicy::observation_count;
    double gamma = 1.0;   ///< used by the fixed policy

    void validate() const;
};

/// (gamma * global + fresh) / (gamma + 1).
template <typename T>
T fuse_value(const T& global, const T& fresh, double gamma) {
    return (gamma * global + fresh) / (gamma + 1.0);
}

/// Fuses matched pairs, keeps unmatched global planes and registers unmatched
/// new instances under fresh ids.
GlobalPlaneMap fuse(const GlobalPlaneMap& map, const MatchResult& matches, std::span<const PlaneInstance> fresh,
                    const FusionPolicy& policy);

/// Merges global planes that pass the match gate with each other (a surface
/// that arrived as two patches). The earlier plane keeps its id; values are
/// averaged by weight. Returns the number of merges.
int consolidate(GlobalPlaneMap& map, const MatchGate& gate, std::span<const DepthFrame> frames = {});

/// Versioned text snapshot. With `full`, support voxels and descriptors are
/// written too, which makes the snapshot resumable.
void write_snapshot(std::ostream& out, const GlobalPlaneMap& map, bool full = false);
GlobalPlaneMap read_snapshot(std::istream& in);

}  // namespace planar
