#pragma once

// Shared fixtures and brute-force oracles for the unit and acceptance tests.

#include "planar/pipeline.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

namespace planar::testing {

inline CameraIntrinsics square_camera(int size = 100, double f = 100.0) {
    CameraIntrinsics k;
    k.fx = k.fy = f;
    k.cx = k.cy = 0.5 * size;
    k.width = k.height = size;
    return k;
}

/// Camera looking along +z from `position` (identity rotation).
inline Pose facing_z(const Vec3& position = Vec3::Zero()) {
    Pose p;
    p.translation = position;
    return p;
}

/// Large wall z = depth facing the origin.
inline SyntheticScene wall_scene(double depth = 2.0, double half = 10.0) {
    SyntheticScene s;
    s.planes.push_back(make_rectangle(0, {0, 0, depth}, Vec3::UnitY(), Vec3::UnitX(), half, half));
    s.bounds = {Vec3(-half, -half, 0), Vec3(half, half, depth)};
    return s;
}

inline Fragment fragment_of(std::vector<DepthFrame> frames, int index = 0) {
    Fragment f;
    f.index = index;
    f.keyframes = std::move(frames);
    return f;
}

/// One fragment taken through fusion, occupancy and primitive estimation.
struct FragmentPrimitives {
    BoundingCube cube;
    FusedSurface surface;
    SparseVoxelGrid grid;   ///< finest level
    std::vector<VoxelPrimitive> prims;
};

inline FragmentPrimitives fragment_primitives(const Fragment& f, const PipelineConfig& c,
                                              const SyntheticScene* scene = nullptr) {
    FragmentPrimitives out;
    out.cube = fragment_bounds(f, c.d_min, c.d_max);
    out.surface = fuse_depth(f, out.cube, c.fusion);
    out.grid = build_grid_hierarchy(out.surface, c.theta)[2];
    out.prims = scene ? estimate_primitives_oracle(out.grid, *scene, c.fusion.truncation)
                      : estimate_primitives_geometric(out.grid, out.surface, c.geometric);
    return out;
}

inline std::vector<Fragment> fragments_of(const Source& s, const PipelineConfig& c) {
    return select_keyframes(s.frames, c.keyframes.t_max, c.keyframes.r_max, c.keyframes.n_k);
}

inline double pair_count(double n) { return n * (n - 1) / 2; }

/// Segmentation metrics by explicit enumeration: every pair for RI, label
/// histograms for VOI and explicit member sets for SC. Unlabelled (-1)
/// positions are dropped first.
inline SegmentationMetrics brute_force_segmentation(const std::vector<int>& gt_all, const std::vector<int>& pred_all) {
    std::vector<int> gt, pred;
    for (std::size_t i = 0; i < gt_all.size(); ++i)
        if (gt_all[i] >= 0 && pred_all[i] >= 0) {
            gt.push_back(gt_all[i]);
            pred.push_back(pred_all[i]);
        }
    const std::size_t n = gt.size();
    SegmentationMetrics m;

    std::size_t agree = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            ++pairs;
            if ((gt[i] == gt[j]) == (pred[i] == pred[j])) ++agree;
        }
    m.ri = pairs ? static_cast<double>(agree) / static_cast<double>(pairs) : 1.0;

    std::map<int, double> pa, pb;
    std::map<std::pair<int, int>, double> pab;
    for (std::size_t i = 0; i < n; ++i) {
        pa[gt[i]] += 1.0 / n;
        pb[pred[i]] += 1.0 / n;
        pab[{gt[i], pred[i]}] += 1.0 / n;
    }
    double ha = 0, hb = 0, mi = 0;
    for (auto& [k, p] : pa) ha -= p * std::log(p);
    for (auto& [k, p] : pb) hb -= p * std::log(p);
    for (auto& [k, p] : pab) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
    m.voi = std::max(0.0, ha + hb - 2 * mi);

    std::map<int, std::set<std::size_t>> ra, rb;
    for (std::size_t i = 0; i < n; ++i) {
        ra[gt[i]].insert(i);
        rb[pred[i]].insert(i);
    }
    double covering = 0;
    for (auto& [a, sa] : ra) {
        double best = 0;
        for (auto& [b, sb] : rb) {
            std::size_t inter = 0;
            for (std::size_t i : sa) inter += sb.count(i);
            const double uni = static_cast<double>(sa.size() + sb.size() - inter);
            best = std::max(best, inter / uni);
        }
        covering += sa.size() * best;
    }
    m.sc = covering / static_cast<double>(n);
    return m;
}

/// Index of the nearest point by linear scan, lowest index on ties.
inline int brute_nearest(const std::vector<Vec3>& pts, const Vec3& q) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = (pts[i] - q).squaredNorm();
        if (d < bd) {
            bd = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

/// Best and second-best values of sum over pairs of (S(i,j) - dustbin), over
/// every partial injection of rows into columns, with the best pair set.
/// Exhaustive dynamic programme over column subsets (columns <= 16).
struct AssignmentOracle {
    double best = -std::numeric_limits<double>::infinity();
    double second = -std::numeric_limits<double>::infinity();
    std::vector<std::pair<int, int>> pairs;
};

inline AssignmentOracle brute_force_assignment(const Eigen::MatrixXd& s, double dustbin) {
    const int m = static_cast<int>(s.rows()), n = static_cast<int>(s.cols());
    struct Entry {
        double value;
        std::vector<std::pair<int, int>> pairs;
    };
    // Enumerate every partial injection by depth-first search.
    std::vector<Entry> all;
    std::vector<std::pair<int, int>> cur;
    std::vector<char> used(n, 0);
    auto rec = [&](auto&& self, int row, double value) -> void {
        if (row == m) {
            all.push_back({value, cur});
            return;
        }
        self(self, row + 1, value);
        for (int j = 0; j < n; ++j) {
            if (used[j]) continue;
            used[j] = 1;
            cur.emplace_back(row, j);
            self(self, row + 1, value + s(row, j) - dustbin);
            cur.pop_back();
            used[j] = 0;
        }
    };
    rec(rec, 0, 0.0);
    AssignmentOracle out;
    for (const Entry& e : all) {
        if (e.value > out.best) {
            out.second = out.best;
            out.best = e.value;
            out.pairs = e.pairs;
        } else if (e.value > out.second) {
            out.second = e.value;
        }
    }
    return out;
}

}  // namespace planar::testing
