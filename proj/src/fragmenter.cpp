#include "planar/fragmenter.hpp"

#include "planar/voxel_index.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace planar {

void KeyframeParams::validate() const {
    if (!(t_max > 0)) throw std::invalid_argument("keyframes: t_max must be positive");
    if (!(r_max > 0)) throw std::invalid_argument("keyframes: R_max must be positive");
    if (n_k < 2) throw std::invalid_argument("keyframes: N_k must be at least 2");
}

bool is_new_keyframe(const Pose& last, const Pose& frame, double t_max, double r_max) {
    const double translation = (frame.translation - last.translation).norm();
    const double rotation = rotation_angle(last.rotation.transpose() * frame.rotation);
    return translation > t_max || rotation > r_max;
}

KeyframeSelector::KeyframeSelector(KeyframeParams params) : params_(params) { params_.validate(); }

std::optional<Fragment> KeyframeSelector::push(const DepthFrame& frame) {
    if (last_keyframe_ && !is_new_keyframe(*last_keyframe_, frame.pose, params_.t_max, params_.r_max))
        return std::nullopt;
    last_keyframe_ = frame.pose;
    ++keyframes_seen_;
    pending_.push_back(frame);
    if (static_cast<int>(pending_.size()) < params_.n_k) return std::nullopt;
    return flush();
}

std::optional<Fragment> KeyframeSelector::flush() {
    if (pending_.empty()) return std::nullopt;
    Fragment f;
    f.index = next_index_++;
    f.keyframes = std::move(pending_);
    pending_.clear();
    return f;
}

std::vector<Fragment> select_keyframes(std::span<const DepthFrame> stream, double t_max, double r_max, int n_k) {
    KeyframeSelector selector(KeyframeParams{t_max, r_max, n_k});
    std::vector<Fragment> out;
    for (const DepthFrame& f : stream) {
        if (auto frag = selector.push(f)) out.push_back(std::move(*frag));
    }
    if (auto frag = selector.flush()) out.push_back(std::move(*frag));
    return out;
}

BoundingCube fragment_bounds(const Fragment& fragment, double d_min, double d_max) {
    if (fragment.keyframes.empty()) throw std::invalid_argument("fragment_bounds: empty fragment");
    if (!(d_min > 0 && d_min < d_max)) throw std::invalid_argument("fragment_bounds: need 0 < d_min < d_max");

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const DepthFrame& f : fragment.keyframes) {
        const CameraIntrinsics& k = f.intrinsics;
        // Frustum corners run through the outer pixel edges.
        for (double u : {-0.5, k.width - 0.5}) {
            for (double v : {-0.5, k.height - 0.5}) {
                for (double z : {d_min, d_max}) {
                    const Vec3 p = back_project(k, f.pose, u, v, z);
                    lo = lo.cwiseMin(p);
                    hi = hi.cwiseMax(p);
                }
            }
        }
    }
    const double side = (hi - lo).maxCoeff();
    const Vec3 center = 0.5 * (lo + hi);
    return {center - Vec3::Constant(0.5 * side), side};
}

namespace {

// Marks voxels touched by the truncation band of every depth ray.
std::vector<VoxelKey> allocate_band(const Fragment& fragment, const BoundingCube& bounds, const FusionParams& p) {
    const double v = p.voxel_size;
    const double lambda = p.truncation;
    const VoxelKey lo = voxel_of(bounds.origin, v);
    const VoxelKey hi = voxel_of(bounds.origin + Vec3::Constant(bounds.side), v);
    const std::int64_t dx = std::int64_t{hi.x} - lo.x + 1;
    const std::int64_t dy = std::int64_t{hi.y} - lo.y + 1;
    const std::int64_t dz = std::int64_t{hi.z} - lo.z + 1;
    const double cells = static_cast<double>(dx) * static_cast<double>(dy) * static_cast<double>(dz);
    const bool dense = cells <= double(1ull << 28);

    std::vector<std::uint64_t> bits;
    std::unordered_set<VoxelKey, VoxelKeyHash> sparse;
    if (dense) bits.assign(static_cast<std::size_t>((dx * dy * dz + 63) / 64), 0);

    const double step = 0.5 * v;
    for (const DepthFrame& f : fragment.keyframes) {
        const CameraIntrinsics& k = f.intrinsics;
        const Vec3& c = f.pose.translation;
        for (int row = 0; row < f.depth.rows(); ++row) {
            for (int col = 0; col < f.depth.cols(); ++col) {
                const double z = f.depth(row, col);
                if (!(z > 0.0) || z > p.max_depth) continue;
                const Vec3 q = back_project(k, f.pose, col, row, z);
                const Vec3 dir = (q - c).normalized();
                for (double t = -lambda; t <= lambda + 1e-12; t += step) {
                    const Vec3 s = q + t * dir;
                    const VoxelKey key = voxel_of(s, v);
                    if (!bounds.contains(voxel_center(key, v))) continue;
                    if (dense) {
                        const std::uint64_t idx =
                            static_cast<std::uint64_t>(((key.x - lo.x) * dy + (key.y - lo.y)) * dz + (key.z - lo.z));
                        bits[idx >> 6] |= (std::uint64_t{1} << (idx & 63));
                    } else {
                        sparse.insert(key);
                    }
                }
            }
        }
    }

    std::vector<VoxelKey> keys;
    if (dense) {
        for (std::size_t w = 0; w < bits.size(); ++w) {
            std::uint64_t word = bits[w];
            while (word) {
                const int b = __builtin_ctzll(word);
                word &= word - 1;
                const std::int64_t idx = static_cast<std::int64_t>(w * 64 + static_cast<std::size_t>(b));
                const std::int64_t x = idx / (dy * dz);
                const std::int64_t rem = idx % (dy * dz);
                keys.push_back({static_cast<std::int32_t>(lo.x + x), static_cast<std::int32_t>(lo.y + rem / dz),
                                static_cast<std::int32_t>(lo.z + rem % dz)});
            }
        }
    } else {
        keys.assign(sparse.begin(), sparse.end());
        std::sort(keys.begin(), keys.end());
    }
    return keys;
}

}  // namespace

FusedSurface fuse_depth(const Fragment& fragment, const BoundingCube& bounds, const FusionParams& p) {
    if (!(p.voxel_size > 0)) throw std::invalid_argument("fuse_depth: voxel size must be positive");
    if (!(p.truncation >= p.voxel_size)) throw std::invalid_argument("fuse_depth: truncation must be >= voxel size");

    FusedSurface s;
    s.voxel_size = p.voxel_size;
    s.truncation = p.truncation;
    s.bounds = bounds;
    for (const DepthFrame& f : fragment.keyframes) s.views.push_back({f.intrinsics, f.pose});

    const double v = p.voxel_size;
    const double lambda = p.truncation;
    const std::vector<VoxelKey> keys = allocate_band(fragment, bounds, p);

    s.voxels.reserve(keys.size());
    for (const VoxelKey& key : keys) {
        const Vec3 x = voxel_center(key, v);
        TsdfVoxel vox{key, 0.0, 0.0};
        for (const DepthFrame& f : fragment.keyframes) {
            const Vec3 pc = f.pose.to_camera(x);
            if (pc.z() <= 0.0) continue;
            const CameraIntrinsics& k = f.intrinsics;
            const long u = std::lround(k.fx * pc.x() / pc.z() + k.cx);
            const long r = std::lround(k.fy * pc.y() / pc.z() + k.cy);
            if (u < 0 || r < 0 || u >= f.depth.cols() || r >= f.depth.rows()) continue;
            const double depth = f.depth(r, u);
            if (!(depth > 0.0) || depth > p.max_depth) continue;
            const double sdf = depth - pc.z();
            if (sdf < -lambda) continue;  // occluded
            const double obs = std::min(sdf, lambda);
            vox.tsdf = (vox.tsdf * vox.weight + obs) / (vox.weight + 1.0);
            vox.weight += 1.0;
        }
        if (vox.weight > 0.0) s.voxels.push_back(vox);
    }

    std::vector<VoxelKey> kept(s.voxels.size());
    for (std::size_t i = 0; i < s.voxels.size(); ++i) kept[i] = s.voxels[i].key;
    const VoxelIndex index(kept);

    auto unclamped = [&](const VoxelKey& k, double& out) {
        const std::int32_t i = index.find(k);
        if (i < 0) return false;
        const TsdfVoxel& n = s.voxels[static_cast<std::size_t>(i)];
        if (!(std::abs(n.tsdf) < lambda)) return false;
        out = n.tsdf;
        return true;
    };

    for (const TsdfVoxel& vox : s.voxels) {
        if (!(std::abs(vox.tsdf) < lambda)) continue;
        Vec3 g = Vec3::Zero();
        bool ok = true;
        for (int a = 0; a < 3 && ok; ++a) {
            VoxelKey kp = vox.key, km = vox.key;
            (a == 0 ? kp.x : a == 1 ? kp.y : kp.z) += 1;
            (a == 0 ? km.x : a == 1 ? km.y : km.z) -= 1;
            double tp = 0, tm = 0;
            const bool hp = unclamped(kp, tp);
            const bool hm = unclamped(km, tm);
            if (hp && hm)
                g[a] = (tp - tm) / (2 * v);
            else if (hp)
                g[a] = (tp - vox.tsdf) / v;
            else if (hm)
                g[a] = (vox.tsdf - tm) / v;
            else
                ok = false;
        }
        const double g2 = g.squaredNorm();
        if (!ok || g2 < 1e-12) continue;
        if (std::abs(vox.tsdf) / std::sqrt(g2) > lambda) continue;
        const Vec3 x = voxel_center(vox.key, v);
        s.samples.push_back({vox.key, x - (vox.tsdf / g2) * g, g / std::sqrt(g2), vox.tsdf, vox.weight});
    }
    return s;
}

bool SparseVoxelGrid::contains(const VoxelKey& k) const { return std::binary_search(keys.begin(), keys.end(), k); }

double occupancy_score(const TsdfVoxel& v, double truncation, double full_weight) {
    const double proximity = 1.0 - std::abs(v.tsdf) / truncation;
    const double confidence = std::min(1.0, v.weight / full_weight);
    return std::clamp(proximity * confidence, 0.0, 1.0);
}

std::array<SparseVoxelGrid, 3> build_grid_hierarchy(const FusedSurface& surface, double theta, double full_weight) {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("build_grid_hierarchy: theta must be in (0,1)");

    std::array<SparseVoxelGrid, 3> grids;
    for (int level = 0; level < 3; ++level) {
        grids[level].level = level;
        grids[level].voxel_size = surface.voxel_size * static_cast<double>(1 << (2 - level));
        grids[level].bounds = surface.bounds;
    }

    std::vector<std::pair<VoxelKey, double>> cur;
    for (const TsdfVoxel& v : surface.voxels) {
        if (!(std::abs(v.tsdf) < surface.truncation) || !(v.weight > 0.0)) continue;
        cur.emplace_back(v.key, occupancy_score(v, surface.truncation, full_weight));
    }

    for (int level = 2; level >= 0; --level) {
        SparseVoxelGrid& g = grids[level];
        for (const auto& [k, score] : cur) {
            if (score < theta) continue;
            g.keys.push_back(k);
            g.scores.push_back(score);
        }
        if (level == 0) break;
        std::vector<std::pair<VoxelKey, double>> up;
        up.reserve(cur.size() / 4 + 1);
        for (const auto& [k, score] : cur) up.emplace_back(parent_of(k), score);
        std::sort(up.begin(), up.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        cur.clear();
        for (const auto& [k, score] : up) {
            if (!cur.empty() && cur.back().first == k)
                cur.back().second = std::max(cur.back().second, score);
            else
                cur.emplace_back(k, score);
        }
    }
    return grids;
}

}  // namespace planar
