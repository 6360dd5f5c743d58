#include "planar/clustering.hpp"

#include "planar/voxel_index.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace planar {

void ClusterConfig::validate() const {
    if (!(bandwidth_pos > 0) || !(bandwidth_normal > 0) || !(bandwidth_offset > 0))
        throw std::invalid_argument("cluster config: bandwidths must be positive");
    if (max_iter < 1) throw std::invalid_argument("cluster config: max_iter must be positive");
    if (!(tol > 0)) throw std::invalid_argument("cluster config: tol must be positive");
    if (min_cluster_size < 1) throw std::invalid_argument("cluster config: min_cluster_size must be positive");
}

Feature cluster_feature(const VoxelPrimitive& p, const ClusterConfig& config) {
    Feature f;
    if (config.space == ClusterSpace::shifted_position)
        f.head<3>() = p.shifted() / config.bandwidth_pos;
    else
        f.head<3>() = Vec3(p.offset() / config.bandwidth_offset, 0.0, 0.0);
    f.tail<3>() = p.normal / config.bandwidth_normal;
    return f;
}

std::vector<Vec3> shift_voxels(std::span<const VoxelPrimitive> primitives) {
    std::vector<Vec3> out;
    out.reserve(primitives.size());
    for (const VoxelPrimitive& p : primitives) out.push_back(p.shifted());
    return out;
}

Feature mean_shift_step(std::span<const Feature> points, const Feature& at) {
    Feature sum = Feature::Zero();
    std::size_t n = 0;
    for (const Feature& p : points) {
        if ((p - at).squaredNorm() <= 1.0) {
            sum += p;
            ++n;
        }
    }
    return n ? Feature(sum / static_cast<double>(n)) : at;
}

namespace {

constexpr double kCell = 0.5;  // cell side in normalised units

VoxelKey cell_of(const Feature& f) { return voxel_of(Vec3(f.head<3>()), kCell); }
VoxelKey normal_cell_of(const Feature& f) { return voxel_of(Vec3(f.tail<3>()), kCell); }

// Points bucketed by the spatial part of the feature and, within a cell, by
// the normal part. Each bucket keeps its sum and a tight bounding box so whole
// buckets can be accepted or rejected without visiting their points.
class CellIndex {
public:
    CellIndex(const std::vector<Feature>& points, const std::vector<double>& mass) : points_(points), mass_(mass) {
        std::vector<std::tuple<VoxelKey, VoxelKey, int>> keyed(points.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            keyed[i] = {cell_of(points[i]), normal_cell_of(points[i]), static_cast<int>(i)};
        std::sort(keyed.begin(), keyed.end());
        VoxelKey last_normal;
        for (const auto& [k, nk, i] : keyed) {
            if (keys_.empty() || keys_.back() != k) {
                keys_.push_back(k);
                cells_.emplace_back();
            }
            std::vector<Bucket>& cell = cells_.back();
            if (cell.empty() || last_normal != nk) {
                cell.emplace_back();
                cell.back().lo = cell.back().hi = points[i];
                last_normal = nk;
            }
            Bucket& c = cell.back();
            c.items.push_back(i);
            c.sum += mass[i] * points[i];
            c.mass += mass[i];
            c.lo = c.lo.cwiseMin(points[i]);
            c.hi = c.hi.cwiseMax(points[i]);
        }
        index_ = VoxelIndex(keys_);
    }

    Feature step(const Feature& q) const {
        Feature sum = Feature::Zero();
        double mass = 0.0;
        const VoxelKey lo = voxel_of(Vec3(q.head<3>().array() - 1.0), kCell);
        const VoxelKey hi = voxel_of(Vec3(q.head<3>().array() + 1.0), kCell);
        for (std::int32_t x = lo.x; x <= hi.x; ++x)
            for (std::int32_t y = lo.y; y <= hi.y; ++y)
                for (std::int32_t z = lo.z; z <= hi.z; ++z) {
                    const std::int32_t ci = index_.find({x, y, z});
                    if (ci < 0) continue;
                    for (const Bucket& c : cells_[static_cast<std::size_t>(ci)]) {
                        const Feature below = (c.lo - q).cwiseMax(0.0);
                        const Feature above = (q - c.hi).cwiseMax(0.0);
                        if ((below + above).squaredNorm() > 1.0) continue;
                        const Feature far = (q - c.lo).cwiseAbs().cwiseMax((q - c.hi).cwiseAbs());
                        if (far.squaredNorm() <= 1.0) {
                            sum += c.sum;
                            mass += c.mass;
                            continue;
                        }
                        for (int i : c.items) {
                            if ((points_[i] - q).squaredNorm() <= 1.0) {
                                sum += mass_[i] * points_[i];
                                mass += mass_[i];
                            }
                        }
                    }
                }
        return mass > 0 ? Feature(sum / mass) : q;
    }

private:
    struct Bucket {
        std::vector<int> items;
        Feature sum = Feature::Zero();
        double mass = 0.0;
        Feature lo, hi;
    };
    const std::vector<Feature>& points_;
    const std::vector<double>& mass_;
    std::vector<VoxelKey> keys_;
    std::vector<std::vector<Bucket>> cells_;
    VoxelIndex index_;
};

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent[b] = a;
    }
};

// Single linkage of modes at distance 0.5. Modes are first gathered into
// balls of radius 0.25 around leaders; members of one ball are pairwise within
// 0.5 and so linked. Balls are then linked when any two members are close.
UnionFind link_modes(const std::vector<Feature>& modes) {
    constexpr double kLink = 0.5;
    constexpr double kBall = 0.5 * kLink;
    UnionFind uf(modes.size());
    std::vector<int> leaders;
    std::vector<std::vector<int>> balls;
    std::unordered_map<VoxelKey, std::vector<int>, VoxelKeyHash> by_cell;  // cell -> ball ids
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const VoxelKey c = cell_of(modes[i]);
        int found = -1;
        for (int dx = -1; dx <= 1 && found < 0; ++dx)
            for (int dy = -1; dy <= 1 && found < 0; ++dy)
                for (int dz = -1; dz <= 1 && found < 0; ++dz) {
                    auto it = by_cell.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == by_cell.end()) continue;
                    for (int b : it->second) {
                        if ((modes[leaders[b]] - modes[i]).squaredNorm() <= kBall * kBall) {
                            found = b;
                            break;
                        }
                    }
                }
        if (found < 0) {
            found = static_cast<int>(leaders.size());
            leaders.push_back(static_cast<int>(i));
            balls.emplace_back();
            by_cell[c].push_back(found);
        }
        balls[found].push_back(static_cast<int>(i));
        uf.unite(leaders[found], static_cast<int>(i));
    }

    std::vector<Feature> lo(balls.size()), hi(balls.size());
    for (std::size_t b = 0; b < balls.size(); ++b) {
        lo[b] = hi[b] = modes[balls[b].front()];
        for (int i : balls[b]) {
            lo[b] = lo[b].cwiseMin(modes[i]);
            hi[b] = hi[b].cwiseMax(modes[i]);
        }
    }
    for (std::size_t a = 0; a < balls.size(); ++a) {
        for (std::size_t b = a + 1; b < balls.size(); ++b) {
            if (uf.find(leaders[a]) == uf.find(leaders[b])) continue;
            const Feature gap = (lo[b] - hi[a]).cwiseMax(lo[a] - hi[b]).cwiseMax(0.0);
            if (gap.squaredNorm() > kLink * kLink) continue;
            bool linked = false;
            for (int i : balls[a]) {
                for (int j : balls[b]) {
                    if ((modes[i] - modes[j]).squaredNorm() <= kLink * kLink) {
                        uf.unite(i, j);
                        linked = true;
                        break;
                    }
                }
                if (linked) break;
            }
        }
    }
    return uf;
}

}  // namespace

Clustering mean_shift_cluster(std::span<const VoxelPrimitive> primitives, const ClusterConfig& config) {
    config.validate();
    Clustering out;
    out.labels.assign(primitives.size(), -1);

    std::vector<int> order;
    for (std::size_t i = 0; i < primitives.size(); ++i)
        if (primitives[i].reliable) order.push_back(static_cast<int>(i));
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return primitives[a].voxel < primitives[b].voxel; });
    if (order.empty()) return out;

    // Identical features behave identically, so each distinct one is a single
    // weighted point and a single seed.
    std::map<std::array<double, 6>, int> distinct;
    std::vector<Feature> points;
    std::vector<double> mass;
    std::vector<int> point_of(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Feature f = cluster_feature(primitives[order[k]], config);
        std::array<double, 6> key;
        std::copy(f.data(), f.data() + 6, key.begin());
        auto [it, inserted] = distinct.emplace(key, static_cast<int>(points.size()));
        if (inserted) {
            points.push_back(f);
            mass.push_back(0.0);
        }
        mass[it->second] += 1.0;
        point_of[k] = it->second;
    }

    const CellIndex cells(points, mass);
    std::vector<Feature> modes(points.size());
    for (std::size_t s = 0; s < points.size(); ++s) {
        Feature q = points[s];
        for (int it = 0; it < config.max_iter; ++it) {
            const Feature next = cells.step(q);
            const double moved = (next - q).norm();
            q = next;
            if (moved < config.tol) break;
        }
        modes[s] = q;
    }

    UnionFind uf = link_modes(modes);

    // Group representative: the mode reached by the most primitives.
    std::vector<int> rep(modes.size(), -1);
    std::vector<double> rep_mass(modes.size(), 0.0);
    for (std::size_t s = 0; s < modes.size(); ++s) {
        const int r = uf.find(static_cast<int>(s));
        if (rep[r] < 0 || mass[s] > rep_mass[r]) {
            rep[r] = static_cast<int>(s);
            rep_mass[r] = mass[s];
        }
    }

    std::vector<int> group_of_point(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) group_of_point[i] = uf.find(static_cast<int>(i));
    std::vector<int> group_size(modes.size(), 0);
    for (int p : point_of) ++group_size[group_of_point[p]];

    std::vector<int> cluster_of_root(modes.size(), -1);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const int root = group_of_point[point_of[k]];
        if (group_size[root] < config.min_cluster_size) {
            out.outliers.push_back(order[k]);
            continue;
        }
        if (cluster_of_root[root] < 0) {
            cluster_of_root[root] = static_cast<int>(out.modes.size());
            out.modes.push_back(modes[rep[root]]);
            out.members.emplace_back();
        }
        const int c = cluster_of_root[root];
        out.labels[order[k]] = c;
        out.members[c].push_back(order[k]);
    }
    return out;
}

std::vector<PlaneInstance> form_plane_instances(std::span<const VoxelPrimitive> primitives,
                                                const Clustering& clustering, const ClusterConfig& config,
                                                double voxel_size) {
    std::vector<PlaneInstance> out;
    for (std::size_t c = 0; c < clustering.members.size(); ++c) {
        const std::vector<int>& members = clustering.members[c];
        if (members.empty()) continue;
        PlaneInstance inst;
        inst.normal = (clustering.modes[c].tail<3>() * config.bandwidth_normal).normalized();
        Vec3 centroid = Vec3::Zero();
        Descriptor desc = Descriptor::Zero();
        for (int m : members) {
            centroid += primitives[m].foot();
            desc += primitives[m].descriptor;
            inst.support.push_back(primitives[m].voxel);
        }
        const double n = static_cast<double>(members.size());
        inst.centroid = centroid / n;
        inst.offset = -inst.centroid.dot(inst.normal);
        inst.descriptor = desc / n;
        inst.weight = n;
        inst.voxel_size = voxel_size;
        std::sort(inst.support.begin(), inst.support.end());
        inst.support.erase(std::unique(inst.support.begin(), inst.support.end()), inst.support.end());
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace planar
