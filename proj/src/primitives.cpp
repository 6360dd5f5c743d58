#include "planar/primitives.hpp"

#include "planar/voxel_index.hpp"

#include <algorithm>
#include <numeric>

namespace planar {

VoxelPrimitive make_primitive(const VoxelKey& voxel, const Vec3& center, const Vec3& normal, double distance,
                              const Vec3& displacement, const AnchorSet<double>& anchors, const BoundingCube& cube) {
    VoxelPrimitive p;
    p.voxel = voxel;
    p.center = center;
    p.normal = normal;
    p.distance = distance;
    p.displacement = displacement;
    const AnchorCode<double> code = classify_anchor<double>(normal, anchors);
    p.anchor = code.index;
    p.residual = code.residual;

    const double diag = cube.diagonal() > 0 ? cube.diagonal() : 1.0;
    const double side = cube.side > 0 ? cube.side : 1.0;
    p.descriptor.head<3>() = normal;
    p.descriptor[3] = p.offset() / diag;
    p.descriptor.tail<3>() = (p.shifted() - cube.origin) / side;
    return p;
}

std::vector<VoxelPrimitive> estimate_primitives_oracle(const SparseVoxelGrid& grid, const SyntheticScene& scene,
                                                       double truncation, const AnchorSet<double>& anchors) {
    std::vector<const ScenePlane*> planes;
    for (const ScenePlane& p : scene.planes) planes.push_back(&p);
    std::sort(planes.begin(), planes.end(), [](const ScenePlane* a, const ScenePlane* b) { return a->id < b->id; });
    std::vector<PolygonDistance> dist;
    dist.reserve(planes.size());
    for (const ScenePlane* p : planes) dist.emplace_back(*p);

    std::vector<int> owner(grid.size(), -1);
    std::vector<Vec3> sum(planes.size(), Vec3::Zero());
    std::vector<std::size_t> count(planes.size(), 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec3 x = grid.center(i);
        double best = 2.0 * truncation;
        for (std::size_t j = 0; j < planes.size(); ++j) {
            const double d = dist[j](x);
            if (d < best || (d == best && owner[i] < 0)) {
                best = d;
                owner[i] = static_cast<int>(j);
            }
        }
        if (owner[i] >= 0) {
            sum[owner[i]] += x;
            ++count[owner[i]];
        }
    }

    std::vector<VoxelPrimitive> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (owner[i] < 0) continue;
        const ScenePlane& plane = *planes[owner[i]];
        const Vec3 x = grid.center(i);
        const Vec3 centroid = sum[owner[i]] / static_cast<double>(count[owner[i]]);
        const double distance = -plane_distance<double>(x, plane.normal, plane.offset);
        out.push_back(make_primitive(grid.keys[i], x, plane.normal, distance, centroid - x, anchors, grid.bounds));
    }
    return out;
}

void GeometricParams::validate(double voxel_size) const {
    if (!(radius >= 2.0 * voxel_size)) throw std::invalid_argument("geometric estimator: radius must be >= 2 voxels");
    if (vote_iters < 1) throw std::invalid_argument("geometric estimator: vote_iters must be >= 1");
    if (min_neighbors < 3) throw std::invalid_argument("geometric estimator: min_neighbors must be >= 3");
}

namespace {

struct LocalPlane {
    Vec3 normal;
    Vec3 mean;
    double variation = 0.0;
    double spread = 0.0;   // middle / largest eigenvalue
    int support = 0;
};

// Lattice offsets whose centres lie within `radius` of the origin cell's centre.
std::vector<VoxelKey> ball_offsets(double radius, double voxel) {
    const int reach = static_cast<int>(std::ceil(radius / voxel));
    const double r2 = radius * radius;
    std::vector<VoxelKey> out;
    for (int dx = -reach; dx <= reach; ++dx)
        for (int dy = -reach; dy <= reach; ++dy)
            for (int dz = -reach; dz <= reach; ++dz) {
                if (static_cast<double>(dx * dx + dy * dy + dz * dz) * voxel * voxel <= r2) out.push_back({dx, dy, dz});
            }
    return out;
}

// First and second moments of points given relative to some centre.
struct Moments {
    int n = 0;
    Vec3 sum = Vec3::Zero();
    Mat3 outer = Mat3::Zero();

    void add(const Vec3& q) {
        ++n;
        sum += q;
        outer.noalias() += q * q.transpose();
    }
};

// Plane of the points; `mean` is relative to the moments' centre.
LocalPlane fit_plane(const Moments& m) {
    LocalPlane lp;
    lp.support = m.n;
    lp.mean = m.sum / static_cast<double>(m.n);
    const Mat3 cov = m.outer / static_cast<double>(m.n) - lp.mean * lp.mean.transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig;
    eig.computeDirect(cov);
    lp.normal = eig.eigenvectors().col(0).normalized();
    const double trace = eig.eigenvalues().sum();
    lp.variation = trace > 0 ? std::max(0.0, eig.eigenvalues()[0]) / trace : 0.0;
    lp.spread = eig.eigenvalues()[2] > 0 ? std::max(0.0, eig.eigenvalues()[1]) / eig.eigenvalues()[2] : 0.0;
    return lp;
}

}  // namespace

std::vector<VoxelPrimitive> estimate_primitives_geometric(const SparseVoxelGrid& grid, const FusedSurface& surface,
                                                          const GeometricParams& params,
                                                          const AnchorSet<double>& anchors) {
    const double v = grid.voxel_size;
    params.validate(v);

    // Samples bucketed in cells of side radius / 2, stored contiguously per cell.
    const double cell = 0.5 * params.radius;
    std::vector<std::pair<VoxelKey, int>> keyed(surface.samples.size());
    for (std::size_t i = 0; i < surface.samples.size(); ++i)
        keyed[i] = {voxel_of(surface.samples[i].position, cell), static_cast<int>(i)};
    std::sort(keyed.begin(), keyed.end());
    std::vector<VoxelKey> bucket_keys;
    std::vector<int> bucket_begin;
    std::vector<Vec3> sample_pos(keyed.size()), sample_nrm(keyed.size());
    for (std::size_t j = 0; j < keyed.size(); ++j) {
        if (bucket_keys.empty() || bucket_keys.back() != keyed[j].first) {
            bucket_keys.push_back(keyed[j].first);
            bucket_begin.push_back(static_cast<int>(j));
        }
        sample_pos[j] = surface.samples[keyed[j].second].position;
        sample_nrm[j] = surface.samples[keyed[j].second].normal;
    }
    bucket_begin.push_back(static_cast<int>(keyed.size()));
    const VoxelIndex bucket_index(bucket_keys);
    // Buckets that can hold a point within `radius` of any point of the centre bucket.
    std::vector<VoxelKey> bucket_offsets;
    for (int dx = -2; dx <= 2; ++dx)
        for (int dy = -2; dy <= 2; ++dy)
            for (int dz = -2; dz <= 2; ++dz) {
                int gap2 = 0;
                for (int d : {dx, dy, dz}) gap2 += std::max(0, std::abs(d) - 1) * std::max(0, std::abs(d) - 1);
                if (gap2 * 0.25 <= 1.0) bucket_offsets.push_back({dx, dy, dz});
            }
    const double r2 = params.radius * params.radius;

    const std::size_t n = grid.size();
    std::vector<Vec3> normals(n, Vec3::UnitZ());
    std::vector<double> distances(n, 0.0);
    std::vector<double> variation(n, 0.0);
    std::vector<char> reliable(n, 0);

    std::vector<Vec3> pts;   // relative to the voxel centre
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = grid.center(i);
        const VoxelKey c = voxel_of(x, cell);
        pts.clear();
        Moments all;
        Vec3 fused_sum = Vec3::Zero();
        for (const VoxelKey& o : bucket_offsets) {
            const std::int32_t b = bucket_index.find({c.x + o.x, c.y + o.y, c.z + o.z});
            if (b < 0) continue;
            for (int j = bucket_begin[b]; j < bucket_begin[b + 1]; ++j) {
                const Vec3 q = sample_pos[j] - x;
                if (q.squaredNorm() > r2) continue;
                pts.push_back(q);
                all.add(q);
                fused_sum += sample_nrm[j];
            }
        }
        if (static_cast<int>(pts.size()) < params.min_neighbors) continue;

        LocalPlane lp = fit_plane(all);
        // One trimming pass drops samples from other surfaces near edges.
        Moments kept;
        for (const Vec3& q : pts)
            if (std::abs((q - lp.mean).dot(lp.normal)) <= 0.5 * v) kept.add(q);
        // Most of the neighbourhood must lie on one plane; creases keep less.
        if (2 * kept.n < all.n || kept.n < params.min_neighbors) continue;
        if (kept.n < all.n) lp = fit_plane(kept);
        if (lp.variation > params.max_surface_variation) continue;
        // A thin strip, e.g. what trimming leaves along a crease, fixes no plane.
        if (lp.spread < params.min_spread) continue;

        Vec3 nrm = lp.normal;
        int votes = 0;
        for (const CameraView& view : surface.views) {
            const Vec3 pc = view.pose.to_camera(x);
            if (pc.z() <= 0) continue;
            const double u = view.intrinsics.fx * pc.x() / pc.z() + view.intrinsics.cx;
            const double r = view.intrinsics.fy * pc.y() / pc.z() + view.intrinsics.cy;
            if (u < -0.5 || r < -0.5 || u > view.intrinsics.width - 0.5 || r > view.intrinsics.height - 0.5) continue;
            votes += nrm.dot(view.pose.translation - x) > 0 ? 1 : -1;
        }
        if (votes == 0) votes = nrm.dot(fused_sum) >= 0 ? 1 : -1;
        if (votes < 0) nrm = -nrm;

        normals[i] = nrm;
        distances[i] = lp.mean.dot(nrm);
        variation[i] = lp.variation;
        reliable[i] = 1;
    }

    // Region growing over reliable voxels. A voxel joins a region when it lies
    // within `radius` of a member and agrees with the region's plane, so
    // regions cannot chain around corners. Later passes regrow every region
    // from its seed with the plane refit to the previous pass's members.
    std::vector<int> ids;
    for (std::size_t i = 0; i < n; ++i)
        if (reliable[i]) ids.push_back(static_cast<int>(i));
    const std::size_t m = ids.size();
    std::vector<VoxelKey> node_keys(m);
    std::vector<Vec3> center(m), foot(m), nrm(m);
    for (std::size_t a = 0; a < m; ++a) {
        const std::size_t i = static_cast<std::size_t>(ids[a]);
        node_keys[a] = grid.keys[i];
        center[a] = grid.center(i);
        nrm[a] = normals[i];
        foot[a] = center[a] + distances[i] * nrm[a];
    }
    // Neighbours within `radius`, centre to centre, as a CSR list.
    std::vector<int> adj_begin(m + 1, 0), adj;
    {
        const VoxelIndex node_index(node_keys);
        const std::vector<VoxelKey> offsets = ball_offsets(params.radius, v);
        for (std::size_t a = 0; a < m; ++a) {
            const VoxelKey& k = node_keys[a];
            for (const VoxelKey& o : offsets) {
                if (o.x == 0 && o.y == 0 && o.z == 0) continue;
                const std::int32_t b = node_index.find({k.x + o.x, k.y + o.y, k.z + o.z});
                if (b >= 0) adj.push_back(b);
            }
            adj_begin[a + 1] = static_cast<int>(adj.size());
        }
    }
    const double cos_gate = std::cos(params.normal_gate);
    const double offset_gate = params.offset_gate_voxels * v;

    struct Region {
        int seed = 0;
        Vec3 normal = Vec3::UnitZ();
        Vec3 point = Vec3::Zero();
        std::vector<int> members;
    };
    auto fits = [&](const Region& r, int b) {
        return nrm[b].dot(r.normal) >= cos_gate && std::abs((foot[b] - r.point).dot(r.normal)) <= offset_gate;
    };
    auto refit = [&](Region& r) {
        Vec3 ns = Vec3::Zero(), ps = Vec3::Zero();
        for (int b : r.members) {
            ns += nrm[b];
            ps += foot[b];
        }
        r.normal = ns.normalized();
        r.point = ps / static_cast<double>(r.members.size());
    };

    std::vector<int> seeds(m);
    std::iota(seeds.begin(), seeds.end(), 0);
    std::stable_sort(seeds.begin(), seeds.end(),
                     [&](int a, int b) { return variation[ids[a]] < variation[ids[b]]; });

    std::vector<int> region_of(m, -1);
    std::vector<Region> regions;
    for (int pass = 0; pass < params.vote_iters; ++pass) {
        std::vector<Region> previous = std::move(regions);
        regions.clear();
        std::fill(region_of.begin(), region_of.end(), -1);
        std::vector<Region> order;
        if (pass == 0) {
            for (int s : seeds) order.push_back({s, nrm[s], foot[s], {}});
        } else {
            std::stable_sort(previous.begin(), previous.end(),
                             [](const Region& a, const Region& b) { return a.members.size() > b.members.size(); });
            for (Region& r : previous) order.push_back({r.seed, r.normal, r.point, {}});
        }
        for (Region& r : order) {
            if (region_of[r.seed] >= 0) continue;
            const int id = static_cast<int>(regions.size());
            r.members = {r.seed};
            region_of[r.seed] = id;
            std::size_t next_refit = 8;
            for (std::size_t head = 0; head < r.members.size(); ++head) {
                const int a = r.members[head];
                for (int e = adj_begin[a]; e < adj_begin[a + 1]; ++e) {
                    const int b = adj[e];
                    if (region_of[b] >= 0 || !fits(r, b)) continue;
                    region_of[b] = id;
                    r.members.push_back(b);
                }
                // First pass: track the plane as the region grows.
                if (pass == 0 && r.members.size() >= next_refit) {
                    refit(r);
                    next_refit = r.members.size() * 3 / 2;
                }
            }
            refit(r);
            regions.push_back(std::move(r));
        }
        // Voxels no region accepted (only possible in later passes) start their own.
        for (int s : seeds) {
            if (region_of[s] >= 0) continue;
            region_of[s] = static_cast<int>(regions.size());
            regions.push_back({s, nrm[s], foot[s], {s}});
        }
    }

    std::vector<Vec3> target(m);
    for (const Region& r : regions) {
        Vec3 sum = Vec3::Zero();
        for (int b : r.members) sum += center[b];
        const Vec3 centroid = sum / static_cast<double>(r.members.size());
        for (int b : r.members) target[b] = centroid;
    }
    std::vector<VoxelPrimitive> out;
    out.reserve(n);
    std::size_t a = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = grid.center(i);
        if (reliable[i]) {
            out.push_back(make_primitive(grid.keys[i], x, normals[i], distances[i], target[a] - x, anchors, grid.bounds));
            ++a;
        } else {
            VoxelPrimitive p = make_primitive(grid.keys[i], x, normals[i], 0.0, Vec3::Zero(), anchors, grid.bounds);
            p.reliable = false;
            out.push_back(p);
        }
    }
    return out;
}

void zero_votes(std::vector<VoxelPrimitive>& primitives, const BoundingCube& cube) {
    const double side = cube.side > 0 ? cube.side : 1.0;
    for (VoxelPrimitive& p : primitives) {
        p.displacement.setZero();
        p.descriptor.tail<3>() = (p.center - cube.origin) / side;
    }
}

}  // namespace planar
