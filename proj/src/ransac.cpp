#include "planar/ransac.hpp"

#include "planar/voxel_index.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace planar {

void RansacParams::validate() const {
    if (!(eps_dist > 0) || !(eps_angle > 0)) throw std::invalid_argument("ransac: thresholds must be positive");
    if (min_inliers < 3) throw std::invalid_argument("ransac: min_inliers must be >= 3");
    if (max_planes < 1 || iters_per_plane < 1) throw std::invalid_argument("ransac: counts must be positive");
    if (split_components && !(component_cell > 0)) throw std::invalid_argument("ransac: component cell must be positive");
    if (!(min_width >= 0)) throw std::invalid_argument("ransac: min_width must be >= 0");
}

std::pair<Vec3, double> fit_plane_least_squares(std::span<const Vec3> points, const Vec3& hint) {
    if (points.size() < 3) throw std::invalid_argument("fit_plane_least_squares: need at least 3 points");
    Vec3 mean = Vec3::Zero();
    for (const Vec3& p : points) mean += p;
    mean /= static_cast<double>(points.size());
    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : points) cov.noalias() += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 n = eig.eigenvectors().col(0).normalized();
    if (n.dot(hint) < 0) n = -n;
    return {n, -n.dot(mean)};
}

namespace {

// Standard deviation along the second principal axis of the inliers.
double width(std::span<const OrientedPoint> points, const std::vector<int>& idx) {
    Vec3 mean = Vec3::Zero();
    for (int i : idx) mean += points[i].position;
    mean /= static_cast<double>(idx.size());
    Mat3 cov = Mat3::Zero();
    for (int i : idx) cov.noalias() += (points[i].position - mean) * (points[i].position - mean).transpose();
    const Vec3 ev = Eigen::SelfAdjointEigenSolver<Mat3>(cov, Eigen::EigenvaluesOnly).eigenvalues();
    return std::sqrt(std::max(0.0, ev[1]) / static_cast<double>(idx.size()));
}

// Connected pieces of `idx` under 26-adjacency of lattice cells.
std::vector<std::vector<int>> components(std::span<const OrientedPoint> points, const std::vector<int>& idx,
                                         double cell) {
    std::vector<VoxelKey> keys;
    keys.reserve(idx.size());
    for (int i : idx) keys.push_back(voxel_of(points[i].position, cell));
    std::vector<VoxelKey> cells = keys;
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    const VoxelIndex index(cells);

    std::vector<int> comp(cells.size(), -1);
    int count = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (comp[c] >= 0) continue;
        std::vector<int> stack{static_cast<int>(c)};
        comp[c] = count;
        while (!stack.empty()) {
            const VoxelKey k = cells[stack.back()];
            stack.pop_back();
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dz = -1; dz <= 1; ++dz) {
                        const std::int32_t o = index.find({k.x + dx, k.y + dy, k.z + dz});
                        if (o < 0 || comp[o] >= 0) continue;
                        comp[o] = count;
                        stack.push_back(o);
                    }
        }
        ++count;
    }
    std::vector<std::vector<int>> out(count);
    for (std::size_t i = 0; i < idx.size(); ++i) out[comp[index.find(keys[i])]].push_back(idx[i]);
    return out;
}

}  // namespace

std::vector<RansacPlane> sequential_ransac(std::span<const OrientedPoint> points, const RansacParams& params) {
    params.validate();
    std::vector<RansacPlane> out;
    if (static_cast<int>(points.size()) < params.min_inliers) return out;

    std::mt19937_64 rng(params.seed);
    const double cos_angle = std::cos(params.eps_angle);
    std::vector<int> remaining(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) remaining[i] = static_cast<int>(i);

    auto inliers_of = [&](const Vec3& n, double d, std::vector<int>& into) {
        into.clear();
        for (int i : remaining) {
            const OrientedPoint& p = points[i];
            if (std::abs(n.dot(p.position) + d) <= params.eps_dist && n.dot(p.normal) >= cos_angle) into.push_back(i);
        }
    };

    std::vector<int> best, cand;
    while (static_cast<int>(out.size()) < params.max_planes &&
           static_cast<int>(remaining.size()) >= params.min_inliers) {
        best.clear();
        Vec3 best_n = Vec3::UnitZ();
        std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
        for (int it = 0; it < params.iters_per_plane; ++it) {
            const OrientedPoint& seed = points[remaining[pick(rng)]];
            const Vec3 n = seed.normal.normalized();
            inliers_of(n, -n.dot(seed.position), cand);
            if (cand.size() > best.size() && static_cast<int>(cand.size()) >= params.min_inliers &&
                width(points, cand) >= params.min_width) {
                best.swap(cand);
                best_n = n;
            }
        }
        if (params.split_components && !best.empty()) {
            auto pieces = components(points, best, params.component_cell);
            auto largest = std::max_element(pieces.begin(), pieces.end(),
                                            [](const auto& a, const auto& b) { return a.size() < b.size(); });
            best = std::move(*largest);
        }
        if (static_cast<int>(best.size()) < params.min_inliers) break;

        std::vector<Vec3> pos;
        pos.reserve(best.size());
        for (int i : best) pos.push_back(points[i].position);
        const auto [n, d] = fit_plane_least_squares(pos, best_n);
        std::sort(best.begin(), best.end());
        out.push_back({n, d, best});

        std::vector<int> keep;
        keep.reserve(remaining.size() - best.size());
        std::set_difference(remaining.begin(), remaining.end(), best.begin(), best.end(), std::back_inserter(keep));
        remaining.swap(keep);
    }
    return out;
}

std::vector<PlaneInstance> ransac_instances(std::span<const OrientedPoint> points,
                                            std::span<const RansacPlane> planes, double voxel_size) {
    std::vector<PlaneInstance> out;
    for (const RansacPlane& rp : planes) {
        PlaneInstance p;
        p.normal = rp.normal;
        p.offset = rp.offset;
        p.voxel_size = voxel_size;
        Vec3 sum = Vec3::Zero();
        for (int i : rp.inliers) {
            const Vec3 q = project_to_plane<double>(points[i].position, rp.normal, rp.offset);
            sum += q;
            p.support.push_back(voxel_of(q, voxel_size));
        }
        p.centroid = sum / static_cast<double>(std::max<std::size_t>(1, rp.inliers.size()));
        p.offset = -p.centroid.dot(p.normal);
        std::sort(p.support.begin(), p.support.end());
        p.support.erase(std::unique(p.support.begin(), p.support.end()), p.support.end());
        p.weight = static_cast<double>(rp.inliers.size());
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace planar
