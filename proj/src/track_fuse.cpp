#include "planar/track_fuse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace planar {

namespace {

struct ContextStats {
    Vec3 mean = Vec3::Zero();
    double scale = 1.0;
    double log_mean = 0.0;
    double log_std = 1.0;
};

double log_support(const PlaneInstance& p) { return std::log(std::max<double>(1.0, static_cast<double>(p.support.size()))); }

ContextStats context_stats(std::span<const PlaneInstance> context) {
    if (context.empty()) throw std::invalid_argument("plane_feature: empty context");
    ContextStats s;
    const double n = static_cast<double>(context.size());
    for (const PlaneInstance& p : context) {
        s.mean += p.centroid;
        s.log_mean += log_support(p);
    }
    s.mean /= n;
    s.log_mean /= n;
    if (context.size() < 2) return s;
    double spread = 0.0, log_var = 0.0;
    for (const PlaneInstance& p : context) {
        spread += (p.centroid - s.mean).squaredNorm();
        log_var += std::pow(log_support(p) - s.log_mean, 2);
    }
    spread = std::sqrt(spread / n);
    log_var = std::sqrt(log_var / n);
    if (spread > 1e-9) s.scale = spread;
    if (log_var > 1e-9) s.log_std = log_var;
    return s;
}

PlaneFeature feature_with(const PlaneInstance& p, const ContextStats& s) {
    PlaneFeature h;
    h.head<3>() = p.normal;
    h[3] = (p.offset + p.normal.dot(s.mean)) / s.scale;
    h.segment<3>(4) = (p.centroid - s.mean) / s.scale;
    h[7] = (log_support(p) - s.log_mean) / s.log_std;
    const double norm = h.norm();
    return norm > 0 ? PlaneFeature(h / norm) : h;
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

PlaneFeature plane_feature(const PlaneInstance& instance, std::span<const PlaneInstance> context) {
    return feature_with(instance, context_stats(context));
}

std::vector<PlaneFeature> plane_features(std::span<const PlaneInstance> instances,
                                         std::span<const PlaneInstance> context) {
    const ContextStats s = context_stats(context);
    std::vector<PlaneFeature> out;
    out.reserve(instances.size());
    for (const PlaneInstance& p : instances) out.push_back(feature_with(p, s));
    return out;
}

Eigen::MatrixXd similarity_matrix(std::span<const PlaneFeature> global, std::span<const PlaneFeature> fresh) {
    Eigen::MatrixXd s(global.size(), fresh.size());
    for (std::size_t m = 0; m < global.size(); ++m)
        for (std::size_t n = 0; n < fresh.size(); ++n) s(m, n) = global[m].dot(fresh[n]);
    return s;
}

double free_run_length(const Vec3& a, const Vec3& b, std::span<const DepthFrame> frames, double margin,
                       double step) {
    const double length = (b - a).norm();
    const int n = std::max(1, static_cast<int>(std::ceil(length / step)));
    const double spacing = length / n;
    // Samples no frame observes neither extend nor break a run.
    int run = 0, best = 0;
    for (int i = 0; i <= n; ++i) {
        const Vec3 q = a + (b - a) * (static_cast<double>(i) / n);
        int free = 0, surface = 0;
        for (const DepthFrame& f : frames) {
            const Vec3 pc = f.pose.to_camera(q);
            if (pc.z() <= 0) continue;
            const long u = std::lround(f.intrinsics.fx * pc.x() / pc.z() + f.intrinsics.cx);
            const long r = std::lround(f.intrinsics.fy * pc.y() / pc.z() + f.intrinsics.cy);
            if (u < 0 || r < 0 || u >= f.depth.cols() || r >= f.depth.rows()) continue;
            const double depth = f.depth(r, u);
            if (!(depth > 0)) continue;
            if (depth > pc.z() + margin)
                ++free;
            else if (depth >= pc.z() - margin)
                ++surface;
        }
        if (free > surface)
            ++run;
        else if (surface > 0 || free > 0)
            run = 0;
        best = std::max(best, run);
    }
    return best * spacing;
}

bool planes_compatible(const PlaneInstance& a, const PlaneInstance& b, const MatchGate& gate,
                       std::span<const DepthFrame> frames) {
    if (!gate.enabled) return true;
    if (a.normal.dot(b.normal) < std::cos(gate.max_angle)) return false;
    if (std::abs(plane_distance<double>(b.centroid, a.normal, a.offset)) > gate.max_offset) return false;
    if (std::abs(plane_distance<double>(a.centroid, b.normal, b.offset)) > gate.max_offset) return false;
    if (frames.empty()) return true;
    const Vec3 pa = project_to_plane<double>(a.centroid, a.normal, a.offset);
    const Vec3 pb = project_to_plane<double>(b.centroid, a.normal, a.offset);
    return free_run_length(pa, pb, frames, gate.free_margin, gate.step) < gate.free_gap;
}

Eigen::MatrixXd gate_scores(const Eigen::MatrixXd& scores, std::span<const PlaneInstance> global,
                            std::span<const PlaneInstance> fresh, const MatchGate& gate,
                            std::span<const DepthFrame> frames) {
    Eigen::MatrixXd out = scores;
    for (Eigen::Index m = 0; m < out.rows(); ++m)
        for (Eigen::Index n = 0; n < out.cols(); ++n)
            if (!planes_compatible(global[m], fresh[n], gate, frames)) out(m, n) = -1.0;
    return out;
}

void SinkhornParams::validate() const {
    if (n_iters < 1) throw std::invalid_argument("sinkhorn: n_iters must be >= 1");
    if (!(epsilon > 0)) throw std::invalid_argument("sinkhorn: epsilon must be positive");
}

SinkhornResult sinkhorn(const Eigen::MatrixXd& scores, const SinkhornParams& params) {
    params.validate();
    const Eigen::Index m = scores.rows(), n = scores.cols();
    SinkhornResult r;
    if (m == 0 || n == 0) {
        r.transport = Eigen::MatrixXd::Zero(m + 1, n + 1);
        return r;
    }
    Eigen::MatrixXd z(m + 1, n + 1);
    z.topLeftCorner(m, n) = (params.maximize ? scores : Eigen::MatrixXd(-scores)) / params.epsilon;
    z.row(m).setConstant(params.dustbin / params.epsilon);
    z.col(n).setConstant(params.dustbin / params.epsilon);

    Eigen::VectorXd log_mu = Eigen::VectorXd::Zero(m + 1), log_nu = Eigen::VectorXd::Zero(n + 1);
    log_mu[m] = std::log(static_cast<double>(n));
    log_nu[n] = std::log(static_cast<double>(m));
    const Eigen::VectorXd mu = log_mu.array().exp(), nu = log_nu.array().exp();
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m + 1), v = Eigen::VectorXd::Zero(n + 1), g(n + 1);

    // Dual objective in the column potentials once the rows are balanced;
    // its gradient is the column marginal error.
    auto dual = [&](const Eigen::VectorXd& w) {
        double f = -nu.dot(w);
        for (Eigen::Index i = 0; i <= m; ++i) f += mu[i] * log_sum_exp(z.row(i).transpose() + w);
        return f;
    };

    // Each iteration balances the rows, then moves the column potentials by
    // a Newton step on the dual when that beats the plain Sinkhorn column
    // update, and by the column update otherwise. Both share the fixed point.
    for (int it = 0; it < params.n_iters; ++it) {
        for (Eigen::Index i = 0; i <= m; ++i) u[i] = log_mu[i] - log_sum_exp(z.row(i).transpose() + v);
        const Eigen::MatrixXd p = ((z.colwise() + u).rowwise() + v.transpose()).array().exp();
        const Eigen::VectorXd cols = p.colwise().sum().transpose();
        const Eigen::VectorXd grad = cols - nu;
        r.iterations = it + 1;
        r.residual = grad.cwiseAbs().maxCoeff();
        if (r.residual < 1e-9 || it + 1 == params.n_iters) break;

        for (Eigen::Index j = 0; j <= n; ++j) g[j] = log_nu[j] - log_sum_exp(z.col(j) + u);
        const double target = dual(g), tol = 1e-14 * (1.0 + std::abs(target));
        // Hessian of the dual; the dustbin column's potential is held fixed.
        Eigen::MatrixXd h = Eigen::MatrixXd(cols.asDiagonal()) - p.transpose() * mu.cwiseInverse().asDiagonal() * p;
        Eigen::MatrixXd hr = h.topLeftCorner(n, n);
        hr.diagonal().array() += 1e-12 * hr.diagonal().maxCoeff();
        Eigen::VectorXd step = Eigen::VectorXd::Zero(n + 1);
        step.head(n) = -hr.ldlt().solve(grad.head(n));
        Eigen::VectorXd next = g;
        if (step.allFinite())
            for (double t = 1.0; t > 1e-6; t *= 0.5) {
                const Eigen::VectorXd w = v + t * step;
                if (dual(w) <= target + tol) {
                    next = w;
                    break;
                }
            }
        v = next;
    }
    r.transport = (z.colwise() + u).rowwise() + v.transpose();
    r.transport = r.transport.array().exp();
    return r;
}

MatchResult sinkhorn_match(const Eigen::MatrixXd& scores, const SinkhornParams& params) {
    MatchResult out;
    out.scores = scores;
    const Eigen::Index m = scores.rows(), n = scores.cols();
    std::vector<char> gm(m, 0), nm(n, 0);
    if (m > 0 && n > 0) {
        const SinkhornResult r = sinkhorn(scores, params);
        const Eigen::MatrixXd& p = r.transport;
        for (Eigen::Index i = 0; i < m; ++i) {
            Eigen::Index j = 0;
            p.row(i).maxCoeff(&j);  // first maximum on ties
            if (j == n) continue;
            Eigen::Index back = 0;
            p.col(j).maxCoeff(&back);
            if (back != i || !(p(i, j) > params.accept)) continue;
            out.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
            gm[i] = nm[j] = 1;
        }
    }
    for (Eigen::Index i = 0; i < m; ++i)
        if (!gm[i]) out.unmatched_global.push_back(static_cast<int>(i));
    for (Eigen::Index j = 0; j < n; ++j)
        if (!nm[j]) out.unmatched_new.push_back(static_cast<int>(j));
    return out;
}

double support_iou(std::span<const VoxelKey> a, std::span<const VoxelKey> b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t i = 0, j = 0, common = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j])
            ++i;
        else if (b[j] < a[i])
            ++j;
        else {
            ++common;
            ++i;
            ++j;
        }
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

MatchResult iou_match(std::span<const std::vector<VoxelKey>> global, std::span<const std::vector<VoxelKey>> fresh,
                      double iou_threshold) {
    MatchResult out;
    out.scores = Eigen::MatrixXd::Zero(global.size(), fresh.size());
    struct Cand {
        double iou;
        int g, n;
    };
    std::vector<Cand> cands;
    for (std::size_t g = 0; g < global.size(); ++g)
        for (std::size_t n = 0; n < fresh.size(); ++n) {
            const double iou = support_iou(global[g], fresh[n]);
            out.scores(g, n) = iou;
            if (iou >= iou_threshold && iou > 0) cands.push_back({iou, static_cast<int>(g), static_cast<int>(n)});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.g != b.g) return a.g < b.g;
        return a.n < b.n;
    });
    std::vector<char> gm(global.size(), 0), nm(fresh.size(), 0);
    for (const Cand& c : cands) {
        if (gm[c.g] || nm[c.n]) continue;
        gm[c.g] = nm[c.n] = 1;
        out.pairs.emplace_back(c.g, c.n);
    }
    std::sort(out.pairs.begin(), out.pairs.end());
    for (std::size_t g = 0; g < global.size(); ++g)
        if (!gm[g]) out.unmatched_global.push_back(static_cast<int>(g));
    for (std::size_t n = 0; n < fresh.size(); ++n)
        if (!nm[n]) out.unmatched_new.push_back(static_cast<int>(n));
    return out;
}

void FusionPolicy::validate() const {
    if (policy == GammaPolicy::fixed && !(gamma > 0)) throw std::invalid_argument("fusion: fixed gamma must be positive");
}

GlobalPlaneMap fuse(const GlobalPlaneMap& map, const MatchResult& matches, std::span<const PlaneInstance> fresh,
                    const FusionPolicy& policy) {
    policy.validate();
    GlobalPlaneMap out = map;
    std::vector<char> seen_g(map.planes.size(), 0), seen_n(fresh.size(), 0);
    for (const auto& [g, n] : matches.pairs) {
        if (g < 0 || n < 0 || g >= static_cast<int>(map.planes.size()) || n >= static_cast<int>(fresh.size()))
            throw std::invalid_argument("fuse: match index out of range");
        if (seen_g[g] || seen_n[n]) throw std::invalid_argument("fuse: matching is not injective");
        seen_g[g] = seen_n[n] = 1;

        PlaneInstance& p = out.planes[g];
        const PlaneInstance& q = fresh[n];
        const double gamma = policy.policy == GammaPolicy::fixed ? policy.gamma : static_cast<double>(p.observations);
        const Vec3 normal = fuse_value(p.normal, q.normal, gamma);
        if (normal.norm() > 1e-12) p.normal = normal.normalized();
        p.centroid = fuse_value(p.centroid, q.centroid, gamma);
        p.offset = -p.centroid.dot(p.normal);
        p.descriptor = fuse_value(p.descriptor, q.descriptor, gamma);

        std::vector<VoxelKey> merged;
        merged.reserve(p.support.size() + q.support.size());
        std::set_union(p.support.begin(), p.support.end(), q.support.begin(), q.support.end(),
                       std::back_inserter(merged));
        p.support = std::move(merged);
        p.weight += q.weight;
        p.observations += 1;
    }
    for (std::size_t n = 0; n < fresh.size(); ++n) {
        if (seen_n[n]) continue;
        PlaneInstance p = fresh[n];
        p.id = out.next_id++;
        p.observations = 1;
        out.planes.push_back(std::move(p));
    }
    return out;
}

int consolidate(GlobalPlaneMap& map, const MatchGate& gate, std::span<const DepthFrame> frames) {
    if (!gate.enabled) return 0;
    int merges = 0;
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < map.planes.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < map.planes.size() && !changed; ++j) {
                PlaneInstance& a = map.planes[i];
                const PlaneInstance& b = map.planes[j];
                if (!planes_compatible(a, b, gate, frames)) continue;
                const double wa = a.weight, wb = b.weight, w = wa + wb;
                const Vec3 normal = wa * a.normal + wb * b.normal;
                if (normal.norm() > 1e-12) a.normal = normal.normalized();
                a.centroid = (wa * a.centroid + wb * b.centroid) / w;
                a.offset = -a.centroid.dot(a.normal);
                a.descriptor = (wa * a.descriptor + wb * b.descriptor) / w;
                std::vector<VoxelKey> merged;
                std::set_union(a.support.begin(), a.support.end(), b.support.begin(), b.support.end(),
                               std::back_inserter(merged));
                a.support = std::move(merged);
                a.weight = w;
                a.observations = std::max(a.observations, b.observations);
                map.planes.erase(map.planes.begin() + static_cast<std::ptrdiff_t>(j));
                ++merges;
                changed = true;
            }
        }
    }
    return merges;
}

void write_snapshot(std::ostream& out, const GlobalPlaneMap& map, bool full) {
    std::ostringstream s;
    s << std::setprecision(17);
    s << "planar-map v1\n";
    s << "next_id " << map.next_id << "\n";
    s << "planes " << map.planes.size() << "\n";
    for (const PlaneInstance& p : map.planes) {
        s << "plane " << p.id << ' ' << p.normal.x() << ' ' << p.normal.y() << ' ' << p.normal.z() << ' ' << p.offset
          << ' ' << p.centroid.x() << ' ' << p.centroid.y() << ' ' << p.centroid.z() << ' ' << p.weight << ' '
          << p.observations << ' ' << p.support.size() << "\n";
        if (!full) continue;
        s << "descriptor";
        for (int i = 0; i < kDescriptorSize; ++i) s << ' ' << p.descriptor[i];
        s << "\nsupport " << p.voxel_size;
        for (const VoxelKey& k : p.support) s << ' ' << k.x << ' ' << k.y << ' ' << k.z;
        s << "\n";
    }
    out << s.str();
    if (!out) throw std::runtime_error("write_snapshot: stream error");
}

GlobalPlaneMap read_snapshot(std::istream& in) {
    auto fail = [](const std::string& what) { throw std::runtime_error("read_snapshot: " + what); };
    std::string line;
    if (!std::getline(in, line) || line != "planar-map v1") fail("missing 'planar-map v1' header");
    GlobalPlaneMap map;
    std::size_t count = 0;
    {
        std::string tag;
        if (!std::getline(in, line)) fail("missing next_id");
        std::istringstream a(line);
        if (!(a >> tag >> map.next_id) || tag != "next_id") fail("bad next_id line");
        if (!std::getline(in, line)) fail("missing plane count");
        std::istringstream b(line);
        if (!(b >> tag >> count) || tag != "planes") fail("bad plane count line");
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "plane") {
            PlaneInstance p;
            std::size_t support_size = 0;
            if (!(ls >> p.id >> p.normal.x() >> p.normal.y() >> p.normal.z() >> p.offset >> p.centroid.x() >>
                  p.centroid.y() >> p.centroid.z() >> p.weight >> p.observations >> support_size))
                fail("bad plane line: " + line);
            map.planes.push_back(std::move(p));
        } else if (tag == "descriptor") {
            if (map.planes.empty()) fail("descriptor before any plane");
            Descriptor& d = map.planes.back().descriptor;
            for (int i = 0; i < kDescriptorSize; ++i)
                if (!(ls >> d[i])) fail("bad descriptor line");
        } else if (tag == "support") {
            if (map.planes.empty()) fail("support before any plane");
            PlaneInstance& p = map.planes.back();
            if (!(ls >> p.voxel_size)) fail("bad support line");
            VoxelKey k;
            while (ls >> k.x >> k.y >> k.z) p.support.push_back(k);
        } else {
            fail("unknown record '" + tag + "'");
        }
    }
    if (map.planes.size() != count) fail("plane count mismatch");
    return map;
}

}  // namespace planar
