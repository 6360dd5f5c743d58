#include "planar/metrics.hpp"

#include "planar/kdtree.hpp"

#include <json.hpp>

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace planar {

LabeledPointSet to_labeled(std::span<const OrientedPoint> points) {
    LabeledPointSet out;
    out.positions.reserve(points.size());
    out.labels.reserve(points.size());
    for (const OrientedPoint& p : points) out.push_back(p.position, p.label);
    return out;
}

std::vector<Vec3> project_support(const PlaneInstance& instance) {
    std::vector<Vec3> out;
    out.reserve(instance.support.size());
    for (const VoxelKey& k : instance.support)
        out.push_back(project_to_plane<double>(voxel_center(k, instance.voxel_size), instance.normal, instance.offset));
    return out;
}

LabeledPointSet sample_plane_points(std::span<const PlaneInstance> instances, double spacing) {
    if (!(spacing > 0)) throw std::invalid_argument("sample_plane_points: spacing must be positive");
    LabeledPointSet out;
    for (std::size_t idx = 0; idx < instances.size(); ++idx) {
        const PlaneInstance& inst = instances[idx];
        const int label = inst.id >= 0 ? inst.id : static_cast<int>(idx);
        const Vec3 n = inst.normal.normalized();
        const Vec3 origin = -inst.offset * n;
        const auto [e1, e2] = plane_basis<double>(n);
        const double h = 0.5 * inst.voxel_size;

        std::set<std::pair<long, long>> cells;
        for (const Vec3& p : project_support(inst)) {
            const double u = e1.dot(p - origin), v = e2.dot(p - origin);
            // half-open squares so neighbouring voxels do not share samples
            const long i0 = static_cast<long>(std::ceil((u - h) / spacing));
            const long i1 = static_cast<long>(std::ceil((u + h) / spacing));
            const long j0 = static_cast<long>(std::ceil((v - h) / spacing));
            const long j1 = static_cast<long>(std::ceil((v + h) / spacing));
            for (long i = i0; i < i1; ++i)
                for (long j = j0; j < j1; ++j) cells.insert({i, j});
        }
        for (const auto& [i, j] : cells)
            out.push_back(origin + (static_cast<double>(i) * spacing) * e1 + (static_cast<double>(j) * spacing) * e2,
                          label);
    }
    return out;
}

double fscore_of(double prec, double recall) {
    return prec + recall > 0 ? 2.0 * prec * recall / (prec + recall) : 0.0;
}

namespace {

// Mean nearest distance from `from` to `to`, and the fraction within tau.
std::pair<double, double> directed(const std::vector<Vec3>& from, const KdTree& to, double tau) {
    double sum = 0.0;
    std::size_t within = 0;
    for (const Vec3& p : from) {
        const double d = std::sqrt(to.nearest(p).distance_sq);
        sum += d;
        if (d <= tau) ++within;
    }
    return {sum / static_cast<double>(from.size()), static_cast<double>(within) / static_cast<double>(from.size())};
}

double entropy(const std::map<int, double>& counts, double n) {
    double h = 0.0;
    for (const auto& [label, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
}

}  // namespace

GeometryMetrics geometry_metrics(const LabeledPointSet& pred, const LabeledPointSet& gt, double tau) {
    if (pred.empty() || gt.empty()) throw std::invalid_argument("geometry_metrics: empty point set");
    if (!(tau > 0)) throw std::invalid_argument("geometry_metrics: tau must be positive");
    const KdTree pred_tree(pred.positions), gt_tree(gt.positions);
    GeometryMetrics m;
    std::tie(m.acc, m.prec) = directed(pred.positions, gt_tree, tau);
    std::tie(m.comp, m.recall) = directed(gt.positions, pred_tree, tau);
    m.fscore = fscore_of(m.prec, m.recall);
    return m;
}

std::vector<int> transfer_labels(const LabeledPointSet& gt, const LabeledPointSet& pred) {
    if (pred.empty()) throw std::invalid_argument("transfer_labels: empty prediction");
    const KdTree tree(pred.positions);
    std::vector<int> out;
    out.reserve(gt.size());
    for (const Vec3& p : gt.positions) out.push_back(pred.labels[tree.nearest(p).index]);
    return out;
}

SegmentationMetrics segmentation_metrics(std::span<const int> gt, std::span<const int> pred) {
    if (gt.size() != pred.size()) throw std::invalid_argument("segmentation_metrics: length mismatch");
    std::map<int, double> a, b;
    std::map<std::pair<int, int>, double> joint;
    double n = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] < 0 || pred[i] < 0) continue;
        a[gt[i]] += 1;
        b[pred[i]] += 1;
        joint[{gt[i], pred[i]}] += 1;
        n += 1;
    }
    if (n == 0) throw std::invalid_argument("segmentation_metrics: no labelled points");

    SegmentationMetrics m;
    double mutual = 0.0;
    for (const auto& [key, c] : joint) mutual += (c / n) * std::log(c * n / (a[key.first] * b[key.second]));
    m.voi = std::max(0.0, entropy(a, n) + entropy(b, n) - 2.0 * mutual);

    auto pairs = [](double c) { return 0.5 * c * (c - 1.0); };
    const double total = pairs(n);
    if (total > 0) {
        double sa = 0, sb = 0, sj = 0;
        for (const auto& [k, c] : a) sa += pairs(c);
        for (const auto& [k, c] : b) sb += pairs(c);
        for (const auto& [k, c] : joint) sj += pairs(c);
        m.ri = (total - sa - sb + 2.0 * sj) / total;
    } else {
        m.ri = 1.0;
    }

    std::map<int, double> best;
    for (const auto& [key, c] : joint) {
        const double iou = c / (a[key.first] + b[key.second] - c);
        double& slot = best[key.first];
        slot = std::max(slot, iou);
    }
    double cover = 0.0;
    for (const auto& [label, c] : a) cover += c * best[label];
    m.sc = cover / n;
    return m;
}

MetricsReport evaluate(const LabeledPointSet& pred, const LabeledPointSet& gt, double tau) {
    const GeometryMetrics g = geometry_metrics(pred, gt, tau);
    const std::vector<int> transferred = transfer_labels(gt, pred);
    const SegmentationMetrics s = segmentation_metrics(gt.labels, transferred);
    return {g.comp, g.acc, g.recall, g.prec, g.fscore, s.voi, s.ri, s.sc};
}

std::string to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["comp"] = r.comp;
    j["acc"] = r.acc;
    j["recall"] = r.recall;
    j["prec"] = r.prec;
    j["fscore"] = r.fscore;
    j["voi"] = r.voi;
    j["ri"] = r.ri;
    j["sc"] = r.sc;
    return j.dump(2);
}

MetricsReport metrics_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.comp = j.at("comp").get<double>();
    r.acc = j.at("acc").get<double>();
    r.recall = j.at("recall").get<double>();
    r.prec = j.at("prec").get<double>();
    r.fscore = j.at("fscore").get<double>();
    r.voi = j.at("voi").get<double>();
    r.ri = j.at("ri").get<double>();
    r.sc = j.at("sc").get<double>();
    return r;
}

}  // namespace planar
