#include "planar/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace planar {

namespace {
constexpr int kLeafSize = 12;
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<int>(points_.size()));
    }
}

int KdTree::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    Node node;
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= kLeafSize) return id;

    int axis;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
    nodes_[id].axis = axis;
    nodes_[id].split = points_[order_[mid]][axis];
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
}

void KdTree::search(int id, const Vec3& q, Hit& best) const {
    const Node& n = nodes_[id];
    const double box = (q.cwiseMax(n.lo).cwiseMin(n.hi) - q).squaredNorm();
    // Equal distance can still improve the index, so prune strictly.
    if (best.index >= 0 && box > best.distance_sq) return;
    if (n.left < 0) {
        for (int i = n.begin; i < n.end; ++i) {
            const int p = order_[i];
            const double d = (points_[p] - q).squaredNorm();
            if (best.index < 0 || d < best.distance_sq || (d == best.distance_sq && p < best.index)) best = {p, d};
        }
        return;
    }
    const bool left_first = q[n.axis] < n.split;
    search(left_first ? n.left : n.right, q, best);
    search(left_first ? n.right : n.left, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& q) const {
    Hit best;
    if (!nodes_.empty()) search(0, q, best);
    return best;
}

}  // namespace planar
