#pragma once

#include "planar/geometry.hpp"

#include <span>
#include <vector>

namespace planar {

/// Exact 3-d tree over a fixed point list. Queries return the nearest point;
/// among equidistant points the lowest input index wins.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::span<const Vec3> points);

    struct Hit {
        int index = -1;
        double distance_sq = 0.0;
    };

    /// Nearest neighbour of q; index -1 on an empty tree.
    Hit nearest(const Vec3& q) const;
    std::size_t size() const { return points_.size(); }

private:
    struct Node {
        int begin = 0, end = 0;   // range in order_
        int left = -1, right = -1;
        int axis = 0;
        double split = 0.0;
        Vec3 lo, hi;          // bounding box of the range
    };

    int build(int begin, int end);
    void search(int node, const Vec3& q, Hit& best) const;

    std::vector<Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace planar
