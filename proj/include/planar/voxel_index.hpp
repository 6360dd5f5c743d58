#pragma once

#include "planar/geometry.hpp"

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace planar {

/// Maps voxel keys to dense indices. Uses a flat array over the key bounding
/// box when it is small enough and a hash map otherwise.
class VoxelIndex {
public:
    VoxelIndex() = default;
    explicit VoxelIndex(std::span<const VoxelKey> keys, std::size_t max_dense_cells = 1u << 25);

    /// Index of `k` in the key list passed at construction, or -1.
    std::int32_t find(const VoxelKey& k) const {
        if (dense_) {
            const std::int64_t x = k.x - lo_.x, y = k.y - lo_.y, z = k.z - lo_.z;
            if (x < 0 || y < 0 || z < 0 || x >= dim_[0] || y >= dim_[1] || z >= dim_[2]) return -1;
            return cells_[static_cast<std::size_t>((x * dim_[1] + y) * dim_[2] + z)];
        }
        auto it = map_.find(k);
        return it == map_.end() ? -1 : it->second;
    }

    bool contains(const VoxelKey& k) const { return find(k) >= 0; }

private:
    bool dense_ = false;
    VoxelKey lo_;
    std::int64_t dim_[3] = {0, 0, 0};
    std::vector<std::int32_t> cells_;
    std::unordered_map<VoxelKey, std::int32_t, VoxelKeyHash> map_;
};

}  // namespace planar
