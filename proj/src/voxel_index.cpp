#include "planar/voxel_index.hpp"

#include <algorithm>
#include <limits>

namespace planar {

VoxelIndex::VoxelIndex(std::span<const VoxelKey> keys, std::size_t max_dense_cells) {
    if (keys.empty()) return;
    VoxelKey lo = keys.front(), hi = keys.front();
    for (const VoxelKey& k : keys) {
        lo = {std::min(lo.x, k.x), std::min(lo.y, k.y), std::min(lo.z, k.z)};
        hi = {std::max(hi.x, k.x), std::max(hi.y, k.y), std::max(hi.z, k.z)};
    }
    const std::int64_t dx = std::int64_t{hi.x} - lo.x + 1;
    const std::int64_t dy = std::int64_t{hi.y} - lo.y + 1;
    const std::int64_t dz = std::int64_t{hi.z} - lo.z + 1;
    const double cells = static_cast<double>(dx) * static_cast<double>(dy) * static_cast<double>(dz);
    if (cells <= static_cast<double>(max_dense_cells)) {
        dense_ = true;
        lo_ = lo;
        dim_[0] = dx;
        dim_[1] = dy;
        dim_[2] = dz;
        cells_.assign(static_cast<std::size_t>(dx * dy * dz), -1);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            const VoxelKey& k = keys[i];
            cells_[static_cast<std::size_t>(((k.x - lo.x) * dy + (k.y - lo.y)) * dz + (k.z - lo.z))] =
                static_cast<std::int32_t>(i);
        }
    } else {
        map_.reserve(keys.size());
        for (std::size_t i = 0; i < keys.size(); ++i) map_.emplace(keys[i], static_cast<std::int32_t>(i));
    }
}

}  // namespace planar
