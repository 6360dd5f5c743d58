#pragma once

#include "planar/ply.hpp"
#include "planar/track_fuse.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace planar {

using Cell = std::pair<std::int64_t, std::int64_t>;

/// Fills one empty cell of every diagonal-only 2x2 block until none is left,
/// so that region boundaries never touch at a corner.
std::vector<Cell> remove_saddles(std::span<const Cell> cells);

/// Boundary loops of a cell set on the corner lattice (cell (i,j) spans
/// [i,i+1] x [j,j+1]). Outer boundaries are counter-clockwise, holes
/// clockwise; collinear corners are dropped. The cell set must be free of
/// saddles (see remove_saddles).
std::vector<std::vector<Vec2>> contour_cells(std::span<const Cell> cells);

std::array<std::uint8_t, 3> plane_color(int id);

/// Triangulated patch of one plane: support rasterised in the plane at voxel
/// resolution, contoured and ear-clipped. Every face gets the plane's colour.
io::Mesh plane_patch(const PlaneInstance& plane);

io::Mesh planes_mesh(std::span<const PlaneInstance> planes);

/// Throws std::invalid_argument on an empty map and std::runtime_error
/// (naming the path) on write failure.
void export_planes_mesh(const GlobalPlaneMap& map, const std::filesystem::path& path);

}  // namespace planar
