#pragma once

#include "planar/geometry.hpp"

#include <array>
#include <span>
#include <vector>

namespace planar {

using Ring = std::vector<Vec2>;
using Triangle = std::array<int, 3>;

/// Signed area, positive for counter-clockwise rings.
double signed_area(std::span<const Vec2> ring);

/// Even-odd point-in-polygon test. Points on the boundary may go either way.
bool point_in_ring(const Vec2& p, std::span<const Vec2> ring);

/// Drops consecutive duplicates and vertices collinear with their neighbours.
Ring simplify_collinear(const Ring& ring);

/// Ear-clipping triangulation of a polygon with holes.
///
/// The outer ring is reoriented counter-clockwise and holes clockwise; each
/// hole is bridged along +x from its right-most vertex to the boundary before
/// clipping. `vertices` receives the outer ring, the holes and any bridge
/// points; triangles index into it, wound counter-clockwise. Throws
/// std::runtime_error when clipping stalls on self-touching input.
std::vector<Triangle> triangulate(const Ring& outer, const std::vector<Ring>& holes,
                                  std::vector<Vec2>& vertices);

}  // namespace planar
