#pragma once

#include "planar/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace planar::io {

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<std::uint8_t, 3>> face_colors;   ///< parallel to faces
};

/// Binary little-endian PLY: double vertices, int index lists, uchar face colours.
void write_ply_mesh(const std::filesystem::path& path, const Mesh& mesh);
Mesh read_ply_mesh(const std::filesystem::path& path);

/// Point cloud with normals and an int `label` property.
void write_ply_points(const std::filesystem::path& path, std::span<const OrientedPoint> points);

/// Reads ascii or binary little-endian vertex data; needs x y z and nx ny nz.
/// A `label` property is picked up when present.
std::vector<OrientedPoint> read_ply_points(const std::filesystem::path& path);

}  // namespace planar::io
