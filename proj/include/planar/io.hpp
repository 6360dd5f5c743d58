#pragma once

#include "planar/scene_sim.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace planar::io {

using Image16 = Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_png16(const std::filesystem::path& path, const Image16& image);
Image16 read_png16(const std::filesystem::path& path);

/// Depth PNGs store whole millimetres; values beyond 65.535 m are dropped.
void write_depth_png(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_depth_png(const std::filesystem::path& path);

/// Plain text, four rows of four numbers, camera-to-world.
void write_pose(const std::filesystem::path& path, const Pose& pose);
Pose read_pose(const std::filesystem::path& path);

/// One line: fx fy cx cy width height.
void write_intrinsics(const std::filesystem::path& path, const CameraIntrinsics& k);
CameraIntrinsics read_intrinsics(const std::filesystem::path& path);

/// Line-oriented scene description:
///
///     # planar scene v1
///     bounds minx miny minz maxx maxy maxz
///     plane <id> <nx> <ny> <nz> <d> <k> x1 y1 z1 ... xk yk zk
///
/// Blank lines and lines starting with '#' are ignored.
void write_scene(const std::filesystem::path& path, const SyntheticScene& scene);
SyntheticScene read_scene(const std::filesystem::path& path);

/// A posed depth sequence on disk:
///
///     intrinsics.txt
///     frame-000000.depth.png   16-bit millimetres
///     frame-000000.pose.txt    4x4 camera-to-world
///     frame-000000.label.png   optional, plane id + 1 (0 = none)
///     scene.txt                optional ground-truth scene
struct Sequence {
    CameraIntrinsics intrinsics;
    std::vector<DepthFrame> frames;
    std::optional<SyntheticScene> scene;
};

void write_sequence(const std::filesystem::path& dir, const std::vector<DepthFrame>& frames,
                    const SyntheticScene* scene = nullptr);
Sequence load_sequence(const std::filesystem::path& dir);

}  // namespace planar::io
