#pragma once

#include "planar/fragmenter.hpp"
#include "planar/metrics.hpp"
#include "planar/primitives.hpp"
#include "planar/ransac.hpp"
#include "planar/track_fuse.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace planar {

enum class Estimator { oracle, geometric };
enum class Matcher { sinkhorn, iou };

struct PipelineConfig {
    // stream and fragments
    KeyframeParams keyframes;
    double d_min = 0.1;
    double d_max = 5.0;
    FusionParams fusion{0.04, 0.12};
    double theta = 0.5;

    // per-fragment planes
    Estimator estimator = Estimator::geometric;
    GeometricParams geometric;
    bool votes = true;              ///< false zeroes votes and clusters on plane parameters
    ClusterConfig cluster;

    // tracking and fusion
    Matcher matcher = Matcher::sinkhorn;
    SinkhornParams sinkhorn;
    double iou_threshold = 0.3;
    MatchGate gate;
    FusionPolicy fusion_policy;
    int history_keyframes = 100;    ///< keyframes kept for the free-space test
    bool consolidate = true;

    RansacParams ransac;

    // evaluation
    double tau = 0.05;
    double spacing = 0.02;
    double gt_density = 2500.0;     ///< ground-truth samples per square meter

    // synthetic source
    RoomSpec room{{4.0, 3.0, 2.5}, 2};
    int n_frames = 120;
    double noise_sigma = 0.0;
    bool quantize_mm = false;
    CameraIntrinsics intrinsics;
    TrajectoryOptions trajectory;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument naming the offending key.
    void validate() const;
};

/// Applies one `key = value` assignment. Unknown keys and malformed values throw.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);

/// Flat `key = value` lines; '#' starts a comment. Keys are those of
/// config_keys(); every key is optional.
void load_config(std::istream& in, PipelineConfig& config);
void load_config(const std::filesystem::path& path, PipelineConfig& config);
void write_config(std::ostream& out, const PipelineConfig& config);
std::vector<std::string> config_keys();

struct Source {
    std::vector<DepthFrame> frames;
    std::optional<SyntheticScene> scene;
};

/// Renders the configured room along the configured trajectory.
Source synthetic_source(const PipelineConfig& config);
Source load_source(const std::filesystem::path& dir);

struct FragmentStat {
    int index = 0;
    int keyframes = 0;
    int instances = 0;        ///< planes found in the fragment
    int global_planes = 0;    ///< map size after fusing it
    double ms_per_keyframe = 0.0;
};

struct RunReport {
    std::string method;                  ///< "planar" or "baseline"
    std::vector<FragmentStat> fragments;
    double peak_memory_mb = 0.0;
    int global_plane_count = 0;
    std::optional<MetricsReport> metrics;
};

/// Deterministic part of the report (no timings or memory).
std::string report_json(const RunReport& report);
/// Timings and memory.
std::string perf_json(const RunReport& report);

struct RunResult {
    RunReport report;
    GlobalPlaneMap map;
    std::vector<std::string> snapshots;   ///< map snapshot text after each fragment
};

/// Keyframes -> fragments -> occupancy -> primitives -> clustering ->
/// tracking -> fusion, one fragment at a time. With `out_dir`, writes
/// snapshots/map-NNN.txt after every fragment and map.txt (full snapshot),
/// planes.ply, report.json and perf.json at the end.
RunResult run_pipeline(const Source& source, const PipelineConfig& config,
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Same fragments, but sequential RANSAC over all fused surface points seen so
/// far after every fragment.
RunResult run_baseline(const Source& source, const PipelineConfig& config,
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Keyframes the selector admits from the whole stream, in order.
std::vector<DepthFrame> stream_keyframes(const Source& source, const KeyframeParams& params);

/// Ground truth for evaluation: scene samples that some keyframe observes.
LabeledPointSet ground_truth_points(const SyntheticScene& scene, std::span<const DepthFrame> keyframes,
                                    const PipelineConfig& config);

MetricsReport evaluate_map(const GlobalPlaneMap& map, const LabeledPointSet& gt, const PipelineConfig& config);

double peak_memory_mb();

}  // namespace planar
