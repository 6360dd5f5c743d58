#include "planar/pipeline.hpp"

#include "planar/io.hpp"
#include "planar/mesh.hpp"

#include <json.hpp>

#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace planar {

namespace {

struct Key {
    std::string name;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::invalid_argument("config: bad value '" + value + "' for " + key);
}

double parse_double(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        bad_value(key, s);
    }
    if (used != s.size()) bad_value(key, s);
    return v;
}

long long parse_int(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    long long v;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        bad_value(key, s);
    }
    if (used != s.size()) bad_value(key, s);
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return false;
    bad_value(key, s);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename Ref>
Key real(const char* name, Ref ref, double scale = 1.0) {
    return {name, [=](PipelineConfig& c, const std::string& s) { ref(c) = parse_double(name, s) * scale; },
            [=](const PipelineConfig& c) { return fmt(ref(const_cast<PipelineConfig&>(c)) / scale); }};
}

template <typename Ref>
Key integer(const char* name, Ref ref) {
    return {name,
            [=](PipelineConfig& c, const std::string& s) {
                using T = std::remove_reference_t<decltype(ref(c))>;
                const long long v = parse_int(name, s);
                if constexpr (std::is_unsigned_v<T>) {
                    if (v < 0) bad_value(name, s);
                }
                ref(c) = static_cast<T>(v);
            },
            [=](const PipelineConfig& c) { return std::to_string(ref(const_cast<PipelineConfig&>(c))); }};
}

template <typename Ref>
Key boolean(const char* name, Ref ref) {
    return {name, [=](PipelineConfig& c, const std::string& s) { ref(c) = parse_bool(name, s); },
            [=](const PipelineConfig& c) { return std::string(ref(const_cast<PipelineConfig&>(c)) ? "true" : "false"); }};
}

template <typename E, typename Ref>
Key choice(const char* name, Ref ref, std::vector<std::pair<std::string, E>> options) {
    return {name,
            [=](PipelineConfig& c, const std::string& s) {
                for (const auto& [label, v] : options)
                    if (label == s) {
                        ref(c) = v;
                        return;
                    }
                bad_value(name, s);
            },
            [=](const PipelineConfig& c) {
                for (const auto& [label, v] : options)
                    if (ref(const_cast<PipelineConfig&>(c)) == v) return label;
                return std::string("?");
            }};
}

#define REF(expr) [](PipelineConfig& c) -> auto& { return c.expr; }

const std::vector<Key>& keys() {
    static const double deg = kPi / 180.0;
    static const std::vector<Key> table = {
        real("t_max", REF(keyframes.t_max)),
        real("r_max_deg", REF(keyframes.r_max), deg),
        integer("n_k", REF(keyframes.n_k)),
        real("d_min", REF(d_min)),
        real("d_max", REF(d_max)),
        real("voxel_size", REF(fusion.voxel_size)),
        real("truncation", REF(fusion.truncation)),
        real("theta", REF(theta)),
        choice<Estimator>("estimator", REF(estimator), {{"oracle", Estimator::oracle}, {"geometric", Estimator::geometric}}),
        real("radius", REF(geometric.radius)),
        integer("vote_iters", REF(geometric.vote_iters)),
        integer("min_neighbors", REF(geometric.min_neighbors)),
        real("vote_normal_gate_deg", REF(geometric.normal_gate), deg),
        real("vote_offset_gate_voxels", REF(geometric.offset_gate_voxels)),
        real("max_surface_variation", REF(geometric.max_surface_variation)),
        real("min_spread", REF(geometric.min_spread)),
        boolean("votes", REF(votes)),
        real("bandwidth_pos", REF(cluster.bandwidth_pos)),
        real("bandwidth_normal", REF(cluster.bandwidth_normal)),
        real("bandwidth_offset", REF(cluster.bandwidth_offset)),
        integer("max_iter", REF(cluster.max_iter)),
        real("tol", REF(cluster.tol)),
        integer("min_cluster_size", REF(cluster.min_cluster_size)),
        choice<Matcher>("matcher", REF(matcher), {{"sinkhorn", Matcher::sinkhorn}, {"iou", Matcher::iou}}),
        real("dustbin", REF(sinkhorn.dustbin)),
        integer("sinkhorn_iters", REF(sinkhorn.n_iters)),
        real("epsilon", REF(sinkhorn.epsilon)),
        real("accept", REF(sinkhorn.accept)),
        boolean("maximize", REF(sinkhorn.maximize)),
        real("iou_threshold", REF(iou_threshold)),
        boolean("gate", REF(gate.enabled)),
        real("gate_max_angle_deg", REF(gate.max_angle), deg),
        real("gate_max_offset", REF(gate.max_offset)),
        real("gate_free_gap", REF(gate.free_gap)),
        real("gate_free_margin", REF(gate.free_margin)),
        real("gate_step", REF(gate.step)),
        choice<GammaPolicy>("gamma_policy", REF(fusion_policy.policy),
                            {{"observation_count", GammaPolicy::observation_count}, {"fixed", GammaPolicy::fixed}}),
        real("gamma", REF(fusion_policy.gamma)),
        integer("history_keyframes", REF(history_keyframes)),
        boolean("consolidate", REF(consolidate)),
        real("ransac_eps_dist", REF(ransac.eps_dist)),
        real("ransac_eps_angle_deg", REF(ransac.eps_angle), deg),
        integer("ransac_min_inliers", REF(ransac.min_inliers)),
        integer("ransac_max_planes", REF(ransac.max_planes)),
        integer("ransac_iters", REF(ransac.iters_per_plane)),
        real("ransac_min_width", REF(ransac.min_width)),
        boolean("ransac_split", REF(ransac.split_components)),
        real("ransac_component_cell", REF(ransac.component_cell)),
        real("tau", REF(tau)),
        real("spacing", REF(spacing)),
        real("gt_density", REF(gt_density)),
        real("room_x", REF(room.size.x())),
        real("room_y", REF(room.size.y())),
        real("room_z", REF(room.size.z())),
        integer("room_extra", REF(room.extra_planes)),
        boolean("room_tilted", REF(room.tilted)),
        real("table_height", REF(room.table_height)),
        real("table_separation", REF(room.table_separation)),
        real("table_half_size", REF(room.table_half_size)),
        integer("n_frames", REF(n_frames)),
        real("noise_sigma", REF(noise_sigma)),
        boolean("quantize_mm", REF(quantize_mm)),
        real("fx", REF(intrinsics.fx)),
        real("fy", REF(intrinsics.fy)),
        real("cx", REF(intrinsics.cx)),
        real("cy", REF(intrinsics.cy)),
        integer("width", REF(intrinsics.width)),
        integer("height", REF(intrinsics.height)),
        real("yaw_step_deg", REF(trajectory.yaw_step_deg)),
        real("pitch_center_deg", REF(trajectory.pitch_center_deg)),
        real("pitch_amplitude_deg", REF(trajectory.pitch_amplitude_deg)),
        real("pitch_period_frames", REF(trajectory.pitch_period_frames)),
        real("orbit_radius", REF(trajectory.orbit_radius)),
        real("orbit_rate", REF(trajectory.orbit_rate)),
        real("height_fraction", REF(trajectory.height_fraction)),
        integer("seed", REF(seed)),
    };
    return table;
}

#undef REF

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + what);
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Outputs {
    std::optional<std::filesystem::path> dir;

    explicit Outputs(const std::optional<std::filesystem::path>& d) : dir(d) {
        if (dir) std::filesystem::create_directories(*dir / "snapshots");
    }

    void text(const std::filesystem::path& rel, const std::string& content) const {
        if (!dir) return;
        const auto path = *dir / rel;
        std::ofstream out(path, std::ios::binary);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
};

std::string snapshot_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "map-%03d.txt", index);
    return buf;
}

void check_source(const Source& source, const PipelineConfig& config) {
    config.validate();
    if (source.frames.empty()) throw std::invalid_argument("source has no frames");
    if (config.estimator == Estimator::oracle && !source.scene)
        throw std::invalid_argument("the oracle estimator needs a ground-truth scene");
}

// Runs keyframe selection over the stream and hands each fragment to `f`.
template <typename F>
std::vector<DepthFrame> for_each_fragment(const Source& source, const PipelineConfig& config, F&& f) {
    KeyframeSelector selector(config.keyframes);
    std::vector<DepthFrame> keyframes;
    auto handle = [&](Fragment& fragment) {
        keyframes.insert(keyframes.end(), fragment.keyframes.begin(), fragment.keyframes.end());
        f(fragment);
    };
    for (const DepthFrame& frame : source.frames)
        if (auto fragment = selector.push(frame)) handle(*fragment);
    if (auto fragment = selector.flush()) handle(*fragment);
    return keyframes;
}

void finish(RunResult& result, const Source& source, const std::vector<DepthFrame>& keyframes,
            const PipelineConfig& config, const Outputs& out) {
    result.report.global_plane_count = static_cast<int>(result.map.planes.size());
    if (source.scene && !result.map.planes.empty()) {
        const LabeledPointSet gt = ground_truth_points(*source.scene, keyframes, config);
        if (!gt.empty()) result.report.metrics = evaluate_map(result.map, gt, config);
    }
    result.report.peak_memory_mb = peak_memory_mb();
    if (out.dir) {
        std::ostringstream full;
        write_snapshot(full, result.map, true);
        out.text("map.txt", full.str());
        if (!result.map.planes.empty()) export_planes_mesh(result.map, *out.dir / "planes.ply");
        out.text("report.json", report_json(result.report));
        out.text("perf.json", perf_json(result.report));
    }
}

}  // namespace

void PipelineConfig::validate() const {
    try {
        keyframes.validate();
        geometric.validate(fusion.voxel_size);
        cluster.validate();
        sinkhorn.validate();
        fusion_policy.validate();
        ransac.validate();
        intrinsics.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    require(d_min > 0 && d_min < d_max, "need 0 < d_min < d_max");
    require(fusion.voxel_size > 0, "voxel_size must be positive");
    require(fusion.truncation >= fusion.voxel_size, "truncation must be at least voxel_size");
    require(theta > 0 && theta < 1, "theta must be in (0, 1)");
    require(iou_threshold > 0 && iou_threshold <= 1, "iou_threshold must be in (0, 1]");
    require(gate.max_angle > 0 && gate.max_offset > 0 && gate.free_gap > 0 && gate.free_margin >= 0 && gate.step > 0,
            "gate thresholds must be positive");
    require(history_keyframes >= 1, "history_keyframes must be >= 1");
    require(tau > 0 && spacing > 0 && gt_density > 0, "tau, spacing and gt_density must be positive");
    require((room.size.array() > 0).all(), "room dimensions must be positive");
    require(room.extra_planes >= 0, "room_extra must be >= 0");
    require(n_frames >= 1, "n_frames must be >= 1");
    require(noise_sigma >= 0, "noise_sigma must be >= 0");
}

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value) {
    for (const Key& k : keys())
        if (k.name == key) return k.set(config, value);
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

void load_config(std::istream& in, PipelineConfig& config) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void load_config(const std::filesystem::path& path, PipelineConfig& config) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    load_config(in, config);
}

void write_config(std::ostream& out, const PipelineConfig& config) {
    for (const Key& k : keys()) out << k.name << " = " << k.get(config) << "\n";
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const Key& k : keys()) out.push_back(k.name);
    return out;
}

Source synthetic_source(const PipelineConfig& config) {
    config.validate();
    Source source;
    source.scene = build_room_scene(config.room, config.seed);
    const auto poses = generate_trajectory(*source.scene, config.n_frames, config.seed, config.trajectory);
    source.frames.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i)
        source.frames.push_back(render_depth(*source.scene, config.intrinsics, poses[i],
                                             {config.noise_sigma, config.quantize_mm, config.seed * 100003 + i}));
    return source;
}

Source load_source(const std::filesystem::path& dir) {
    io::Sequence seq = io::load_sequence(dir);
    if (seq.frames.empty()) throw std::runtime_error("no frames in " + dir.string());
    return {std::move(seq.frames), std::move(seq.scene)};
}

std::string report_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["global_plane_count"] = r.global_plane_count;
    auto frags = nlohmann::ordered_json::array();
    for (const FragmentStat& f : r.fragments)
        frags.push_back({{"index", f.index}, {"keyframes", f.keyframes}, {"instances", f.instances},
                         {"global_planes", f.global_planes}});
    j["fragments"] = frags;
    if (r.metrics) j["metrics"] = nlohmann::ordered_json::parse(to_json(*r.metrics));
    else j["metrics"] = nullptr;
    return j.dump(2) + "\n";
}

std::string perf_json(const RunReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["peak_memory_mb"] = r.peak_memory_mb;
    double total_ms = 0.0;
    int total_kf = 0;
    auto frags = nlohmann::ordered_json::array();
    for (const FragmentStat& f : r.fragments) {
        frags.push_back({{"index", f.index}, {"ms_per_keyframe", f.ms_per_keyframe}});
        total_ms += f.ms_per_keyframe * f.keyframes;
        total_kf += f.keyframes;
    }
    j["ms_per_keyframe"] = total_kf > 0 ? total_ms / total_kf : 0.0;
    j["fragments"] = frags;
    return j.dump(2) + "\n";
}

std::vector<DepthFrame> stream_keyframes(const Source& source, const KeyframeParams& params) {
    PipelineConfig config;
    config.keyframes = params;
    return for_each_fragment(source, config, [](const Fragment&) {});
}

LabeledPointSet ground_truth_points(const SyntheticScene& scene, std::span<const DepthFrame> keyframes,
                                    const PipelineConfig& config) {
    const auto samples = sample_gt_points(scene, config.gt_density, config.seed);
    const std::vector<DepthFrame> frames(keyframes.begin(), keyframes.end());
    return to_labeled(filter_observed(samples, frames));
}

MetricsReport evaluate_map(const GlobalPlaneMap& map, const LabeledPointSet& gt, const PipelineConfig& config) {
    return evaluate(sample_plane_points(map.planes, config.spacing), gt, config.tau);
}

double peak_memory_mb() {
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return static_cast<double>(usage.ru_maxrss) / 1024.0;   // ru_maxrss is in KiB on Linux
}

RunResult run_pipeline(const Source& source, const PipelineConfig& config,
                       const std::optional<std::filesystem::path>& out_dir) {
    check_source(source, config);
    const Outputs out(out_dir);
    RunResult result;
    result.report.method = "planar";
    std::vector<DepthFrame> history;

    const auto keyframes = for_each_fragment(source, config, [&](const Fragment& fragment) {
        const auto t0 = Clock::now();
        const BoundingCube cube = fragment_bounds(fragment, config.d_min, config.d_max);
        const FusedSurface surface = fuse_depth(fragment, cube, config.fusion);
        const auto grids = build_grid_hierarchy(surface, config.theta);

        std::vector<VoxelPrimitive> prims =
            config.estimator == Estimator::oracle
                ? estimate_primitives_oracle(grids[2], *source.scene, config.fusion.truncation)
                : estimate_primitives_geometric(grids[2], surface, config.geometric);
        ClusterConfig cc = config.cluster;
        if (!config.votes) {
            zero_votes(prims, cube);
            cc.space = ClusterSpace::plane_parameters;
        }
        std::vector<PlaneInstance> instances;
        if (!prims.empty()) {
            const Clustering clusters = mean_shift_cluster(prims, cc);
            instances = form_plane_instances(prims, clusters, cc, config.fusion.voxel_size);
        }

        history.insert(history.end(), fragment.keyframes.begin(), fragment.keyframes.end());
        if (history.size() > static_cast<std::size_t>(config.history_keyframes))
            history.erase(history.begin(), history.end() - config.history_keyframes);

        GlobalPlaneMap& map = result.map;
        MatchResult matches;
        if (config.matcher == Matcher::sinkhorn) {
            std::vector<PlaneInstance> context = map.planes;
            context.insert(context.end(), instances.begin(), instances.end());
            Eigen::MatrixXd scores =
                similarity_matrix(plane_features(map.planes, context), plane_features(instances, context));
            if (config.gate.enabled) scores = gate_scores(scores, map.planes, instances, config.gate, history);
            matches = sinkhorn_match(scores, config.sinkhorn);
        } else {
            std::vector<std::vector<VoxelKey>> a, b;
            for (const PlaneInstance& p : map.planes) a.push_back(p.support);
            for (const PlaneInstance& p : instances) b.push_back(p.support);
            matches = iou_match(a, b, config.iou_threshold);
        }
        map = fuse(map, matches, instances, config.fusion_policy);
        if (config.consolidate) consolidate(map, config.gate, history);

        FragmentStat stat;
        stat.index = fragment.index;
        stat.keyframes = static_cast<int>(fragment.keyframes.size());
        stat.instances = static_cast<int>(instances.size());
        stat.global_planes = static_cast<int>(map.planes.size());
        stat.ms_per_keyframe = ms_since(t0) / std::max(1, stat.keyframes);
        result.report.fragments.push_back(stat);

        std::ostringstream snap;
        write_snapshot(snap, map);
        result.snapshots.push_back(snap.str());
        out.text(std::filesystem::path("snapshots") / snapshot_name(fragment.index), snap.str());
    });

    finish(result, source, keyframes, config, out);
    return result;
}

RunResult run_baseline(const Source& source, const PipelineConfig& config,
                       const std::optional<std::filesystem::path>& out_dir) {
    check_source(source, config);
    const Outputs out(out_dir);
    RunResult result;
    result.report.method = "baseline";
    std::map<VoxelKey, OrientedPoint> cloud;   // newest fused sample per voxel
    RansacParams rp = config.ransac;
    rp.seed = config.seed;

    const auto keyframes = for_each_fragment(source, config, [&](const Fragment& fragment) {
        const auto t0 = Clock::now();
        const BoundingCube cube = fragment_bounds(fragment, config.d_min, config.d_max);
        const FusedSurface surface = fuse_depth(fragment, cube, config.fusion);
        for (const SurfaceSample& s : surface.samples) cloud[s.voxel] = {s.position, s.normal, -1};

        std::vector<OrientedPoint> points;
        points.reserve(cloud.size());
        for (const auto& [k, p] : cloud) points.push_back(p);
        const auto planes = sequential_ransac(points, rp);
        result.map.planes = ransac_instances(points, planes, config.fusion.voxel_size);
        for (std::size_t i = 0; i < result.map.planes.size(); ++i) result.map.planes[i].id = static_cast<int>(i);
        result.map.next_id = static_cast<int>(result.map.planes.size());

        FragmentStat stat;
        stat.index = fragment.index;
        stat.keyframes = static_cast<int>(fragment.keyframes.size());
        stat.instances = static_cast<int>(planes.size());
        stat.global_planes = stat.instances;
        stat.ms_per_keyframe = ms_since(t0) / std::max(1, stat.keyframes);
        result.report.fragments.push_back(stat);

        std::ostringstream snap;
        write_snapshot(snap, result.map);
        result.snapshots.push_back(snap.str());
        out.text(std::filesystem::path("snapshots") / snapshot_name(fragment.index), snap.str());
    });

    finish(result, source, keyframes, config, out);
    return result;
}

}  // namespace planar
