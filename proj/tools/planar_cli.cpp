// planar_cli: simulate | run | baseline | eval | export

#include "planar/io.hpp"
#include "planar/mesh.hpp"
#include "planar/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

using namespace planar;

namespace {

struct ConfigFlags {
    std::string file;
    std::map<std::string, std::string> values;

    // --config FILE plus one --<key> flag per config key
    void attach(CLI::App* app) {
        app->add_option("--config", file, "key = value config file, applied before flags")->check(CLI::ExistingFile);
        for (const std::string& key : config_keys()) app->add_option("--" + key, values[key], "config key " + key);
    }

    PipelineConfig build() const {
        PipelineConfig c;
        if (!file.empty()) load_config(std::filesystem::path(file), c);
        for (const auto& [k, v] : values)
            if (!v.empty()) set_config_value(c, k, v);
        c.validate();
        return c;
    }
};

Source source_for(const std::string& input, const PipelineConfig& config) {
    return input.empty() ? synthetic_source(config) : load_source(input);
}

GlobalPlaneMap read_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_snapshot(in);
}

void summarise(const RunResult& r, const std::string& out) {
    std::cout << r.report.method << ": " << r.report.global_plane_count << " planes after "
              << r.report.fragments.size() << " fragments\n";
    if (r.report.metrics) std::cout << to_json(*r.report.metrics) << "\n";
    std::cout << perf_json(r.report);
    if (!out.empty()) std::cout << "outputs in " << out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incremental plane detection, tracking and fusion on posed depth streams"};
    app.require_subcommand(1);

    ConfigFlags sim_flags, run_flags, base_flags, eval_flags;
    std::string sim_out, run_in, run_out, base_in, base_out, eval_map, eval_in, export_map, export_out;

    auto* sim = app.add_subcommand("simulate", "render a synthetic room sequence to disk");
    sim_flags.attach(sim);
    sim->add_option("--out", sim_out, "output sequence directory")->required();

    auto* run = app.add_subcommand("run", "run the plane pipeline");
    run_flags.attach(run);
    run->add_option("--input", run_in, "sequence directory (default: synthetic room)");
    run->add_option("--out", run_out, "output directory");

    auto* base = app.add_subcommand("baseline", "run the sequential RANSAC baseline");
    base_flags.attach(base);
    base->add_option("--input", base_in, "sequence directory (default: synthetic room)");
    base->add_option("--out", base_out, "output directory");

    auto* ev = app.add_subcommand("eval", "metrics of a saved map against a sequence's ground truth");
    eval_flags.attach(ev);
    ev->add_option("--map", eval_map, "full map snapshot (map.txt)")->required()->check(CLI::ExistingFile);
    ev->add_option("--input", eval_in, "sequence directory with scene.txt (default: synthetic room)");

    auto* ex = app.add_subcommand("export", "write a map snapshot as a PLY mesh");
    ex->add_option("--map", export_map, "full map snapshot (map.txt)")->required()->check(CLI::ExistingFile);
    ex->add_option("--out", export_out, "output PLY path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            const PipelineConfig c = sim_flags.build();
            const Source s = synthetic_source(c);
            io::write_sequence(sim_out, s.frames, &*s.scene);
            std::cout << "wrote " << s.frames.size() << " frames to " << sim_out << "\n";
        } else if (*run) {
            const PipelineConfig c = run_flags.build();
            const Source s = source_for(run_in, c);
            summarise(run_pipeline(s, c, run_out.empty() ? std::nullopt : std::optional<std::filesystem::path>(run_out)),
                      run_out);
        } else if (*base) {
            const PipelineConfig c = base_flags.build();
            const Source s = source_for(base_in, c);
            summarise(run_baseline(s, c, base_out.empty() ? std::nullopt : std::optional<std::filesystem::path>(base_out)),
                      base_out);
        } else if (*ev) {
            const PipelineConfig c = eval_flags.build();
            const Source s = source_for(eval_in, c);
            if (!s.scene) throw std::runtime_error("eval needs a ground-truth scene");
            const GlobalPlaneMap map = read_map(eval_map);
            const auto keyframes = stream_keyframes(s, c.keyframes);
            std::cout << to_json(evaluate_map(map, ground_truth_points(*s.scene, keyframes, c), c)) << "\n";
        } else if (*ex) {
            export_planes_mesh(read_map(export_map), export_out);
            std::cout << "wrote " << export_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
