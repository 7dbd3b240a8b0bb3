#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cli.hpp"
#include "msgnav/errors.hpp"

using namespace msgnav;

int main(int argc, char** argv) {
    CLI::App app{"msgnav: multi-modal 3D scene graph navigation toolkit"};
    app.require_subcommand(1);

    // run
    cli::RunOptions run_opts;
    std::string run_config, vvd_str = "on";
    auto* run = app.add_subcommand("run", "run navigation episodes and report SR/SPL");
    run->add_option("--scene", run_opts.scenes, "scene file (repeatable)");
    run->add_option("--goal", run_opts.goal_filter, "goal name filter (repeatable)");
    run->add_option("--reasoner", run_opts.reasoner, "oracle | mock:<script> | http(s)://...");
    run->add_option("--vvd", vvd_str, "viewpoint decision on|off")
        ->check(CLI::IsMember({"on", "off"}));
    run->add_option("--seed", run_opts.seed, "base random seed");
    run->add_option("--out", run_opts.out_dir, "output directory");
    run->add_option("--jobs", run_opts.jobs, "worker threads for independent episodes");
    run->add_flag("--lifelong", run_opts.lifelong, "persist the scene graph across goals");
    run->add_option("--vocab", run_opts.vocab_path, "seed vocabulary file");
    run->add_option("--config", run_config, "config file (overrides flags)");

    // graph
    cli::GraphOptions graph_opts;
    auto* graph = app.add_subcommand("graph", "replay a trajectory into a graph snapshot");
    graph->add_option("--scene", graph_opts.scene_path, "scene file")->required();
    graph->add_option("--trajectory", graph_opts.trajectory_path, "trajectory file")->required();
    graph->add_option("--out", graph_opts.out_path, "snapshot output path")->required();
    graph->add_option("--vocab", graph_opts.vocab_path, "seed vocabulary file");

    // viewpoint
    cli::ViewpointOptions vp_opts;
    std::vector<double> radii;
    auto* vp = app.add_subcommand("viewpoint", "score candidate viewpoints for a target");
    vp->add_option("--scene", vp_opts.scene_path, "scene file")->required();
    vp->add_option("--target-id", vp_opts.target_id, "ground-truth object id")->required();
    vp->add_option("--radii", radii, "sampling ring radii, meters");
    vp->add_option("--samples", vp_opts.vvd.samples_per_ring, "samples per ring (K)");
    vp->add_option("--camera-height", vp_opts.vvd.camera_height, "camera height, meters");
    vp->add_option("--tau", vp_opts.vvd.obstruction_distance, "obstruction distance, meters");
    vp->add_option("--clearance", vp_opts.vvd.clearance, "traversability clearance, meters");
    vp->add_option("--viewpoint-radius", vp_opts.viewpoint_radius,
                   "ground-truth viewpoint radius, meters");
    vp->add_option("--out", vp_opts.out_path, "candidate table output (JSON)");
    vp->add_option("--plot-data", vp_opts.plot_data_path, "score/distance CSV output");

    // stats
    cli::StatsOptions stats_opts;
    auto* stats = app.add_subcommand("stats", "aggregate transcript efficiency statistics");
    stats->add_option("transcripts", stats_opts.transcripts, "transcript files");
    stats->add_option("--json", stats_opts.json_out, "machine-readable report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kConfigExit;
    }

    try {
        if (*run) {
            run_opts.vvd = vvd_str == "on";
            if (!run_config.empty()) cli::apply_config_file(run_opts, run_config);
            return cli::cmd_run(run_opts, std::cout);
        }
        if (*graph) return cli::cmd_graph(graph_opts, std::cout);
        if (*vp) {
            if (!radii.empty()) vp_opts.vvd.radii = radii;
            return cli::cmd_viewpoint(vp_opts, std::cout);
        }
        if (*stats) return cli::cmd_stats(stats_opts, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return cli::kConfigExit;
    } catch (const ProtocolError& e) {
        std::cerr << "reasoner protocol error: " << e.what() << "\n";
        return cli::kProtocolExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kRuntimeExit;
    }
    return cli::kOk;
}
