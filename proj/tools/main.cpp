#include <cstdio>
#include <cstdint>
#include <exception>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neurograph/errors.hpp"
#include "neurograph/experiment.hpp"
#include "neurograph/graph.hpp"

namespace {

using neurograph::MetricReport;

std::string fixed4(const std::optional<double>& v) {
    if (!v.has_value()) {
        return "NA";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

void print_summary(const MetricReport& report, const std::string& out_dir) {
    std::printf("snapshots: %zu  hidden layers: %d  classes: %d\n",
                report.snapshot_epochs.size(), report.layer_count, report.class_count);
    if (!report.train_accuracy.empty()) {
        std::printf("final accuracy: train %.4f  test %.4f\n", report.train_accuracy.back(),
                    report.test_accuracy.back());
    }
    for (const auto& row : report.correlations) {
        if (row.versus != "train_accuracy") {
            continue;
        }
        std::string label = row.metric;
        if (!row.scope.empty()) {
            label += " (" + row.scope + ")";
        }
        if (row.layer > 0) {
            label += " (layer " + std::to_string(row.layer) + ")";
        }
        if (!row.pcc.has_value() || !row.scc.has_value()) {
            std::fprintf(stderr, "warning: %s vs train accuracy is NA (degenerate series)\n",
                         label.c_str());
        }
        std::printf("%-40s vs train acc: PCC %-8s SCC %-8s n=%d\n", label.c_str(),
                    fixed4(row.pcc).c_str(), fixed4(row.scc).c_str(), row.points);
    }
    std::printf("outputs written to %s\n", out_dir.c_str());
}

int cmd_inspect(const std::string& dir, int snapshot, int layer) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot%02d_layer%d", snapshot, layer);
    const std::string base = dir + "/graphs/" + name;
    const neurograph::PatternGraph graph = neurograph::read_edge_list(base + ".csv");
    const auto edges = neurograph::edge_list(graph);

    double total = 0.0;
    double max_weight = 0.0;
    for (const auto& e : edges) {
        total += e.w;
        max_weight = std::max(max_weight, e.w);
    }
    std::printf("graph %s\n", (base + ".csv").c_str());
    std::printf("nodes: %td  edges: %zu  total weight: %.6f  max weight: %.6f\n",
                graph.node_count(), edges.size(), total, max_weight);
    if (graph.node_count() > 0) {
        std::printf("mean degree: %.3f\n",
                    2.0 * static_cast<double>(edges.size()) /
                        static_cast<double>(graph.node_count()));
    }

    std::vector<neurograph::Edge> top = edges;
    std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) {
        if (a.w != b.w) return a.w > b.w;
        return std::tie(a.u, a.v) < std::tie(b.u, b.v);
    });
    const std::size_t show = std::min<std::size_t>(top.size(), 5);
    for (std::size_t i = 0; i < show; ++i) {
        std::printf("  heaviest edge %zu: (%td, %td) w=%.6f\n", i + 1, top[i].u, top[i].v,
                    top[i].w);
    }

    std::ifstream classes(base + "_classes.csv");
    if (classes) {
        std::string line;
        std::getline(classes, line);  // header
        std::map<int, int> counts;
        while (std::getline(classes, line)) {
            long long node = 0;
            int class_id = 0;
            if (std::sscanf(line.c_str(), "%lld,%d", &node, &class_id) == 2) {
                ++counts[class_id];
            }
        }
        std::printf("class memberships:");
        for (const auto& [class_id, count] : counts) {
            std::printf(" %d:%d", class_id, count);
        }
        std::printf("\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"activation-pattern graph analysis of MLP training"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    CLI::App* run = app.add_subcommand("run", "train a model and analyze its snapshots");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--out", out_dir, "output directory (overrides the config)");
    CLI::Option* seed_option =
        run->add_option("--seed", seed, "master seed (overrides the config)");

    std::string snapshots_dir;
    CLI::App* metrics =
        app.add_subcommand("metrics", "re-analyze a finished run directory without retraining");
    metrics
        ->add_option("--snapshots", snapshots_dir,
                     "run directory containing config.json, accuracy.csv and checkpoints/")
        ->required();

    int layer = 1;
    int snapshot = 1;
    std::string graph_dir = "out";
    CLI::App* inspect =
        app.add_subcommand("inspect-graph", "summarize one exported pattern graph");
    inspect->add_option("--layer", layer, "1-based hidden layer index")->required();
    inspect->add_option("--snapshot", snapshot, "1-based snapshot index")->required();
    inspect->add_option("--dir", graph_dir, "run directory (default: out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            neurograph::ExperimentConfig config = neurograph::load_config(config_path);
            if (!out_dir.empty()) {
                config.out_dir = out_dir;
            }
            if (seed_option->count() > 0) {
                config.seed = seed;
            }
            const MetricReport report = neurograph::run_experiment(config);
            print_summary(report, config.out_dir);
            return 0;
        }
        if (metrics->parsed()) {
            const MetricReport report = neurograph::recompute_metrics(snapshots_dir);
            print_summary(report, snapshots_dir);
            return 0;
        }
        return cmd_inspect(graph_dir, snapshot, layer);
    } catch (const neurograph::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const neurograph::pipeline_error& e) {
        std::fprintf(stderr, "pipeline error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
