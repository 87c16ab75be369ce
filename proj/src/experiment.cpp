#include "neurograph/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "neurograph/activation.hpp"
#include "neurograph/community.hpp"
#include "neurograph/errors.hpp"
#include "neurograph/graph.hpp"
#include "neurograph/mlp.hpp"
#include "neurograph/modularity.hpp"
#include "neurograph/rng.hpp"
#include "neurograph/stats.hpp"

namespace neurograph {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

// Metric names that belong in modularity.csv; the community-size statistics
// are derivable from community_sizes.csv and are not duplicated there.
bool is_modularity_metric(const std::string& name) {
    return name != "avg_community_size" && name != "community_count";
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
    return v.has_value() ? fmt_double(*v) : "NA";
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw config_error("config: unknown key \"" + it.key() + "\" in " + where);
        }
    }
}

template <typename T>
T value_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) {
        return fallback;
    }
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error(std::string("config: bad value for \"") + key + "\"");
    }
}

DatasetConfig parse_dataset(const json& obj) {
    require_keys(obj, "dataset",
                 {"kind", "manifest", "train_images", "train_labels", "test_images",
                  "test_labels", "train_cap", "test_cap", "shuffle_labels", "classes",
                  "per_class", "dim", "spread"});
    DatasetConfig d;
    const auto kind = value_or<std::string>(obj, "kind", "idx");
    if (kind == "idx") {
        d.kind = DatasetConfig::Kind::idx;
    } else if (kind == "synthetic") {
        d.kind = DatasetConfig::Kind::synthetic;
    } else {
        throw config_error("config: dataset.kind must be \"idx\" or \"synthetic\"");
    }
    d.manifest = value_or<std::string>(obj, "manifest", "");
    d.train_images = value_or<std::string>(obj, "train_images", "");
    d.train_labels = value_or<std::string>(obj, "train_labels", "");
    d.test_images = value_or<std::string>(obj, "test_images", "");
    d.test_labels = value_or<std::string>(obj, "test_labels", "");
    d.train_cap = value_or<Eigen::Index>(obj, "train_cap", 0);
    d.test_cap = value_or<Eigen::Index>(obj, "test_cap", 0);
    d.shuffle_labels = value_or<bool>(obj, "shuffle_labels", false);
    d.classes = value_or<int>(obj, "classes", 3);
    d.per_class = value_or<int>(obj, "per_class", 100);
    d.dim = value_or<int>(obj, "dim", 20);
    d.spread = value_or<double>(obj, "spread", 0.15);

    if (d.kind == DatasetConfig::Kind::idx) {
        const bool have_paths = !d.train_images.empty() && !d.train_labels.empty() &&
                                !d.test_images.empty() && !d.test_labels.empty();
        if (d.manifest.empty() && !have_paths) {
            throw config_error(
                "config: idx dataset needs a manifest or all four image/label paths");
        }
        if (d.train_cap < 0 || d.test_cap < 0) {
            throw config_error("config: dataset caps must be non-negative");
        }
    } else {
        if (d.classes < 2) {
            throw config_error("config: synthetic dataset needs at least 2 classes");
        }
        if (d.per_class < 5) {
            throw config_error(
                "config: synthetic per_class must be at least 5 (80/20 split needs one "
                "test sample per class)");
        }
        if (d.dim < 1 || d.spread < 0.0) {
            throw config_error("config: synthetic dim must be positive and spread non-negative");
        }
    }
    return d;
}

void validate_config(const ExperimentConfig& c) {
    if (c.schema != kSchemaVersion) {
        throw config_error("config: unsupported schema version " + std::to_string(c.schema));
    }
    if (c.hidden_sizes.empty()) {
        throw config_error("config: architecture.hidden must be non-empty");
    }
    for (int h : c.hidden_sizes) {
        if (h < 1) {
            throw config_error("config: hidden layer widths must be positive");
        }
    }
    if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
        throw config_error("config: dropout must be in [0, 1)");
    }
    if (c.epochs < 1 || c.batch_size < 1) {
        throw config_error("config: epochs and batch_size must be positive");
    }
    if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
        throw config_error("config: learning_rate must be non-negative and finite");
    }
    if (c.snapshot_count < 2) {
        throw config_error("config: snapshot_count must be at least 2");
    }
    if (c.snapshot_count > c.epochs) {
        throw config_error("config: snapshot_count must not exceed epochs");
    }
    if (c.capture_cap < 1) {
        throw config_error("config: capture_cap must be positive");
    }
    if (c.representatives < 1) {
        throw config_error("config: representatives must be at least 1");
    }
    if (c.entropy.bins < 2) {
        throw config_error("config: entropy.bins must be at least 2");
    }
    if (!(c.resolution > 0.0)) {
        throw config_error("config: resolution must be positive");
    }
    if (c.out_dir.empty()) {
        throw config_error("config: out_dir must be non-empty");
    }
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) {
        throw config_error("config: top level must be a JSON object");
    }
    require_keys(doc, "config",
                 {"schema", "seed", "out_dir", "dataset", "architecture", "training",
                  "snapshot_count", "capture_cap", "representatives", "entropy", "resolution",
                  "metrics", "save_checkpoints", "save_graphs", "save_activations"});
    if (!doc.contains("schema")) {
        throw config_error("config: missing \"schema\" field");
    }
    if (!doc.contains("dataset")) {
        throw config_error("config: missing \"dataset\" section");
    }

    ExperimentConfig c;
    c.schema = value_or<int>(doc, "schema", 0);
    c.seed = value_or<std::uint64_t>(doc, "seed", 1);
    c.out_dir = value_or<std::string>(doc, "out_dir", "out");
    c.dataset = parse_dataset(doc.at("dataset"));

    if (doc.contains("architecture")) {
        const json& arch = doc.at("architecture");
        require_keys(arch, "architecture", {"hidden", "dropout"});
        c.hidden_sizes = value_or<std::vector<int>>(arch, "hidden", c.hidden_sizes);
        c.dropout_rate = value_or<double>(arch, "dropout", c.dropout_rate);
    }
    if (doc.contains("training")) {
        const json& train = doc.at("training");
        require_keys(train, "training", {"epochs", "batch_size", "learning_rate"});
        c.epochs = value_or<int>(train, "epochs", c.epochs);
        c.batch_size = value_or<int>(train, "batch_size", c.batch_size);
        c.learning_rate = value_or<double>(train, "learning_rate", c.learning_rate);
    }
    c.snapshot_count = value_or<int>(doc, "snapshot_count", c.snapshot_count);
    c.capture_cap = value_or<Eigen::Index>(doc, "capture_cap", c.capture_cap);
    c.representatives = value_or<Eigen::Index>(doc, "representatives", c.representatives);
    if (doc.contains("entropy")) {
        const json& ent = doc.at("entropy");
        require_keys(ent, "entropy", {"bins", "log_base"});
        c.entropy.bins = value_or<int>(ent, "bins", c.entropy.bins);
        if (ent.contains("log_base")) {
            const json& base = ent.at("log_base");
            if (base.is_number() && base.get<double>() == 2.0) {
                c.entropy.log_base_2 = true;
            } else if (base.is_string() && base.get<std::string>() == "2") {
                c.entropy.log_base_2 = true;
            } else if (base.is_string() && base.get<std::string>() == "e") {
                c.entropy.log_base_2 = false;
            } else {
                throw config_error("config: entropy.log_base must be 2 or \"e\"");
            }
        }
    }
    c.resolution = value_or<double>(doc, "resolution", c.resolution);
    if (doc.contains("metrics")) {
        const auto names = value_or<std::vector<std::string>>(doc, "metrics", {});
        c.metric_entropy = false;
        c.metric_modularity = false;
        c.metric_communities = false;
        c.metric_unique_neurons = false;
        for (const std::string& name : names) {
            if (name == "entropy") {
                c.metric_entropy = true;
            } else if (name == "modularity") {
                c.metric_modularity = true;
            } else if (name == "communities") {
                c.metric_communities = true;
            } else if (name == "unique_neurons") {
                c.metric_unique_neurons = true;
            } else {
                throw config_error("config: unknown metric \"" + name + "\"");
            }
        }
    }
    c.save_checkpoints = value_or<bool>(doc, "save_checkpoints", true);
    c.save_graphs = value_or<bool>(doc, "save_graphs", true);
    c.save_activations = value_or<bool>(doc, "save_activations", false);

    validate_config(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw config_error("cannot open config file " + path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return config_from_json_text(text);
}

void write_config(const std::string& path, const ExperimentConfig& c) {
    ordered_json doc;
    doc["schema"] = c.schema;
    doc["seed"] = c.seed;
    doc["out_dir"] = c.out_dir;
    ordered_json d;
    if (c.dataset.kind == DatasetConfig::Kind::idx) {
        d["kind"] = "idx";
        if (!c.dataset.manifest.empty()) {
            d["manifest"] = c.dataset.manifest;
        } else {
            d["train_images"] = c.dataset.train_images;
            d["train_labels"] = c.dataset.train_labels;
            d["test_images"] = c.dataset.test_images;
            d["test_labels"] = c.dataset.test_labels;
        }
        d["train_cap"] = c.dataset.train_cap;
        d["test_cap"] = c.dataset.test_cap;
        d["shuffle_labels"] = c.dataset.shuffle_labels;
    } else {
        d["kind"] = "synthetic";
        d["classes"] = c.dataset.classes;
        d["per_class"] = c.dataset.per_class;
        d["dim"] = c.dataset.dim;
        d["spread"] = c.dataset.spread;
        d["shuffle_labels"] = c.dataset.shuffle_labels;
    }
    doc["dataset"] = d;
    doc["architecture"] = {{"hidden", c.hidden_sizes}, {"dropout", c.dropout_rate}};
    doc["training"] = {{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"learning_rate", c.learning_rate}};
    doc["snapshot_count"] = c.snapshot_count;
    doc["capture_cap"] = c.capture_cap;
    doc["representatives"] = c.representatives;
    doc["entropy"] = {{"bins", c.entropy.bins}, {"log_base", c.entropy.log_base_2 ? "2" : "e"}};
    doc["resolution"] = c.resolution;
    std::vector<std::string> metrics;
    if (c.metric_entropy) metrics.emplace_back("entropy");
    if (c.metric_modularity) metrics.emplace_back("modularity");
    if (c.metric_communities) metrics.emplace_back("communities");
    if (c.metric_unique_neurons) metrics.emplace_back("unique_neurons");
    doc["metrics"] = metrics;
    doc["save_checkpoints"] = c.save_checkpoints;
    doc["save_graphs"] = c.save_graphs;
    doc["save_activations"] = c.save_activations;

    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw pipeline_error("cannot open " + path + " for writing");
    }
    out << doc.dump(2) << "\n";
    if (!out) {
        throw pipeline_error("error writing " + path);
    }
}

namespace {

// ---------------------------------------------------------------------------
// Dataset preparation
// ---------------------------------------------------------------------------

struct PreparedData {
    Dataset train;
    Dataset test;
};

PreparedData prepare_dataset(const ExperimentConfig& config) {
    const DatasetConfig& d = config.dataset;
    PreparedData data;
    if (d.kind == DatasetConfig::Kind::synthetic) {
        auto [train, test] = synth_blobs(d.classes, d.per_class, d.dim, d.spread,
                                         stage_seed(config.seed, "synth"));
        data.train = std::move(train);
        data.test = std::move(test);
    } else {
        std::string train_images = d.train_images;
        std::string train_labels = d.train_labels;
        std::string test_images = d.test_images;
        std::string test_labels = d.test_labels;
        if (!d.manifest.empty()) {
            const DatasetManifest m = read_dataset_manifest(d.manifest);
            train_images = m.train_images;
            train_labels = m.train_labels;
            test_images = m.test_images;
            test_labels = m.test_labels;
        }
        data.train = load_idx(train_images, train_labels, Split::train);
        data.test = load_idx(test_images, test_labels, Split::test);
        if (d.train_cap > 0 && data.train.sample_count() > d.train_cap) {
            data.train = stratified_subset(data.train, d.train_cap);
        }
        if (d.test_cap > 0 && data.test.sample_count() > d.test_cap) {
            data.test = stratified_subset(data.test, d.test_cap);
        }
    }
    const int classes = std::max(data.train.class_count, data.test.class_count);
    data.train.class_count = classes;
    data.test.class_count = classes;
    // The label-permutation control shuffles the capped splits independently;
    // the capping itself stratifies by the true labels.
    if (d.shuffle_labels) {
        data.train = shuffle_labels(data.train, stage_seed(config.seed, "label-shuffle-train"));
        data.test = shuffle_labels(data.test, stage_seed(config.seed, "label-shuffle-test"));
    }
    if (data.train.dim() != data.test.dim()) {
        throw pipeline_error("train/test feature dimensions differ");
    }
    return data;
}

// ---------------------------------------------------------------------------
// Per-snapshot analysis
// ---------------------------------------------------------------------------

struct SnapshotMetrics {
    double entropy_model = 0.0;
    std::map<int, double> entropy_class;
    std::vector<std::map<std::string, std::optional<double>>> layer_values;
    std::vector<std::vector<Eigen::Index>> sizes;   // per layer
    std::vector<Eigen::MatrixXi> unique;            // per layer; first/last only
};

std::string snapshot_file_name(const char* prefix, int snapshot, int layer,
                               const char* suffix) {
    char buf[96];
    if (layer > 0) {
        std::snprintf(buf, sizeof buf, "%s%02d_layer%d%s", prefix, snapshot, layer, suffix);
    } else {
        std::snprintf(buf, sizeof buf, "%s%02d%s", prefix, snapshot, suffix);
    }
    return buf;
}

SnapshotMetrics process_snapshot(const ExperimentConfig& config, const Model& model,
                                 const Dataset& train, int snapshot, bool is_first,
                                 bool is_last, const fs::path& out_dir) {
    const auto stage = [&](const std::string& name, auto&& fn) {
        try {
            return fn();
        } catch (const config_error&) {
            throw;
        } catch (const std::exception& e) {
            throw pipeline_error("stage " + name + ", snapshot " + std::to_string(snapshot) +
                                 ": " + e.what());
        }
    };

    const int layers = static_cast<int>(config.hidden_sizes.size());
    SnapshotMetrics sm;
    sm.layer_values.resize(static_cast<std::size_t>(layers));
    sm.sizes.resize(static_cast<std::size_t>(layers));
    sm.unique.resize(static_cast<std::size_t>(layers));

    const bool need_graphs = config.metric_modularity || config.metric_communities ||
                             config.metric_unique_neurons || config.save_graphs;

    const ActivationMatrix f = stage("capture", [&] {
        return record_activations(model, train, config.capture_cap);
    });
    if (config.save_activations) {
        stage("save-activations", [&] {
            save_activations(
                (out_dir / "activations" / snapshot_file_name("snapshot", snapshot, 0, ".ngact"))
                    .string(),
                f);
            return 0;
        });
    }

    if (config.metric_entropy) {
        const ActivationMatrix f_norm = stage("normalize", [&] { return normalize_columns(f); });
        sm.entropy_model =
            stage("entropy", [&] { return model_entropy(f_norm, config.entropy).total; });
        std::vector<Eigen::Index> counts(static_cast<std::size_t>(f.class_count), 0);
        for (int label : f.labels) {
            ++counts[static_cast<std::size_t>(label)];
        }
        for (int i = 0; i < f.class_count; ++i) {
            if (counts[static_cast<std::size_t>(i)] == 0) {
                continue;
            }
            sm.entropy_class[i] = stage("class-entropy", [&] {
                return class_entropy(f, i, config.entropy).total;
            });
        }
    }

    if (!need_graphs) {
        return sm;
    }
    const ClassMeanActivations means =
        stage("class-means", [&] { return compute_class_means(f); });

    for (int layer = 1; layer <= layers; ++layer) {
        const auto lu = static_cast<std::size_t>(layer - 1);
        const LayerPatternGraph lp = stage("graph:l" + std::to_string(layer), [&] {
            return build_pattern_graph(f, means, layer - 1, config.representatives);
        });
        const PatternGraph& graph = lp.graph;
        const bool has_edges = graph.weights.sum() > 0.0;

        if (config.save_graphs) {
            stage("export-graph:l" + std::to_string(layer), [&] {
                const std::string base =
                    snapshot_file_name("snapshot", snapshot, layer, "");
                write_edge_list((out_dir / "graphs" / (base + ".csv")).string(), graph);
                write_membership_csv((out_dir / "graphs" / (base + "_classes.csv")).string(),
                                     lp.sets);
                return 0;
            });
        }

        auto& values = sm.layer_values[lu];
        if (config.metric_communities) {
            stage("louvain:l" + std::to_string(layer), [&] {
                const std::string name =
                    "louvain:s" + std::to_string(snapshot) + ":l" + std::to_string(layer);
                const LouvainResult result =
                    louvain(graph, config.resolution, stage_seed(config.seed, name));
                sm.sizes[lu] = community_sizes(result.partition);
                const double count = static_cast<double>(result.partition.community_count);
                values["community_count"] = count;
                values["avg_community_size"] =
                    count > 0.0 ? static_cast<double>(graph.node_count()) / count
                                : std::optional<double>{};
                values["louvain_q"] =
                    result.edgeless
                        ? std::optional<double>{}
                        : modularity_resolution(graph, result.partition.community,
                                                config.resolution);
                return 0;
            });
        }
        if (config.metric_modularity) {
            stage("modularity:l" + std::to_string(layer), [&] {
                if (!has_edges || graph.node_count() < 2) {
                    values["klb"] = std::nullopt;
                    values["no_overlap"] = std::nullopt;
                    values["unweighted_overlap"] = std::nullopt;
                    values["weighted_overlap"] = std::nullopt;
                    return 0;
                }
                const std::string name =
                    "klb:s" + std::to_string(snapshot) + ":l" + std::to_string(layer);
                const BisectionResult bisection =
                    kernighan_lin_bisect(graph, stage_seed(config.seed, name));
                values["klb"] = modularity_no_overlap(graph, bisection.partition);
                const Partition argmax = partition_from_covers(means, lp.sets, graph);
                values["no_overlap"] = modularity_no_overlap(graph, argmax);
                const Cover cover = cover_from_representatives(lp.sets, graph);
                values["unweighted_overlap"] = modularity_unweighted_overlap(graph, cover);
                values["weighted_overlap"] = modularity_weighted_overlap(graph, cover);
                return 0;
            });
        }
        if (config.metric_unique_neurons && (is_first || is_last)) {
            sm.unique[lu] = stage("unique-neurons:l" + std::to_string(layer), [&] {
                return unique_neuron_matrix(lp.sets, f.class_count);
            });
        }
    }
    return sm;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw pipeline_error("cannot open " + path.string() + " for writing");
    }
    return out;
}

void write_accuracy_csv(const fs::path& path, const MetricReport& report) {
    std::ofstream out = open_out(path);
    out << "snapshot,epoch,train_accuracy,test_accuracy\n";
    for (std::size_t i = 0; i < report.snapshot_epochs.size(); ++i) {
        out << (i + 1) << "," << report.snapshot_epochs[i] << ","
            << fmt_double(report.train_accuracy[i]) << ","
            << fmt_double(report.test_accuracy[i]) << "\n";
    }
}

void write_modularity_csv(const fs::path& path, const MetricReport& report) {
    std::ofstream out = open_out(path);
    out << "snapshot,layer,metric,value\n";
    for (std::size_t s = 0; s < report.snapshot_epochs.size(); ++s) {
        for (int layer = 1; layer <= report.layer_count; ++layer) {
            for (const auto& [metric, series] :
                 report.layer_series[static_cast<std::size_t>(layer - 1)]) {
                if (!is_modularity_metric(metric)) {
                    continue;
                }
                out << (s + 1) << "," << layer << "," << metric << "," << fmt_opt(series[s])
                    << "\n";
            }
        }
    }
}

void write_entropy_csv(const fs::path& path, const MetricReport& report) {
    std::ofstream out = open_out(path);
    out << "snapshot,scope,entropy\n";
    for (std::size_t s = 0; s < report.snapshot_epochs.size(); ++s) {
        out << (s + 1) << ",model," << fmt_double(report.entropy_model[s]) << "\n";
        for (std::size_t i = 0; i < report.entropy_class.size(); ++i) {
            if (report.entropy_class[i].empty()) {
                continue;
            }
            out << (s + 1) << ",class:" << i << "," << fmt_double(report.entropy_class[i][s])
                << "\n";
        }
    }
}

void write_community_sizes_csv(const fs::path& path, const MetricReport& report) {
    std::ofstream out = open_out(path);
    out << "snapshot,layer,rank,size\n";
    for (std::size_t s = 0; s < report.community_sizes.size(); ++s) {
        for (int layer = 1; layer <= report.layer_count; ++layer) {
            const auto& sizes = report.community_sizes[s][static_cast<std::size_t>(layer - 1)];
            const std::size_t rows = std::max<std::size_t>(sizes.size(), 8);
            for (std::size_t rank = 0; rank < rows; ++rank) {
                const Eigen::Index size = rank < sizes.size() ? sizes[rank] : 0;
                out << (s + 1) << "," << layer << "," << (rank + 1) << "," << size << "\n";
            }
        }
    }
}

void write_unique_csv(const fs::path& path, const std::vector<Eigen::MatrixXi>& matrices) {
    std::ofstream out = open_out(path);
    out << "layer,i,j,count\n";
    for (std::size_t l = 0; l < matrices.size(); ++l) {
        const Eigen::MatrixXi& m = matrices[l];
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                out << (l + 1) << "," << i << "," << j << "," << m(i, j) << "\n";
            }
        }
    }
}

void write_correlations_csv(const fs::path& path, const MetricReport& report) {
    std::ofstream out = open_out(path);
    out << "metric,scope,layer,versus,pcc,scc,points\n";
    for (const CorrelationRow& row : report.correlations) {
        out << row.metric << "," << row.scope << ",";
        if (row.layer > 0) {
            out << row.layer;
        }
        out << "," << row.versus << "," << fmt_opt(row.pcc) << "," << fmt_opt(row.scc) << ","
            << row.points << "\n";
    }
}

void write_plotdata(const fs::path& path, const MetricReport& report, bool with_entropy) {
    ordered_json doc;
    doc["iterations"] = report.snapshot_epochs;
    doc["train_accuracy"] = report.train_accuracy;
    doc["test_accuracy"] = report.test_accuracy;
    if (with_entropy) {
        const NormalizedSeries normalized = normalize_series(report.entropy_model);
        doc["normalized_entropy"] = normalized.values;
        doc["entropy_constant"] = normalized.constant;
    }
    std::ofstream out = open_out(path);
    out << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Correlation assembly
// ---------------------------------------------------------------------------

void add_correlations(MetricReport& report, const std::string& metric, const std::string& scope,
                      int layer, const std::vector<std::optional<double>>& series) {
    const std::pair<const char*, const std::vector<double>*> targets[] = {
        {"train_accuracy", &report.train_accuracy},
        {"test_accuracy", &report.test_accuracy},
    };
    for (const auto& [versus, accuracy] : targets) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (series[i].has_value()) {
                xs.push_back(*series[i]);
                ys.push_back((*accuracy)[i]);
            }
        }
        CorrelationRow row;
        row.metric = metric;
        row.scope = scope;
        row.layer = layer;
        row.versus = versus;
        row.points = static_cast<int>(xs.size());
        row.pcc = pearson(xs, ys);
        row.scc = spearman(xs, ys);
        report.correlations.push_back(std::move(row));
    }
}

std::vector<std::optional<double>> to_optional(const std::vector<double>& values) {
    return {values.begin(), values.end()};
}

// Runs the per-snapshot analysis over every model, assembles the report, and
// writes the metric outputs. Shared by the full run and by re-analysis.
MetricReport analyze_and_write(const ExperimentConfig& config, const fs::path& out_dir,
                               std::vector<int> epochs, std::vector<double> train_accuracy,
                               std::vector<double> test_accuracy,
                               const std::vector<const Model*>& models, const Dataset& train) {
    const auto snapshots = static_cast<int>(models.size());
    const int layers = static_cast<int>(config.hidden_sizes.size());

    if (config.save_graphs) {
        fs::create_directories(out_dir / "graphs");
    }
    if (config.save_activations) {
        fs::create_directories(out_dir / "activations");
    }

    std::vector<SnapshotMetrics> results(static_cast<std::size_t>(snapshots));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(snapshots));
    {
        std::atomic<int> next{0};
        const int workers =
            std::max(1, std::min(snapshot_thread_cap(), snapshots));
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < snapshots; i = next.fetch_add(1)) {
                    const auto iu = static_cast<std::size_t>(i);
                    try {
                        results[iu] = process_snapshot(config, *models[iu], train, i + 1,
                                                       i == 0, i + 1 == snapshots, out_dir);
                    } catch (...) {
                        failures[iu] = std::current_exception();
                    }
                }
            });
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    for (const std::exception_ptr& failure : failures) {
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    MetricReport report;
    report.snapshot_epochs = std::move(epochs);
    report.train_accuracy = std::move(train_accuracy);
    report.test_accuracy = std::move(test_accuracy);
    report.layer_count = layers;
    report.class_count = train.class_count;
    report.layer_series.resize(static_cast<std::size_t>(layers));
    report.entropy_class.resize(static_cast<std::size_t>(train.class_count));

    for (int s = 0; s < snapshots; ++s) {
        const SnapshotMetrics& sm = results[static_cast<std::size_t>(s)];
        if (config.metric_entropy) {
            report.entropy_model.push_back(sm.entropy_model);
            for (const auto& [class_id, value] : sm.entropy_class) {
                report.entropy_class[static_cast<std::size_t>(class_id)].push_back(value);
            }
        }
        for (int l = 0; l < layers; ++l) {
            for (const auto& [metric, value] : sm.layer_values[static_cast<std::size_t>(l)]) {
                report.layer_series[static_cast<std::size_t>(l)][metric].push_back(value);
            }
        }
    }
    if (config.metric_communities) {
        report.community_sizes.reserve(static_cast<std::size_t>(snapshots));
        for (int s = 0; s < snapshots; ++s) {
            report.community_sizes.push_back(results[static_cast<std::size_t>(s)].sizes);
        }
    }
    if (config.metric_unique_neurons) {
        report.unique_first = results.front().unique;
        report.unique_last = results.back().unique;
    }

    if (config.metric_entropy) {
        add_correlations(report, "entropy", "model", 0, to_optional(report.entropy_model));
        for (std::size_t i = 0; i < report.entropy_class.size(); ++i) {
            if (!report.entropy_class[i].empty()) {
                add_correlations(report, "entropy", "class:" + std::to_string(i), 0,
                                 to_optional(report.entropy_class[i]));
            }
        }
    }
    for (int l = 1; l <= layers; ++l) {
        for (const auto& [metric, series] : report.layer_series[static_cast<std::size_t>(l - 1)]) {
            add_correlations(report, metric, "", l, series);
        }
    }

    if (config.metric_entropy) {
        write_entropy_csv(out_dir / "entropy.csv", report);
    }
    if (config.metric_modularity || config.metric_communities) {
        write_modularity_csv(out_dir / "modularity.csv", report);
    }
    if (config.metric_communities) {
        write_community_sizes_csv(out_dir / "community_sizes.csv", report);
    }
    if (config.metric_unique_neurons) {
        write_unique_csv(out_dir / "unique_neurons_first.csv", report.unique_first);
        write_unique_csv(out_dir / "unique_neurons_last.csv", report.unique_last);
    }
    write_correlations_csv(out_dir / "correlations.csv", report);
    write_plotdata(out_dir / "plotdata.json", report, config.metric_entropy);
    return report;
}

}  // namespace

int snapshot_thread_cap() {
    if (const char* env = std::getenv("NEUROGRAPH_THREADS")) {
        char* end = nullptr;
        const long value = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || value < 1) {
            throw config_error("NEUROGRAPH_THREADS must be a positive integer");
        }
        return static_cast<int>(value);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

const std::vector<std::optional<double>>& MetricReport::series(int layer,
                                                               const std::string& metric) const {
    if (layer < 1 || layer > layer_count) {
        throw pipeline_error("report: layer " + std::to_string(layer) + " out of range");
    }
    const auto& by_metric = layer_series[static_cast<std::size_t>(layer - 1)];
    const auto it = by_metric.find(metric);
    if (it == by_metric.end()) {
        throw pipeline_error("report: no series for metric \"" + metric + "\"");
    }
    return it->second;
}

const CorrelationRow* MetricReport::find_correlation(const std::string& metric,
                                                     const std::string& scope, int layer,
                                                     const std::string& versus) const {
    for (const CorrelationRow& row : correlations) {
        if (row.metric == metric && row.scope == scope && row.layer == layer &&
            row.versus == versus) {
            return &row;
        }
    }
    return nullptr;
}

MetricReport run_experiment(const ExperimentConfig& config) {
    validate_config(config);
    const fs::path out_dir(config.out_dir);
    fs::create_directories(out_dir);
    write_config((out_dir / "config.json").string(), config);

    const PreparedData data = prepare_dataset(config);

    Architecture arch;
    arch.input_dim = static_cast<int>(data.train.dim());
    arch.hidden_sizes = config.hidden_sizes;
    arch.output_classes = data.train.class_count;
    arch.dropout_rate = config.dropout_rate;

    TrainConfig tc;
    tc.epochs = config.epochs;
    tc.batch_size = config.batch_size;
    tc.learning_rate = config.learning_rate;
    tc.snapshot_count = config.snapshot_count;
    tc.init_seed = stage_seed(config.seed, "init");
    tc.shuffle_seed = stage_seed(config.seed, "shuffle");
    tc.dropout_seed = stage_seed(config.seed, "dropout");

    SnapshotSeries series;
    try {
        series = train_with_snapshots(arch, data.train, data.test, tc);
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        throw pipeline_error(std::string("stage train: ") + e.what());
    }

    std::vector<int> epochs;
    std::vector<double> train_accuracy;
    std::vector<double> test_accuracy;
    std::vector<const Model*> models;
    for (const Snapshot& snap : series.snapshots) {
        epochs.push_back(snap.epoch);
        train_accuracy.push_back(snap.train_accuracy);
        test_accuracy.push_back(snap.test_accuracy);
        models.push_back(&snap.model);
    }

    {
        MetricReport header;
        header.snapshot_epochs = epochs;
        header.train_accuracy = train_accuracy;
        header.test_accuracy = test_accuracy;
        write_accuracy_csv(out_dir / "accuracy.csv", header);
    }
    if (config.save_checkpoints) {
        fs::create_directories(out_dir / "checkpoints");
        for (std::size_t i = 0; i < series.snapshots.size(); ++i) {
            save_checkpoint((out_dir / "checkpoints" /
                             snapshot_file_name("snapshot", static_cast<int>(i + 1), 0, ".ngmdl"))
                                .string(),
                            series.snapshots[i].model);
        }
    }

    return analyze_and_write(config, out_dir, std::move(epochs), std::move(train_accuracy),
                             std::move(test_accuracy), models, data.train);
}

MetricReport recompute_metrics(const std::string& run_dir) {
    const fs::path dir(run_dir);
    ExperimentConfig config = load_config((dir / "config.json").string());
    const PreparedData data = prepare_dataset(config);

    std::ifstream acc(dir / "accuracy.csv");
    if (!acc) {
        throw pipeline_error("cannot open " + (dir / "accuracy.csv").string());
    }
    std::string line;
    if (!std::getline(acc, line) || line != "snapshot,epoch,train_accuracy,test_accuracy") {
        throw pipeline_error((dir / "accuracy.csv").string() + ": unexpected header");
    }
    std::vector<int> epochs;
    std::vector<double> train_accuracy;
    std::vector<double> test_accuracy;
    while (std::getline(acc, line)) {
        if (line.empty()) {
            continue;
        }
        int snapshot = 0;
        int epoch = 0;
        double train_value = 0.0;
        double test_value = 0.0;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &snapshot, &epoch, &train_value,
                        &test_value) != 4) {
            throw pipeline_error((dir / "accuracy.csv").string() + ": malformed row \"" + line +
                                 "\"");
        }
        epochs.push_back(epoch);
        train_accuracy.push_back(train_value);
        test_accuracy.push_back(test_value);
    }
    if (static_cast<int>(epochs.size()) != config.snapshot_count) {
        throw pipeline_error("accuracy.csv has " + std::to_string(epochs.size()) +
                             " snapshots, config says " + std::to_string(config.snapshot_count));
    }

    std::vector<Model> loaded;
    loaded.reserve(epochs.size());
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const fs::path path =
            dir / "checkpoints" /
            snapshot_file_name("snapshot", static_cast<int>(i + 1), 0, ".ngmdl");
        loaded.push_back(load_checkpoint(path.string()));
        const Model& model = loaded.back();
        if (model.input_dim() != static_cast<int>(data.train.dim()) ||
            model.layer_count() != static_cast<int>(config.hidden_sizes.size()) + 1) {
            throw pipeline_error(path.string() + ": checkpoint does not match the config");
        }
    }
    std::vector<const Model*> models;
    for (const Model& model : loaded) {
        models.push_back(&model);
    }

    return analyze_and_write(config, dir, std::move(epochs), std::move(train_accuracy),
                             std::move(test_accuracy), models, data.train);
}

Table5 table5_from_report(const MetricReport& report) {
    Table5 table;
    table.rows = {"klb", "no_overlap", "unweighted_overlap", "weighted_overlap"};
    for (const std::string& metric : table.rows) {
        std::vector<std::pair<std::optional<double>, std::optional<double>>> row;
        for (int layer = 1; layer <= report.layer_count; ++layer) {
            const CorrelationRow* c =
                report.find_correlation(metric, "", layer, "train_accuracy");
            row.emplace_back(c != nullptr ? c->pcc : std::nullopt,
                             c != nullptr ? c->scc : std::nullopt);
        }
        table.cells.push_back(std::move(row));
    }
    return table;
}

Table5 table5_runner(const ExperimentConfig& config) {
    return table5_from_report(run_experiment(config));
}

Table3 table3_from_report(const MetricReport& report) {
    Table3 table;
    const auto pad8 = [](std::vector<Eigen::Index> sizes) {
        sizes.resize(std::max<std::size_t>(sizes.size(), 8), 0);
        sizes.resize(8);
        return sizes;
    };
    if (!report.community_sizes.empty() && report.layer_count > 0) {
        const auto layer = static_cast<std::size_t>(report.layer_count - 1);
        table.first_sizes = pad8(report.community_sizes.front()[layer]);
        table.last_sizes = pad8(report.community_sizes.back()[layer]);
    }
    const CorrelationRow* c = report.find_correlation("avg_community_size", "",
                                                      report.layer_count, "train_accuracy");
    if (c != nullptr) {
        table.pcc = c->pcc;
    }
    return table;
}

Table3 table3_runner(const ExperimentConfig& config) {
    return table3_from_report(run_experiment(config));
}

}  // namespace neurograph
