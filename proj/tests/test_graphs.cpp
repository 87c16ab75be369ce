#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "neurograph/activation.hpp"
#include "neurograph/community.hpp"
#include "neurograph/entropy.hpp"
#include "neurograph/errors.hpp"
#include "neurograph/graph.hpp"
#include "neurograph/mlp.hpp"
#include "neurograph/modularity.hpp"
#include "neurograph/rng.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace neurograph;
namespace fs = std::filesystem;

namespace {

ActivationMatrix make_f(FeatureMatrix values, std::vector<Eigen::Index> offsets,
                        std::vector<int> labels, int class_count) {
    ActivationMatrix f;
    f.values = std::move(values);
    f.layer_offsets = std::move(offsets);
    f.labels = std::move(labels);
    f.class_count = class_count;
    return f;
}

PatternGraph unit_graph(Eigen::Index n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<Edge> list;
    for (const auto& [u, v] : edges) {
        list.push_back({u, v, 1.0});
    }
    return make_graph(n, list);
}

PatternGraph two_triangles() {
    return unit_graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}});
}

PatternGraph bridged_triangles() {
    return unit_graph(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}});
}

PatternGraph shared_vertex_triangles() {
    return unit_graph(5, {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {2, 4}, {3, 4}});
}

Partition partition_of(std::vector<int> community) {
    Partition p;
    p.community = std::move(community);
    p.community_count =
        p.community.empty() ? 0 : *std::max_element(p.community.begin(), p.community.end()) + 1;
    return p;
}

// Random graph with at least one edge, unit or fractional weights.
PatternGraph random_graph(Rng& rng, Eigen::Index max_nodes) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(static_cast<std::uint64_t>(max_nodes - 1)));
    std::vector<Edge> edges;
    for (Eigen::Index u = 0; u < n; ++u) {
        for (Eigen::Index v = u + 1; v < n; ++v) {
            if (rng.uniform() < 0.45) {
                const double w = rng.uniform() < 0.5 ? 1.0 : 0.25 + rng.uniform();
                edges.push_back({u, v, w});
            }
        }
    }
    if (edges.empty()) {
        edges.push_back({0, 1, 1.0});
    }
    return make_graph(n, edges);
}

std::vector<int> random_partition(Rng& rng, Eigen::Index n) {
    std::vector<int> community;
    int used = 0;
    for (Eigen::Index v = 0; v < n; ++v) {
        const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(used + 1)));
        community.push_back(c);
        used = std::max(used, c + 1);
    }
    return community;
}

}  // namespace

TEST_CASE("activation capture matches a direct forward pass") {
    Model model;
    model.weights = {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
    model.biases = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};

    Dataset ds;
    ds.split = Split::train;
    ds.class_count = 2;
    ds.features = FeatureMatrix::Zero(2, 2);
    ds.features << 1.0, 0.0, 0.0, 1.0;
    ds.labels = {0, 1};

    const ActivationMatrix f = record_activations(model, ds, 2);
    CHECK(f.rows() == 2);
    CHECK(f.cols() == 2);  // output layer excluded
    CHECK(f.layer_count() == 1);
    CHECK(f.values == ds.features);  // identity + ReLU of non-negatives
    CHECK(f.labels == ds.labels);
}

TEST_CASE("activation capture caps rows stratified by class") {
    Architecture arch;
    arch.input_dim = 3;
    arch.hidden_sizes = {4};
    arch.output_classes = 10;
    const Model model = init_model(arch, 5);

    Dataset ds;
    ds.split = Split::train;
    ds.class_count = 10;
    ds.features = FeatureMatrix::Random(1000, 3);
    for (int i = 0; i < 1000; ++i) {
        ds.labels.push_back(i % 10);
    }

    const ActivationMatrix capped = record_activations(model, ds, 100);
    CHECK(capped.rows() == 100);
    std::vector<int> counts(10, 0);
    for (int label : capped.labels) {
        ++counts[static_cast<std::size_t>(label)];
    }
    for (int count : counts) {
        CHECK(count == 10);
    }

    const ActivationMatrix full = record_activations(model, ds, 1000);
    CHECK(full.rows() == 1000);

    CHECK_THROWS_AS((void)record_activations(model, ds, 5), config_error);
}

TEST_CASE("column normalization and dead flagging") {
    FeatureMatrix values(3, 2);
    values << 1, 0, 1, 0, 2, 0;
    const ActivationMatrix f = make_f(values, {0, 2}, {0, 0, 0}, 1);
    const ActivationMatrix norm = normalize_columns(f);
    CHECK(norm.values(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(norm.values(1, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(norm.values(2, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(norm.values.col(1).isZero(0.0));
    REQUIRE(norm.dead_columns.size() == 2);
    CHECK_FALSE(norm.dead_columns[0]);
    CHECK(norm.dead_columns[1]);
    CHECK(norm.normalized);

    Rng rng(3);
    FeatureMatrix big(40, 12);
    for (Eigen::Index r = 0; r < big.rows(); ++r) {
        for (Eigen::Index c = 0; c < big.cols(); ++c) {
            big(r, c) = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
        }
    }
    const ActivationMatrix fr = make_f(big, {0, 12}, std::vector<int>(40, 0), 1);
    const ActivationMatrix nr = normalize_columns(fr);
    for (Eigen::Index c = 0; c < nr.cols(); ++c) {
        if (!nr.dead_columns[static_cast<std::size_t>(c)]) {
            CHECK(std::abs(nr.values.col(c).sum() - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("class means equal brute-force row averages") {
    FeatureMatrix values(3, 2);
    values << 1, 0, 0, 3, 2, 3;
    const ActivationMatrix f = make_f(values, {0, 2}, {0, 0, 0}, 1);
    const Eigen::VectorXd mean = class_mean_activation(f, 0, 0);
    CHECK(mean(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mean(1) == doctest::Approx(2.0).epsilon(1e-15));

    // One sample per class: the mean is that row.
    FeatureMatrix single(2, 3);
    single << 1, 2, 3, 4, 5, 6;
    const ActivationMatrix fs = make_f(single, {0, 3}, {0, 1}, 2);
    const ClassMeanActivations means = compute_class_means(fs);
    CHECK(means.means[0][0] == single.row(0).transpose());
    CHECK(means.means[1][0] == single.row(1).transpose());

    Rng rng(9);
    FeatureMatrix random(30, 6);
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        labels.push_back(static_cast<int>(rng.below(3)));
        for (int c = 0; c < 6; ++c) {
            random(i, c) = rng.uniform();
        }
    }
    const ActivationMatrix fr = make_f(random, {0, 4, 6}, labels, 3);
    for (int class_id = 0; class_id < 3; ++class_id) {
        for (int layer = 0; layer < 2; ++layer) {
            const Eigen::VectorXd got = class_mean_activation(fr, class_id, layer);
            const Eigen::Index begin = fr.layer_begin(layer);
            for (Eigen::Index j = 0; j < fr.layer_width(layer); ++j) {
                double sum = 0.0;
                int count = 0;
                for (int i = 0; i < 30; ++i) {
                    if (labels[static_cast<std::size_t>(i)] == class_id) {
                        sum += random(i, begin + j);
                        ++count;
                    }
                }
                CHECK(std::abs(got(j) - sum / count) <= 1e-12);
            }
        }
    }
}

TEST_CASE("top-S selection sorts by mean with id tie-break") {
    ClassMeanActivations means;
    means.class_counts = {1};
    means.means = {{Eigen::VectorXd(3)}};
    means.means[0][0] << 0.9, 0.1, 0.5;
    const RepresentativeSets sets = top_s_neurons(means, 0, 2);
    CHECK(sets.sets[0] == std::vector<Eigen::Index>{0, 2});

    means.means[0][0] << 0.4, 0.4, 0.4;
    CHECK(top_s_neurons(means, 0, 2).sets[0] == std::vector<Eigen::Index>{0, 1});

    CHECK_THROWS_AS((void)top_s_neurons(means, 0, 0), config_error);

    Rng rng(15);
    for (int round = 0; round < 30; ++round) {
        Eigen::VectorXd v(8);
        for (int i = 0; i < 8; ++i) {
            v(i) = static_cast<double>(rng.below(4));  // ties on purpose
        }
        means.means[0][0] = v;
        const auto got = top_s_neurons(means, 0, 3).sets[0];

        std::vector<Eigen::Index> order(8);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            if (v(a) != v(b)) return v(a) > v(b);
            return a < b;
        });
        std::vector<Eigen::Index> expected(order.begin(), order.begin() + 3);
        std::sort(expected.begin(), expected.end());
        CHECK(got == expected);
    }
}

TEST_CASE("co-activation counts strict exceedance of class means") {
    // Class rows: p = [1,0,2] (mean 1), q = [0,3,3] (mean 2); only the last
    // row exceeds both, so the edge weight is 1/3.
    FeatureMatrix values(3, 2);
    values << 1, 0, 0, 3, 2, 3;
    const ActivationMatrix f = make_f(values, {0, 2}, {0, 0, 0}, 1);
    const Eigen::VectorXd mean = class_mean_activation(f, 0, 0);
    const std::vector<Eigen::Index> nodes{0, 1};
    const Eigen::MatrixXd a = coactivation_matrix(f, mean, nodes, nodes, 0, 0);
    CHECK(a(0, 1) == 1.0 / 3.0);
    CHECK(a(1, 0) == 1.0 / 3.0);
    CHECK(a(0, 0) == 0.0);
    CHECK(a(1, 1) == 0.0);

    // A constant neuron never strictly exceeds its own mean.
    FeatureMatrix constant(3, 2);
    constant << 5, 0, 5, 3, 5, 9;
    const ActivationMatrix fc = make_f(constant, {0, 2}, {0, 0, 0}, 1);
    const Eigen::VectorXd mc = class_mean_activation(fc, 0, 0);
    const Eigen::MatrixXd ac = coactivation_matrix(fc, mc, nodes, nodes, 0, 0);
    CHECK(ac.row(0).isZero(0.0));
    CHECK(ac.col(0).isZero(0.0));
}

TEST_CASE("co-activation equals a brute-force triple loop exactly") {
    Rng rng(23);
    for (int round = 0; round < 20; ++round) {
        const int rows = 12;
        const int cols = 5;
        FeatureMatrix values(rows, cols);
        std::vector<int> labels;
        for (int i = 0; i < rows; ++i) {
            labels.push_back(i < 6 ? 0 : 1);
            for (int c = 0; c < cols; ++c) {
                values(i, c) = static_cast<double>(rng.below(4));
            }
        }
        const ActivationMatrix f = make_f(values, {0, cols}, labels, 2);
        const Eigen::VectorXd mean = class_mean_activation(f, 0, 0);

        std::vector<Eigen::Index> nodes(cols);
        std::iota(nodes.begin(), nodes.end(), 0);
        const std::vector<Eigen::Index> class_set{0, 2, 3};
        const Eigen::MatrixXd got = coactivation_matrix(f, mean, nodes, class_set, 0, 0);

        for (Eigen::Index p = 0; p < cols; ++p) {
            for (Eigen::Index q = 0; q < cols; ++q) {
                double expected = 0.0;
                const bool p_in = std::find(class_set.begin(), class_set.end(), p) != class_set.end();
                const bool q_in = std::find(class_set.begin(), class_set.end(), q) != class_set.end();
                if (p != q && p_in && q_in) {
                    int hits = 0;
                    int class_rows = 0;
                    for (int i = 0; i < rows; ++i) {
                        if (labels[static_cast<std::size_t>(i)] != 0) continue;
                        ++class_rows;
                        if (values(i, p) > mean(p) && values(i, q) > mean(q)) {
                            ++hits;
                        }
                    }
                    expected = static_cast<double>(hits) / class_rows;
                }
                CHECK(got(p, q) == expected);
            }
        }
    }
}

TEST_CASE("per-class adjacencies sum into the layer graph") {
    const std::vector<Eigen::Index> nodes{0, 1};
    Eigen::MatrixXd a(2, 2);
    a << 0, 0.5, 0.5, 0;
    const PatternGraph summed = build_graph(nodes, {a, a});
    CHECK(summed.weights(0, 1) == 1.0);
    CHECK(summed.weights(1, 0) == 1.0);

    const PatternGraph empty = build_graph(nodes, {Eigen::MatrixXd::Zero(2, 2)});
    CHECK(empty.node_count() == 2);
    CHECK(edge_list(empty).empty());

    Rng rng(31);
    std::vector<Eigen::MatrixXd> three;
    for (int k = 0; k < 3; ++k) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 4);
        for (int p = 0; p < 4; ++p) {
            for (int q = p + 1; q < 4; ++q) {
                m(p, q) = m(q, p) = rng.uniform();
            }
        }
        three.push_back(m);
    }
    const std::vector<Eigen::Index> four{0, 1, 2, 3};
    const PatternGraph total = build_graph(four, three);
    for (int p = 0; p < 4; ++p) {
        for (int q = 0; q < 4; ++q) {
            CHECK(std::abs(total.weights(p, q) -
                           (three[0](p, q) + three[1](p, q) + three[2](p, q))) <= 1e-12);
        }
    }
}

TEST_CASE("unique neuron matrix counts exact dual memberships") {
    RepresentativeSets sets;
    sets.sets = {{1, 2}, {2, 3}};
    const Eigen::MatrixXi m = unique_neuron_matrix(sets, 2);
    CHECK(m(0, 0) == 1);  // neuron 1
    CHECK(m(0, 1) == 1);  // neuron 2
    CHECK(m(1, 0) == 1);
    CHECK(m(1, 1) == 1);  // neuron 3

    RepresentativeSets disjoint;
    disjoint.sets = {{0, 1}, {2, 3}, {4, 5}};
    const Eigen::MatrixXi d = unique_neuron_matrix(disjoint, 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(d(i, j) == (i == j ? 2 : 0));
        }
    }

    RepresentativeSets identical;
    identical.sets = {{0, 1}, {0, 1}, {0, 1}};
    CHECK(unique_neuron_matrix(identical, 3).isZero());
}

TEST_CASE("edge lists round trip through csv") {
    PatternGraph graph = make_graph(3, {{0, 1, 0.125}, {1, 2, 0.7500000000000013}});
    graph.nodes = {10, 20, 30};  // neuron ids need not be dense

    const fs::path dir = testutil::temp_dir();
    const std::string path = (dir / "graph.csv").string();
    write_edge_list(path, graph);
    const PatternGraph reread = read_edge_list(path);
    CHECK(reread.nodes == graph.nodes);
    CHECK(reread.weights == graph.weights);

    RepresentativeSets sets;
    sets.sets = {{10, 20}, {20, 30}};
    const std::string members = (dir / "graph_classes.csv").string();
    write_membership_csv(members, sets);
    const std::string text = testutil::read_file(members);
    CHECK(text == "node,class\n10,0\n20,0\n20,1\n30,1\n");
}

TEST_CASE("activation snapshots round trip binary") {
    Rng rng(77);
    FeatureMatrix values(6, 5);
    for (Eigen::Index r = 0; r < 6; ++r) {
        for (Eigen::Index c = 0; c < 5; ++c) {
            values(r, c) = static_cast<double>(static_cast<float>(rng.uniform()));
        }
    }
    const ActivationMatrix f = make_f(values, {0, 3, 5}, {0, 1, 2, 0, 1, 2}, 3);
    const fs::path dir = testutil::temp_dir();
    const std::string path = (dir / "acts.ngact").string();
    save_activations(path, f);
    const ActivationMatrix reread = load_activations(path);
    CHECK(reread.values == f.values);
    CHECK(reread.layer_offsets == f.layer_offsets);
    CHECK(reread.labels == f.labels);
    CHECK(reread.class_count == 3);

    std::string bytes = testutil::read_file(path);
    bytes[1] = 'X';
    std::ofstream(path, std::ios::binary) << bytes;
    CHECK_THROWS_AS((void)load_activations(path), pipeline_error);
}

// ---------------------------------------------------------------------------
// Modularity
// ---------------------------------------------------------------------------

TEST_CASE("plain modularity analytic fixtures") {
    const PatternGraph triangles = two_triangles();
    CHECK(std::abs(modularity_no_overlap(triangles, partition_of({0, 0, 0, 1, 1, 1})) - 0.5) <=
          1e-12);
    CHECK(std::abs(modularity_no_overlap(triangles, partition_of({0, 0, 0, 0, 0, 0}))) <= 1e-12);

    const PatternGraph edge = unit_graph(2, {{0, 1}});
    CHECK(std::abs(modularity_no_overlap(edge, partition_of({0, 1})) + 0.5) <= 1e-12);

    const PatternGraph empty = make_graph(2, {});
    CHECK_THROWS_AS((void)modularity_no_overlap(empty, partition_of({0, 1})), pipeline_error);
}

TEST_CASE("overlap variants reduce to the plain form on disjoint covers") {
    const PatternGraph triangles = two_triangles();
    const Partition partition = partition_of({0, 0, 0, 1, 1, 1});
    const Cover cover = cover_from_partition(partition);
    CHECK(std::abs(modularity_unweighted_overlap(triangles, cover) - 0.5) <= 1e-12);
    CHECK(std::abs(modularity_weighted_overlap(triangles, cover) - 0.5) <= 1e-12);

    const Cover whole = make_cover({{0, 1, 2, 3, 4, 5}}, 6);
    CHECK(std::abs(modularity_weighted_overlap(triangles, whole)) <= 1e-12);

    Rng rng(41);
    for (int round = 0; round < 25; ++round) {
        const PatternGraph graph = random_graph(rng, 10);
        const std::vector<int> community = random_partition(rng, graph.node_count());
        const Partition p = partition_of(community);
        const double plain = modularity_no_overlap(graph, p);
        const Cover c = cover_from_partition(p);
        CHECK(std::abs(modularity_weighted_overlap(graph, c) - plain) <= 1e-12);

        // The unweighted variant reduces to the plain form on the binarized graph.
        PatternGraph binary = graph;
        for (Eigen::Index v = 0; v < binary.node_count(); ++v) {
            for (Eigen::Index w = 0; w < binary.node_count(); ++w) {
                binary.weights(v, w) = graph.weights(v, w) > 0.0 ? 1.0 : 0.0;
            }
        }
        CHECK(std::abs(modularity_unweighted_overlap(graph, c) -
                       modularity_no_overlap(binary, p)) <= 1e-12);
    }
}

TEST_CASE("shared-vertex triangles hit the hand-computed overlap values") {
    const PatternGraph graph = shared_vertex_triangles();
    const Cover cover = make_cover({{0, 1, 2}, {2, 3, 4}}, 5);

    // Degrees 2,2,4,2,2 and 2m = 12.
    const Eigen::VectorXd degrees = graph.weights.rowwise().sum();
    CHECK(degrees(2) == 4.0);
    CHECK(degrees.sum() == 12.0);

    CHECK(std::abs(modularity_unweighted_overlap(graph, cover) - 1.0 / 6.0) <= 1e-12);

    const Eigen::MatrixXd alpha = belonging_coefficients(graph, cover);
    CHECK(alpha(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(alpha(1, 2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(alpha(0, 0) == 1.0);
    CHECK(alpha(1, 4) == 1.0);

    const double weighted = modularity_weighted_overlap(graph, cover);
    CHECK(weighted == oracle::eq4(graph.weights, cover.communities));
    CHECK(weighted < 0.5);
}

TEST_CASE("belonging coefficients split by community edge weight") {
    // Node 2 sits between communities with weights 3 (into {0,1}) and 1 (into {3}).
    const PatternGraph graph =
        make_graph(4, {{0, 2, 1.0}, {1, 2, 2.0}, {2, 3, 1.0}, {0, 1, 1.0}});
    const Cover cover = make_cover({{0, 1, 2}, {2, 3}}, 4);
    const Eigen::MatrixXd alpha = belonging_coefficients(graph, cover);
    CHECK(alpha(0, 2) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(alpha(1, 2) == doctest::Approx(0.25).epsilon(1e-12));
    for (Eigen::Index v = 0; v < 4; ++v) {
        CHECK(alpha.col(v).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Equal pull both ways -> 0.5 / 0.5.
    const PatternGraph even = make_graph(3, {{0, 1, 2.0}, {1, 2, 2.0}});
    const Cover split = make_cover({{0, 1}, {1, 2}}, 3);
    const Eigen::MatrixXd half = belonging_coefficients(even, split);
    CHECK(half(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(half(1, 1) == doctest::Approx(0.5).epsilon(1e-12));

    // Full covers repeated r times still sum to zero total modularity.
    for (int r = 1; r <= 3; ++r) {
        std::vector<std::vector<Eigen::Index>> everything(
            static_cast<std::size_t>(r), std::vector<Eigen::Index>{0, 1, 2});
        CHECK(std::abs(modularity_weighted_overlap(even, make_cover(everything, 3))) <= 1e-12);
        CHECK(std::abs(modularity_unweighted_overlap(even, make_cover(everything, 3))) <= 1e-12);
    }
}

TEST_CASE("production modularity equals the naive oracles exactly") {
    Rng rng(47);
    for (int round = 0; round < 60; ++round) {
        const PatternGraph graph = random_graph(rng, 10);
        const Eigen::Index n = graph.node_count();

        const std::vector<int> community = random_partition(rng, n);
        CHECK(modularity_no_overlap(graph, partition_of(community)) ==
              oracle::eq2(graph.weights, community));

        // Random overlapping cover: every node lands in >= 1 community.
        const int communities = 2 + static_cast<int>(rng.below(3));
        std::vector<std::vector<Eigen::Index>> raw(static_cast<std::size_t>(communities));
        for (Eigen::Index v = 0; v < n; ++v) {
            bool placed = false;
            for (int c = 0; c < communities; ++c) {
                if (rng.uniform() < 0.5) {
                    raw[static_cast<std::size_t>(c)].push_back(v);
                    placed = true;
                }
            }
            if (!placed) {
                raw[0].push_back(v);
            }
        }
        const Cover cover = make_cover(raw, n);
        CHECK(modularity_unweighted_overlap(graph, cover) ==
              oracle::eq3(graph.weights, cover.communities));
        CHECK(modularity_weighted_overlap(graph, cover) ==
              oracle::eq4(graph.weights, cover.communities));
    }
}

TEST_CASE("argmax partitioning follows the strongest mean activation") {
    ClassMeanActivations means;
    means.class_counts = {1, 1};
    means.means = {{Eigen::VectorXd(4)}, {Eigen::VectorXd(4)}};
    means.means[0][0] << 0.9, 0.3, 0.0, 0.0;
    means.means[1][0] << 0.0, 0.7, 0.8, 0.0;

    RepresentativeSets sets;
    sets.layer = 0;
    sets.sets = {{0, 1}, {1, 2}};

    PatternGraph graph = make_graph(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    graph.nodes = {0, 1, 2};

    const Partition partition = partition_from_covers(means, sets, graph);
    // Node 0: class 0 only. Node 1: 0.3 vs 0.7 -> class 1. Node 2: class 1 only.
    CHECK(partition.community == std::vector<int>{0, 1, 1});
    CHECK(partition.community_count == 2);

    Rng rng(53);
    for (int round = 0; round < 20; ++round) {
        const int neurons = 6;
        means.means[0][0] = Eigen::VectorXd::Zero(neurons);
        means.means[1][0] = Eigen::VectorXd::Zero(neurons);
        for (int i = 0; i < neurons; ++i) {
            means.means[0][0](i) = static_cast<double>(rng.below(5)) / 4.0;
            means.means[1][0](i) = static_cast<double>(rng.below(5)) / 4.0;
        }
        RepresentativeSets all;
        all.layer = 0;
        all.sets = {{0, 1, 2, 3, 4, 5}, {0, 1, 2, 3, 4, 5}};
        PatternGraph full = make_graph(neurons, {{0, 1, 1.0}});
        const Partition got = partition_from_covers(means, all, full);
        for (int v = 0; v < neurons; ++v) {
            const int expected =
                means.means[1][0](v) > means.means[0][0](v) ? 1 : 0;  // tie keeps class 0
            const int got_class = got.community_count == 1 ? 0 : got.community[static_cast<std::size_t>(v)];
            CHECK(got_class == expected);
        }
    }
}

// ---------------------------------------------------------------------------
// Community detection
// ---------------------------------------------------------------------------

TEST_CASE("louvain recovers the optimal partition on the fixtures") {
    const PatternGraph triangles = two_triangles();
    const LouvainResult result = louvain(triangles, 1.0, 9);
    CHECK(result.partition.community_count == 2);
    CHECK(result.partition.community[0] == result.partition.community[1]);
    CHECK(result.partition.community[1] == result.partition.community[2]);
    CHECK(result.partition.community[3] == result.partition.community[4]);
    CHECK(result.partition.community[4] == result.partition.community[5]);
    CHECK(result.partition.community[0] != result.partition.community[3]);

    const double q = modularity_resolution(triangles, result.partition.community, 1.0);
    CHECK(std::abs(q - 0.5) <= 1e-12);
    CHECK(std::abs(oracle::best_partition_q(triangles.weights, 1.0) - 0.5) <= 1e-12);
    CHECK(community_sizes(result.partition) == std::vector<Eigen::Index>{3, 3});

    const PatternGraph k4 = unit_graph(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    const LouvainResult clique = louvain(k4, 1.0, 9);
    CHECK(clique.partition.community_count == 1);
    const std::vector<int> single(4, 0);
    CHECK(std::abs(oracle::best_partition_q(k4.weights, 1.0) -
                   oracle::eq2(k4.weights, single)) <= 1e-12);
}

TEST_CASE("low resolution merges bridged triangles into one community") {
    const PatternGraph bridged = bridged_triangles();
    const double gamma = 1e-6;
    // Candidate evaluation: one community beats the two-triangle split.
    const double one = modularity_resolution(bridged, {0, 0, 0, 0, 0, 0}, gamma);
    const double two = modularity_resolution(bridged, {0, 0, 0, 1, 1, 1}, gamma);
    CHECK(one > two);
    const LouvainResult result = louvain(bridged, gamma, 3);
    CHECK(result.partition.community_count == 1);

    // At resolution 1 the same graph still splits along the bridge.
    const LouvainResult high = louvain(bridged, 1.0, 3);
    CHECK(high.partition.community_count == 2);
}

TEST_CASE("louvain modularity is monotone per pass and near-optimal on small graphs") {
    Rng rng(61);
    for (int round = 0; round < 25; ++round) {
        const PatternGraph graph = random_graph(rng, 8);
        const double gamma = round % 3 == 0 ? 0.5 : (round % 3 == 1 ? 1.0 : 2.0);
        const LouvainResult result = louvain(graph, gamma, rng.next_u64());
        for (std::size_t i = 1; i < result.pass_modularity.size(); ++i) {
            CHECK(result.pass_modularity[i] >= result.pass_modularity[i - 1] - 1e-12);
        }
        const double best = oracle::best_partition_q(graph.weights, gamma);
        const double got = modularity_resolution(graph, result.partition.community, gamma);
        CHECK(got <= best + 1e-12);
        CHECK(std::abs(result.pass_modularity.back() - got) <= 1e-12);
    }

    CHECK_THROWS_AS((void)louvain(two_triangles(), 0.0, 1), config_error);

    const LouvainResult edgeless = louvain(make_graph(3, {}), 1.0, 1);
    CHECK(edgeless.edgeless);
    CHECK(edgeless.partition.community_count == 3);
}

TEST_CASE("bisection cuts the bridge between triangle pairs") {
    const PatternGraph bridged = bridged_triangles();
    const BisectionResult result = kernighan_lin_bisect(bridged, 5);
    CHECK(result.cut_weight == 1.0);
    CHECK(result.partition.community ==
          std::vector<int>{0, 0, 0, 1, 1, 1});  // node 0's side is community 0

    std::vector<int> best_side;
    CHECK(oracle::min_balanced_cut(bridged.weights, &best_side) == 1.0);
    CHECK(best_side == result.partition.community);

    for (std::size_t i = 1; i < result.pass_cut.size(); ++i) {
        CHECK(result.pass_cut[i] <= result.pass_cut[i - 1] + 1e-12);
    }
}

TEST_CASE("bisection fixtures: disjoint cliques and the four-node path") {
    const PatternGraph cliques = two_triangles();
    const BisectionResult disjoint = kernighan_lin_bisect(cliques, 8);
    CHECK(disjoint.cut_weight == 0.0);

    const PatternGraph path = unit_graph(4, {{0, 1}, {1, 2}, {2, 3}});
    const BisectionResult halves = kernighan_lin_bisect(path, 8);
    CHECK(halves.cut_weight == 1.0);
    CHECK(halves.partition.community == std::vector<int>{0, 0, 1, 1});
    CHECK(oracle::min_balanced_cut(path.weights) == 1.0);
}

TEST_CASE("bisection balances odd graphs and never worsens the cut") {
    Rng rng(67);
    for (int round = 0; round < 25; ++round) {
        const PatternGraph graph = random_graph(rng, 9);
        const BisectionResult result = kernighan_lin_bisect(graph, rng.next_u64());
        REQUIRE(result.partition.community.size() ==
                static_cast<std::size_t>(graph.node_count()));

        Eigen::Index side0 = 0;
        Eigen::Index side1 = 0;
        for (int side : result.partition.community) {
            (side == 0 ? side0 : side1) += 1;
        }
        CHECK(std::abs(side0 - side1) <= 1);
        CHECK(result.partition.community[0] == 0);

        CHECK(result.cut_weight ==
              oracle::cut_weight(graph.weights, result.partition.community));
        for (std::size_t i = 1; i < result.pass_cut.size(); ++i) {
            CHECK(result.pass_cut[i] <= result.pass_cut[i - 1] + 1e-12);
        }
        if (graph.node_count() % 2 == 0) {
            CHECK(result.cut_weight >= oracle::min_balanced_cut(graph.weights) - 1e-12);
        }
    }

    CHECK_THROWS_AS((void)kernighan_lin_bisect(make_graph(1, {}), 1), pipeline_error);
}

TEST_CASE("community sizes sort descending") {
    CHECK(community_sizes(partition_of({0, 0, 1})) == std::vector<Eigen::Index>{2, 1});
    CHECK(community_sizes(partition_of({0, 1, 2})) == std::vector<Eigen::Index>{1, 1, 1});
}

// ---------------------------------------------------------------------------
// Entropy
// ---------------------------------------------------------------------------

TEST_CASE("neuron entropy fixtures") {
    const EntropyConfig four{4, true};

    Eigen::VectorXd equal(3);
    equal << 0.2, 0.2, 0.2;
    CHECK(neuron_entropy(equal, four) == 0.0);

    Eigen::VectorXd uniform(4);
    uniform << 0.1, 0.2, 0.3, 0.4;
    CHECK(std::abs(neuron_entropy(uniform, four) - 2.0) <= 1e-12);

    Eigen::VectorXd coin(4);
    coin << 1, 1, 2, 2;
    CHECK(std::abs(neuron_entropy(coin, four) - 1.0) <= 1e-12);

    bool dead = false;
    CHECK(neuron_entropy(Eigen::VectorXd::Zero(5), four, &dead) == 0.0);
    CHECK(dead);

    CHECK_THROWS_AS((void)neuron_entropy(equal, EntropyConfig{1, true}), config_error);

    // Natural-log variant scales by ln 2.
    const EntropyConfig nats{4, false};
    CHECK(std::abs(neuron_entropy(coin, nats) - std::log(2.0)) <= 1e-12);

    Rng rng(71);
    const EntropyConfig ten{10, true};
    for (int round = 0; round < 40; ++round) {
        Eigen::VectorXd column(30);
        for (int i = 0; i < 30; ++i) {
            column(i) = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
        }
        const double e = neuron_entropy(column, ten);
        CHECK(e >= 0.0);
        CHECK(e <= std::log2(10.0) + 1e-12);
        CHECK(std::abs(e - oracle::column_entropy(column, 10, true)) <= 1e-12);
    }
}

TEST_CASE("model entropy sums columns and reports dead neurons") {
    FeatureMatrix values(4, 3);
    values << 1, 0, 0.3,
              1, 0, 0.6,
              2, 0, 0.1,
              2, 0, 0.9;
    const ActivationMatrix f = make_f(values, {0, 3}, {0, 0, 0, 0}, 1);
    const EntropyConfig config{4, true};
    const EntropyResult result = model_entropy(f, config);
    REQUIRE(result.per_neuron.size() == 3);
    CHECK(std::abs(result.per_neuron[0] - 1.0) <= 1e-12);
    CHECK(result.per_neuron[1] == 0.0);
    CHECK(result.dead_neurons == std::vector<Eigen::Index>{1});
    CHECK(std::abs(result.total - (result.per_neuron[0] + result.per_neuron[2])) <= 1e-12);

    const ActivationMatrix all_dead = make_f(FeatureMatrix::Zero(3, 2), {0, 2}, {0, 0, 0}, 1);
    CHECK(model_entropy(all_dead, config).total == 0.0);

    Rng rng(73);
    FeatureMatrix random(25, 6);
    for (Eigen::Index r = 0; r < 25; ++r) {
        for (Eigen::Index c = 0; c < 6; ++c) {
            random(r, c) = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
        }
    }
    const ActivationMatrix fr = make_f(random, {0, 6}, std::vector<int>(25, 0), 1);
    const EntropyResult er = model_entropy(fr, EntropyConfig{10, true});
    double total = 0.0;
    for (Eigen::Index c = 0; c < 6; ++c) {
        total += oracle::column_entropy(random.col(c), 10, true);
    }
    CHECK(std::abs(er.total - total) <= 1e-12);
}

TEST_CASE("class entropy filters rows then recomputes") {
    Rng rng(79);
    FeatureMatrix values(20, 4);
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) {
        labels.push_back(i % 2);
        for (int c = 0; c < 4; ++c) {
            values(i, c) = rng.uniform() < 0.25 ? 0.0 : rng.uniform();
        }
    }
    const ActivationMatrix f = make_f(values, {0, 4}, labels, 2);
    const EntropyConfig config{5, true};

    // Single-class dataset: the filter is the identity.
    const ActivationMatrix single =
        make_f(values, {0, 4}, std::vector<int>(20, 0), 1);
    CHECK(std::abs(class_entropy(single, 0, config).total -
                   model_entropy(normalize_columns(single), config).total) <= 1e-12);

    // Brute force: filter, normalize, sum.
    for (int class_id = 0; class_id < 2; ++class_id) {
        std::vector<int> keep;
        for (int i = 0; i < 20; ++i) {
            if (labels[static_cast<std::size_t>(i)] == class_id) keep.push_back(i);
        }
        FeatureMatrix filtered(static_cast<Eigen::Index>(keep.size()), 4);
        for (std::size_t r = 0; r < keep.size(); ++r) {
            filtered.row(static_cast<Eigen::Index>(r)) = values.row(keep[r]);
        }
        const ActivationMatrix ff =
            make_f(filtered, {0, 4}, std::vector<int>(keep.size(), class_id), 2);
        const double expected = model_entropy(normalize_columns(ff), config).total;
        CHECK(std::abs(class_entropy(f, class_id, config).total - expected) <= 1e-12);
    }

    // One row in the class: every column has at most one nonzero value.
    FeatureMatrix tiny(3, 2);
    tiny << 0.5, 0.25, 0.75, 0.125, 0.0625, 0.5;
    const ActivationMatrix ft = make_f(tiny, {0, 2}, {0, 1, 1}, 2);
    CHECK(class_entropy(ft, 0, config).total == 0.0);

    CHECK_THROWS_AS((void)class_entropy(ft, 5, config), pipeline_error);
}

TEST_CASE("series normalization fixtures") {
    const NormalizedSeries basic = normalize_series({10, 20, 30});
    CHECK(basic.values == std::vector<double>{0.0, 0.5, 1.0});
    CHECK_FALSE(basic.constant);

    const NormalizedSeries flat = normalize_series({5, 5});
    CHECK(flat.values == std::vector<double>{0.5, 0.5});
    CHECK(flat.constant);

    Rng rng(83);
    std::vector<double> series;
    for (int i = 0; i < 10; ++i) {
        series.push_back(rng.uniform() * 3.0);
    }
    std::vector<double> affine;
    for (double v : series) {
        affine.push_back(2.5 * v + 7.0);
    }
    const NormalizedSeries a = normalize_series(series);
    const NormalizedSeries b = normalize_series(affine);
    for (std::size_t i = 0; i < series.size(); ++i) {
        CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-12);
    }

    CHECK_THROWS_AS((void)normalize_series({1.0}), pipeline_error);
}
