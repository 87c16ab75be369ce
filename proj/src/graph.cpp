#include "neurograph/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "neurograph/errors.hpp"

namespace neurograph {

Eigen::Index PatternGraph::index_of(Eigen::Index node_id) const {
    const auto it = std::lower_bound(nodes.begin(), nodes.end(), node_id);
    if (it == nodes.end() || *it != node_id) {
        return -1;
    }
    return static_cast<Eigen::Index>(it - nodes.begin());
}

PatternGraph make_graph(Eigen::Index node_count, const std::vector<Edge>& edges) {
    PatternGraph graph;
    graph.nodes.resize(static_cast<std::size_t>(node_count));
    std::iota(graph.nodes.begin(), graph.nodes.end(), Eigen::Index{0});
    graph.weights = Eigen::MatrixXd::Zero(node_count, node_count);
    for (const Edge& e : edges) {
        if (e.u < 0 || e.u >= node_count || e.v < 0 || e.v >= node_count) {
            throw pipeline_error("make_graph: edge endpoint out of range");
        }
        if (e.u == e.v) {
            throw pipeline_error("make_graph: self-loops are not allowed");
        }
        graph.weights(e.u, e.v) += e.w;
        graph.weights(e.v, e.u) += e.w;
    }
    return graph;
}

std::vector<Edge> edge_list(const PatternGraph& graph) {
    std::vector<Edge> edges;
    for (Eigen::Index u = 0; u < graph.node_count(); ++u) {
        for (Eigen::Index v = u + 1; v < graph.node_count(); ++v) {
            if (graph.weights(u, v) > 0.0) {
                edges.push_back({graph.nodes[static_cast<std::size_t>(u)],
                                 graph.nodes[static_cast<std::size_t>(v)], graph.weights(u, v)});
            }
        }
    }
    return edges;
}

RepresentativeSets top_s_neurons(const ClassMeanActivations& means, int layer, Eigen::Index s) {
    if (s < 1) {
        throw config_error("top_s_neurons: S must be at least 1");
    }
    RepresentativeSets result;
    result.layer = layer;
    result.size_s = s;
    result.sets.resize(means.means.size());
    for (std::size_t i = 0; i < means.means.size(); ++i) {
        if (means.means[i].empty()) {
            continue;  // class absent from the capture set
        }
        const Eigen::VectorXd& v = means.means[i][static_cast<std::size_t>(layer)];
        std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            if (v(a) != v(b)) return v(a) > v(b);
            return a < b;
        });
        const auto take = std::min<std::size_t>(static_cast<std::size_t>(s), order.size());
        std::vector<Eigen::Index> set(order.begin(),
                                      order.begin() + static_cast<std::ptrdiff_t>(take));
        std::sort(set.begin(), set.end());
        result.sets[i] = std::move(set);
    }
    return result;
}

std::vector<Eigen::Index> node_union(const RepresentativeSets& sets) {
    std::vector<Eigen::Index> all;
    for (const auto& set : sets.sets) {
        all.insert(all.end(), set.begin(), set.end());
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

Eigen::MatrixXd coactivation_matrix(const ActivationMatrix& f, const Eigen::VectorXd& class_mean,
                                    const std::vector<Eigen::Index>& nodes,
                                    const std::vector<Eigen::Index>& class_set, int class_id,
                                    int layer) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);

    // Dense indices of the class's representative neurons within the node list.
    std::vector<Eigen::Index> member_index;
    for (Eigen::Index node_id : class_set) {
        const auto it = std::lower_bound(nodes.begin(), nodes.end(), node_id);
        if (it == nodes.end() || *it != node_id) {
            throw pipeline_error("coactivation_matrix: representative neuron missing from nodes");
        }
        member_index.push_back(static_cast<Eigen::Index>(it - nodes.begin()));
    }

    const Eigen::Index begin = f.layer_begin(layer);
    Eigen::Index class_rows = 0;
    std::vector<Eigen::Index> active;
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
        if (f.labels[static_cast<std::size_t>(r)] != class_id) {
            continue;
        }
        ++class_rows;
        active.clear();
        for (Eigen::Index j : member_index) {
            const Eigen::Index neuron = nodes[static_cast<std::size_t>(j)];
            if (f.values(r, begin + neuron) > class_mean(neuron)) {
                active.push_back(j);
            }
        }
        for (std::size_t p = 0; p < active.size(); ++p) {
            for (std::size_t q = p + 1; q < active.size(); ++q) {
                a(active[p], active[q]) += 1.0;
            }
        }
    }
    if (class_rows == 0) {
        throw pipeline_error("coactivation_matrix: class " + std::to_string(class_id) +
                             " has no samples");
    }

    a /= static_cast<double>(class_rows);
    for (Eigen::Index u = 0; u < n; ++u) {
        for (Eigen::Index v = u + 1; v < n; ++v) {
            a(v, u) = a(u, v);
        }
    }
    return a;
}

PatternGraph build_graph(const std::vector<Eigen::Index>& nodes,
                         const std::vector<Eigen::MatrixXd>& per_class) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    PatternGraph graph;
    graph.nodes = nodes;
    graph.weights = Eigen::MatrixXd::Zero(n, n);
    for (const Eigen::MatrixXd& a : per_class) {
        if (a.rows() != n || a.cols() != n) {
            throw pipeline_error("build_graph: per-class adjacency dimension mismatch");
        }
        graph.weights += a;
    }
    return graph;
}

LayerPatternGraph build_pattern_graph(const ActivationMatrix& f, const ClassMeanActivations& means,
                                      int layer, Eigen::Index s) {
    LayerPatternGraph result;
    result.sets = top_s_neurons(means, layer, s);
    const std::vector<Eigen::Index> nodes = node_union(result.sets);

    std::vector<Eigen::MatrixXd> per_class;
    for (std::size_t i = 0; i < result.sets.sets.size(); ++i) {
        if (means.means[i].empty()) {
            continue;
        }
        per_class.push_back(coactivation_matrix(
            f, means.means[i][static_cast<std::size_t>(layer)], nodes, result.sets.sets[i],
            static_cast<int>(i), layer));
    }
    result.graph = build_graph(nodes, per_class);
    return result;
}

Eigen::MatrixXi unique_neuron_matrix(const RepresentativeSets& sets, int class_count) {
    std::map<Eigen::Index, std::vector<int>> memberships;
    for (std::size_t i = 0; i < sets.sets.size(); ++i) {
        for (Eigen::Index node : sets.sets[i]) {
            memberships[node].push_back(static_cast<int>(i));
        }
    }
    Eigen::MatrixXi m = Eigen::MatrixXi::Zero(class_count, class_count);
    for (const auto& [node, classes] : memberships) {
        if (classes.size() == 1) {
            m(classes[0], classes[0]) += 1;
        } else if (classes.size() == 2) {
            m(classes[0], classes[1]) += 1;
            m(classes[1], classes[0]) += 1;
        }
    }
    return m;
}

void write_edge_list(const std::string& path, const PatternGraph& graph) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw pipeline_error("cannot open " + path + " for writing");
    }
    out << "u,v,w\n";
    char buf[96];
    for (const Edge& e : edge_list(graph)) {
        std::snprintf(buf, sizeof buf, "%lld,%lld,%.17g\n", static_cast<long long>(e.u),
                      static_cast<long long>(e.v), e.w);
        out << buf;
    }
    if (!out) {
        throw pipeline_error("error writing " + path);
    }
}

PatternGraph read_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw pipeline_error("cannot open " + path);
    }
    std::vector<Edge> edges;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || (line_number == 1 && line == "u,v,w")) {
            continue;
        }
        long long u = 0;
        long long v = 0;
        double w = 0.0;
        if (std::sscanf(line.c_str(), "%lld,%lld,%lf", &u, &v, &w) != 3) {
            throw pipeline_error(path + ":" + std::to_string(line_number) +
                                 ": malformed edge row \"" + line + "\"");
        }
        edges.push_back({static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v), w});
    }

    // Node list is the union of endpoints (isolated nodes are not represented
    // in an edge list).
    std::vector<Eigen::Index> nodes;
    for (const Edge& e : edges) {
        nodes.push_back(e.u);
        nodes.push_back(e.v);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    PatternGraph graph;
    graph.nodes = nodes;
    const auto n = static_cast<Eigen::Index>(nodes.size());
    graph.weights = Eigen::MatrixXd::Zero(n, n);
    for (const Edge& e : edges) {
        const Eigen::Index u = graph.index_of(e.u);
        const Eigen::Index v = graph.index_of(e.v);
        if (u == v) {
            throw pipeline_error(path + ": self-loop on node " + std::to_string(e.u));
        }
        graph.weights(u, v) += e.w;
        graph.weights(v, u) += e.w;
    }
    return graph;
}

void write_membership_csv(const std::string& path, const RepresentativeSets& sets) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw pipeline_error("cannot open " + path + " for writing");
    }
    out << "node,class\n";
    std::map<Eigen::Index, std::vector<std::size_t>> memberships;
    for (std::size_t i = 0; i < sets.sets.size(); ++i) {
        for (Eigen::Index node : sets.sets[i]) {
            memberships[node].push_back(i);
        }
    }
    for (const auto& [node, classes] : memberships) {
        for (std::size_t c : classes) {
            out << node << "," << c << "\n";
        }
    }
    if (!out) {
        throw pipeline_error("error writing " + path);
    }
}

}  // namespace neurograph
