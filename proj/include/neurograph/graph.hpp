#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neurograph/activation.hpp"

namespace neurograph {

// Per-class representative sets for one layer: sets[i] holds the neuron ids
// (layer-local, sorted ascending) with the highest class-i mean activation.
// Classes absent from the capture set get empty sets.
struct RepresentativeSets {
    std::vector<std::vector<Eigen::Index>> sets;
    int layer = 0;
    Eigen::Index size_s = 0;
};

struct Edge {
    Eigen::Index u = 0;
    Eigen::Index v = 0;
    double w = 0.0;
};

// Weighted undirected graph over the union of representative sets. Weights
// are dense over the node list; `nodes` maps dense indices back to neuron
// ids and is sorted ascending.
struct PatternGraph {
    std::vector<Eigen::Index> nodes;
    Eigen::MatrixXd weights;  // symmetric, zero diagonal, entries >= 0

    Eigen::Index node_count() const { return static_cast<Eigen::Index>(nodes.size()); }
    // Dense index of a neuron id, or -1 if absent.
    Eigen::Index index_of(Eigen::Index node_id) const;
};

// Builds a graph over nodes 0..node_count-1 from an edge list (weights of
// duplicate/reversed pairs accumulate). Intended for fixtures and imports.
PatternGraph make_graph(Eigen::Index node_count, const std::vector<Edge>& edges);

// Nonzero-weight edges with u < v, ordered by (u, v), endpoints as neuron ids.
std::vector<Edge> edge_list(const PatternGraph& graph);

// The S neurons with the largest class-mean activation per class, ties going
// to the lower neuron id. S is clamped to the layer width.
RepresentativeSets top_s_neurons(const ClassMeanActivations& means, int layer, Eigen::Index s);

// Ascending union of all per-class representative sets.
std::vector<Eigen::Index> node_union(const RepresentativeSets& sets);

// Per-class co-activation adjacency over `nodes`: entry (p,q) counts the
// fraction of class rows where both neurons are strictly above their class
// mean, and is zero unless both p and q are in the class's representative
// set. Symmetric, zero diagonal.
Eigen::MatrixXd coactivation_matrix(const ActivationMatrix& f, const Eigen::VectorXd& class_mean,
                                    const std::vector<Eigen::Index>& nodes,
                                    const std::vector<Eigen::Index>& class_set, int class_id,
                                    int layer);

// Element-wise sum of per-class adjacencies over a shared node list.
PatternGraph build_graph(const std::vector<Eigen::Index>& nodes,
                         const std::vector<Eigen::MatrixXd>& per_class);

struct LayerPatternGraph {
    RepresentativeSets sets;
    PatternGraph graph;
};

// Full per-layer construction: representative sets, node union, per-class
// co-activation, summed graph.
LayerPatternGraph build_pattern_graph(const ActivationMatrix& f, const ClassMeanActivations& means,
                                      int layer, Eigen::Index s);

// k x k matrix whose (i,j) entry counts neurons belonging to exactly the
// representative sets of classes i and j (diagonal: exactly class i alone).
Eigen::MatrixXi unique_neuron_matrix(const RepresentativeSets& sets, int class_count);

// Edge-list export: header "u,v,w", one row per edge, weights printed
// round-trip exactly. The sidecar lists one "node,class" row per set
// membership.
void write_edge_list(const std::string& path, const PatternGraph& graph);
PatternGraph read_edge_list(const std::string& path);
void write_membership_csv(const std::string& path, const RepresentativeSets& sets);

}  // namespace neurograph
