#pragma once

#include <vector>

#include <Eigen/Dense>

#include "neurograph/graph.hpp"
#include "neurograph/partition.hpp"

namespace neurograph {

// Possibly-overlapping community assignment over a graph's dense node
// indices. Build through make_cover so the invariants hold: node lists
// sorted and de-duplicated, every node in at least one community (uncovered
// nodes are gathered into a residual community appended at the end).
struct Cover {
    std::vector<std::vector<Eigen::Index>> communities;
};

Cover make_cover(std::vector<std::vector<Eigen::Index>> communities, Eigen::Index node_count);
Cover cover_from_partition(const Partition& partition);

// Cover whose communities are the per-class representative sets, mapped onto
// the graph's dense indices. Classes with empty sets contribute no community.
Cover cover_from_representatives(const RepresentativeSets& sets, const PatternGraph& graph);

// Per-node community membership counts O_v.
std::vector<Eigen::Index> membership_counts(const Cover& cover, Eigen::Index node_count);

// Standard weighted modularity on a disjoint partition: the sum over ordered
// same-community node pairs (v = w included; the diagonal adjacency is zero
// but its null-model term remains) of A_vw - k_v k_w / 2m, divided by 2m.
double modularity_no_overlap(const PatternGraph& graph, const Partition& partition);

// Overlap modularity on the binarized graph (weight > 0 becomes 1): ordered
// same-community pairs damped by 1/(O_v O_w), summed within each community.
double modularity_unweighted_overlap(const PatternGraph& graph, const Cover& cover);

// Belonging coefficients alpha(c, v) = k_cv / sum over v's member
// communities of k_c'v, where k_cv is v's edge weight into community c;
// alpha is zero for non-members, and a node with zero weight into all of its
// communities gets a uniform split across them.
Eigen::MatrixXd belonging_coefficients(const PatternGraph& graph, const Cover& cover);

// Weighted overlap modularity: per community, ordered pairs weighted by
// alpha_cv * alpha_cw. Reduces to modularity_no_overlap on disjoint covers.
double modularity_weighted_overlap(const PatternGraph& graph, const Cover& cover);

// Disjoint partition from overlapping representative sets: each node goes to
// the member class with the largest class-mean activation, ties to the
// lowest class id. Community ids are renumbered dense in class order.
Partition partition_from_covers(const ClassMeanActivations& means,
                                const RepresentativeSets& sets, const PatternGraph& graph);

}  // namespace neurograph
