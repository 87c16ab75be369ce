#pragma once

#include <cstdint>
#include <vector>

#include "neurograph/graph.hpp"
#include "neurograph/partition.hpp"

namespace neurograph {

struct LouvainResult {
    Partition partition;
    // Resolution-scaled modularity of the global partition after each
    // local-move pass; non-decreasing by construction.
    std::vector<double> pass_modularity;
    bool edgeless = false;  // input had no edges; singleton fallback returned
};

// Greedy local-move + aggregation maximization of resolution-scaled weighted
// modularity. The seed shuffles the node visit order once per level; among
// equal-gain moves a node keeps its current community. An edgeless graph
// yields the all-singletons partition with the edgeless flag set.
LouvainResult louvain(const PatternGraph& graph, double resolution, std::uint64_t seed);

struct BisectionResult {
    Partition partition;  // exactly two communities, sizes differing by <= 1
    double cut_weight = 0.0;
    std::vector<double> pass_cut;  // cut after each swap pass; non-increasing
};

// Kernighan-Lin balanced bisection minimizing weighted cut. Odd-sized graphs
// are balanced internally with a zero-degree ghost node that is removed from
// the output. The seed picks the starting split.
BisectionResult kernighan_lin_bisect(const PatternGraph& graph, std::uint64_t seed,
                                     int max_passes = 10);

// Resolution-scaled modularity of a partition (gamma scales the null-model
// term); modularity_no_overlap equals the gamma = 1 case.
double modularity_resolution(const PatternGraph& graph, const std::vector<int>& community,
                             double resolution);

}  // namespace neurograph
