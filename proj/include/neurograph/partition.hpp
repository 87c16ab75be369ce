#pragma once

#include <vector>

#include <Eigen/Dense>

namespace neurograph {

// Disjoint community assignment over a graph's dense node indices.
struct Partition {
    std::vector<int> community;  // per node index; ids dense from 0
    int community_count = 0;
    double resolution = 1.0;  // resolution the partition was produced under
};

// Community cardinalities, largest first.
std::vector<Eigen::Index> community_sizes(const Partition& partition);

}  // namespace neurograph
