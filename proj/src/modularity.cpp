#include "neurograph/modularity.hpp"

#include <algorithm>

#include "neurograph/errors.hpp"

namespace neurograph {

namespace {

// Explicit accumulation loops throughout this file: the test suite holds the
// production implementations to exact (not tolerance) agreement with direct
// double-sum evaluation of each formula, so the summation order is part of
// the contract.
Eigen::VectorXd weighted_degrees(const Eigen::MatrixXd& w) {
    Eigen::VectorXd k = Eigen::VectorXd::Zero(w.rows());
    for (Eigen::Index v = 0; v < w.rows(); ++v) {
        for (Eigen::Index u = 0; u < w.cols(); ++u) {
            k(v) += w(v, u);
        }
    }
    return k;
}

double total_degree(const Eigen::VectorXd& k) {
    double twom = 0.0;
    for (Eigen::Index v = 0; v < k.size(); ++v) {
        twom += k(v);
    }
    return twom;
}

void validate_partition(const Partition& partition, Eigen::Index node_count) {
    if (static_cast<Eigen::Index>(partition.community.size()) != node_count) {
        throw pipeline_error("partition does not cover all nodes");
    }
    for (int c : partition.community) {
        if (c < 0) {
            throw pipeline_error("partition has a negative community id");
        }
    }
}

}  // namespace

Cover make_cover(std::vector<std::vector<Eigen::Index>> communities, Eigen::Index node_count) {
    Cover cover;
    std::vector<bool> covered(static_cast<std::size_t>(node_count), false);
    for (auto& community : communities) {
        std::sort(community.begin(), community.end());
        community.erase(std::unique(community.begin(), community.end()), community.end());
        for (Eigen::Index v : community) {
            if (v < 0 || v >= node_count) {
                throw pipeline_error("cover: node index out of range");
            }
            covered[static_cast<std::size_t>(v)] = true;
        }
        if (!community.empty()) {
            cover.communities.push_back(std::move(community));
        }
    }
    // Residual community for anything the given communities missed.
    std::vector<Eigen::Index> residual;
    for (Eigen::Index v = 0; v < node_count; ++v) {
        if (!covered[static_cast<std::size_t>(v)]) {
            residual.push_back(v);
        }
    }
    if (!residual.empty()) {
        cover.communities.push_back(std::move(residual));
    }
    return cover;
}

Cover cover_from_partition(const Partition& partition) {
    std::vector<std::vector<Eigen::Index>> communities(
        static_cast<std::size_t>(partition.community_count));
    for (std::size_t v = 0; v < partition.community.size(); ++v) {
        communities[static_cast<std::size_t>(partition.community[v])].push_back(
            static_cast<Eigen::Index>(v));
    }
    return make_cover(std::move(communities),
                      static_cast<Eigen::Index>(partition.community.size()));
}

Cover cover_from_representatives(const RepresentativeSets& sets, const PatternGraph& graph) {
    std::vector<std::vector<Eigen::Index>> communities;
    for (const auto& set : sets.sets) {
        if (set.empty()) {
            continue;
        }
        std::vector<Eigen::Index> community;
        for (Eigen::Index node_id : set) {
            const Eigen::Index v = graph.index_of(node_id);
            if (v < 0) {
                throw pipeline_error("cover_from_representatives: neuron " +
                                     std::to_string(node_id) + " is not a graph node");
            }
            community.push_back(v);
        }
        communities.push_back(std::move(community));
    }
    return make_cover(std::move(communities), graph.node_count());
}

std::vector<Eigen::Index> membership_counts(const Cover& cover, Eigen::Index node_count) {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(node_count), 0);
    for (const auto& community : cover.communities) {
        for (Eigen::Index v : community) {
            ++counts[static_cast<std::size_t>(v)];
        }
    }
    return counts;
}

double modularity_no_overlap(const PatternGraph& graph, const Partition& partition) {
    const Eigen::Index n = graph.node_count();
    validate_partition(partition, n);
    const Eigen::VectorXd k = weighted_degrees(graph.weights);
    const double twom = total_degree(k);
    if (twom == 0.0) {
        throw pipeline_error("modularity undefined: graph has no edges");
    }
    double q = 0.0;
    for (Eigen::Index v = 0; v < n; ++v) {
        for (Eigen::Index w = 0; w < n; ++w) {
            if (partition.community[static_cast<std::size_t>(v)] ==
                partition.community[static_cast<std::size_t>(w)]) {
                q += graph.weights(v, w) - k(v) * k(w) / twom;
            }
        }
    }
    return q / twom;
}

double modularity_unweighted_overlap(const PatternGraph& graph, const Cover& cover) {
    const Eigen::Index n = graph.node_count();
    Eigen::MatrixXd b(n, n);
    for (Eigen::Index v = 0; v < n; ++v) {
        for (Eigen::Index w = 0; w < n; ++w) {
            b(v, w) = graph.weights(v, w) > 0.0 ? 1.0 : 0.0;
        }
    }
    const Eigen::VectorXd k = weighted_degrees(b);
    const double twom = total_degree(k);
    if (twom == 0.0) {
        throw pipeline_error("modularity undefined: graph has no edges");
    }
    const std::vector<Eigen::Index> o = membership_counts(cover, n);
    double q = 0.0;
    for (const auto& community : cover.communities) {
        for (Eigen::Index v : community) {
            for (Eigen::Index w : community) {
                const auto ov = static_cast<double>(o[static_cast<std::size_t>(v)]);
                const auto ow = static_cast<double>(o[static_cast<std::size_t>(w)]);
                q += (b(v, w) - k(v) * k(w) / twom) / (ov * ow);
            }
        }
    }
    return q / twom;
}

Eigen::MatrixXd belonging_coefficients(const PatternGraph& graph, const Cover& cover) {
    const Eigen::Index n = graph.node_count();
    const auto community_count = static_cast<Eigen::Index>(cover.communities.size());
    Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(community_count, n);

    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(n));
    for (std::size_t c = 0; c < cover.communities.size(); ++c) {
        for (Eigen::Index v : cover.communities[c]) {
            members[static_cast<std::size_t>(v)].push_back(static_cast<Eigen::Index>(c));
        }
    }

    for (Eigen::Index v = 0; v < n; ++v) {
        const auto& mv = members[static_cast<std::size_t>(v)];
        std::vector<double> kcv(mv.size(), 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < mv.size(); ++i) {
            for (Eigen::Index p : cover.communities[static_cast<std::size_t>(mv[i])]) {
                kcv[i] += graph.weights(v, p);
            }
            total += kcv[i];
        }
        for (std::size_t i = 0; i < mv.size(); ++i) {
            alpha(mv[i], v) = total == 0.0 ? 1.0 / static_cast<double>(mv.size())
                                           : kcv[i] / total;
        }
    }
    return alpha;
}

double modularity_weighted_overlap(const PatternGraph& graph, const Cover& cover) {
    const Eigen::Index n = graph.node_count();
    const Eigen::VectorXd k = weighted_degrees(graph.weights);
    const double twom = total_degree(k);
    if (twom == 0.0) {
        throw pipeline_error("modularity undefined: graph has no edges");
    }
    const Eigen::MatrixXd alpha = belonging_coefficients(graph, cover);
    double q = 0.0;
    for (Eigen::Index c = 0; c < alpha.rows(); ++c) {
        for (Eigen::Index v = 0; v < n; ++v) {
            for (Eigen::Index w = 0; w < n; ++w) {
                q += (graph.weights(v, w) - k(v) * k(w) / twom) * (alpha(c, v) * alpha(c, w));
            }
        }
    }
    return q / twom;
}

Partition partition_from_covers(const ClassMeanActivations& means,
                                const RepresentativeSets& sets, const PatternGraph& graph) {
    const Eigen::Index n = graph.node_count();
    std::vector<int> chosen_class(static_cast<std::size_t>(n), -1);
    for (Eigen::Index v = 0; v < n; ++v) {
        const Eigen::Index node_id = graph.nodes[static_cast<std::size_t>(v)];
        int best = -1;
        double best_value = 0.0;
        for (std::size_t i = 0; i < sets.sets.size(); ++i) {
            const auto& set = sets.sets[i];
            if (!std::binary_search(set.begin(), set.end(), node_id)) {
                continue;
            }
            const double value =
                means.means[i][static_cast<std::size_t>(sets.layer)](node_id);
            if (best < 0 || value > best_value) {
                best = static_cast<int>(i);
                best_value = value;
            }
        }
        if (best < 0) {
            throw pipeline_error("partition_from_covers: node " + std::to_string(node_id) +
                                 " is in no representative set");
        }
        chosen_class[static_cast<std::size_t>(v)] = best;
    }

    // Dense renumbering, preserving class order.
    std::vector<int> used = chosen_class;
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());

    Partition partition;
    partition.resolution = 1.0;
    partition.community_count = static_cast<int>(used.size());
    partition.community.reserve(chosen_class.size());
    for (int c : chosen_class) {
        const auto it = std::lower_bound(used.begin(), used.end(), c);
        partition.community.push_back(static_cast<int>(it - used.begin()));
    }
    return partition;
}

}  // namespace neurograph
