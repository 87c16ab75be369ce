#include "neurograph/community.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "neurograph/errors.hpp"
#include "neurograph/rng.hpp"

namespace neurograph {

namespace {

// Dense renumbering by first appearance in index order.
int renumber(std::vector<int>& community) {
    std::vector<int> remap(community.size(), -1);
    int next = 0;
    for (int& c : community) {
        if (remap[static_cast<std::size_t>(c)] < 0) {
            remap[static_cast<std::size_t>(c)] = next++;
        }
        c = remap[static_cast<std::size_t>(c)];
    }
    return next;
}

// One Louvain level: greedy local moves on a (possibly aggregated) graph
// whose diagonal carries doubled self-loop mass, so row sums are degrees and
// the total sum is 2m. Returns the per-node community and whether any node
// moved.
bool local_move_phase(const Eigen::MatrixXd& w, double resolution, Rng& rng,
                      std::vector<int>& comm) {
    const Eigen::Index n = w.rows();
    Eigen::VectorXd k = Eigen::VectorXd::Zero(n);
    for (Eigen::Index v = 0; v < n; ++v) {
        k(v) = w.row(v).sum();
    }
    const double twom = k.sum();
    const double m = twom / 2.0;

    comm.assign(static_cast<std::size_t>(n), 0);
    std::iota(comm.begin(), comm.end(), 0);
    std::vector<double> tot(static_cast<std::size_t>(n));
    for (Eigen::Index v = 0; v < n; ++v) {
        tot[static_cast<std::size_t>(v)] = k(v);
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    rng.shuffle(order);  // visit order fixed once per level

    std::vector<double> acc(static_cast<std::size_t>(n));
    bool any_move = false;
    bool moved = true;
    while (moved) {
        moved = false;
        for (Eigen::Index v : order) {
            const auto vc = static_cast<std::size_t>(v);
            // Edge weight from v into each community (self-loop excluded).
            std::fill(acc.begin(), acc.end(), 0.0);
            for (Eigen::Index u = 0; u < n; ++u) {
                if (u != v && w(v, u) != 0.0) {
                    acc[static_cast<std::size_t>(comm[static_cast<std::size_t>(u)])] += w(v, u);
                }
            }
            const int old = comm[vc];
            tot[static_cast<std::size_t>(old)] -= k(v);

            // Gain of inserting v (removed from its community) into c. The
            // current community is the baseline, so equal-gain alternatives
            // leave v where it is.
            const auto gain = [&](int c) {
                return acc[static_cast<std::size_t>(c)] / m -
                       resolution * tot[static_cast<std::size_t>(c)] * k(v) / (2.0 * m * m);
            };
            int best = old;
            double best_gain = gain(old);
            for (Eigen::Index c = 0; c < n; ++c) {
                if (acc[static_cast<std::size_t>(c)] <= 0.0 || static_cast<int>(c) == old) {
                    continue;
                }
                const double g = gain(static_cast<int>(c));
                if (g > best_gain) {
                    best_gain = g;
                    best = static_cast<int>(c);
                }
            }
            tot[static_cast<std::size_t>(best)] += k(v);
            if (best != old) {
                comm[vc] = best;
                moved = true;
                any_move = true;
            }
        }
    }
    return any_move;
}

}  // namespace

double modularity_resolution(const PatternGraph& graph, const std::vector<int>& community,
                             double resolution) {
    const Eigen::Index n = graph.node_count();
    Eigen::VectorXd k = Eigen::VectorXd::Zero(n);
    for (Eigen::Index v = 0; v < n; ++v) {
        for (Eigen::Index u = 0; u < n; ++u) {
            k(v) += graph.weights(v, u);
        }
    }
    double twom = 0.0;
    for (Eigen::Index v = 0; v < n; ++v) {
        twom += k(v);
    }
    if (twom == 0.0) {
        throw pipeline_error("modularity undefined: graph has no edges");
    }
    double q = 0.0;
    for (Eigen::Index v = 0; v < n; ++v) {
        for (Eigen::Index u = 0; u < n; ++u) {
            if (community[static_cast<std::size_t>(v)] == community[static_cast<std::size_t>(u)]) {
                q += graph.weights(v, u) - resolution * k(v) * k(u) / twom;
            }
        }
    }
    return q / twom;
}

LouvainResult louvain(const PatternGraph& graph, double resolution, std::uint64_t seed) {
    if (resolution <= 0.0) {
        throw config_error("louvain: resolution must be positive");
    }
    const Eigen::Index n = graph.node_count();
    LouvainResult result;
    result.partition.resolution = resolution;

    if (n == 0) {
        result.edgeless = true;
        return result;
    }
    if (graph.weights.sum() == 0.0) {
        // No edges: nothing to optimize, every node its own community.
        result.edgeless = true;
        result.partition.community.resize(static_cast<std::size_t>(n));
        std::iota(result.partition.community.begin(), result.partition.community.end(), 0);
        result.partition.community_count = static_cast<int>(n);
        return result;
    }

    Rng rng(seed);
    Eigen::MatrixXd level_w = graph.weights;
    // membership[v]: community of original node v in the current level's ids.
    std::vector<int> membership(static_cast<std::size_t>(n));
    std::iota(membership.begin(), membership.end(), 0);

    while (true) {
        std::vector<int> comm;
        const bool any_move = local_move_phase(level_w, resolution, rng, comm);
        const int count = renumber(comm);

        for (int& c : membership) {
            c = comm[static_cast<std::size_t>(c)];
        }
        result.pass_modularity.push_back(
            modularity_resolution(graph, membership, resolution));

        if (!any_move || count == static_cast<int>(level_w.rows())) {
            break;
        }
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(count, count);
        for (Eigen::Index v = 0; v < level_w.rows(); ++v) {
            for (Eigen::Index u = 0; u < level_w.cols(); ++u) {
                next(comm[static_cast<std::size_t>(v)], comm[static_cast<std::size_t>(u)]) +=
                    level_w(v, u);
            }
        }
        level_w = std::move(next);
    }

    result.partition.community = std::move(membership);
    result.partition.community_count = renumber(result.partition.community);
    return result;
}

BisectionResult kernighan_lin_bisect(const PatternGraph& graph, std::uint64_t seed,
                                     int max_passes) {
    const Eigen::Index n = graph.node_count();
    if (n < 2) {
        throw pipeline_error("bisection requires at least 2 nodes");
    }
    if (max_passes < 1) {
        throw config_error("bisection: max_passes must be positive");
    }
    // Ghost node balances odd sizes; it has no edges and is dropped at the end.
    const Eigen::Index total = n + (n % 2);
    const auto weight = [&](Eigen::Index a, Eigen::Index b) {
        return (a < n && b < n) ? graph.weights(a, b) : 0.0;
    };

    std::vector<int> side(static_cast<std::size_t>(total), 1);
    {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        Rng rng(seed);
        rng.shuffle(order);
        for (Eigen::Index i = 0; i < total / 2; ++i) {
            side[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 0;
        }
    }

    const auto cut = [&]() {
        double c = 0.0;
        for (Eigen::Index u = 0; u < n; ++u) {
            for (Eigen::Index v = u + 1; v < n; ++v) {
                if (side[static_cast<std::size_t>(u)] != side[static_cast<std::size_t>(v)]) {
                    c += graph.weights(u, v);
                }
            }
        }
        return c;
    };

    BisectionResult result;
    result.pass_cut.push_back(cut());

    std::vector<double> d(static_cast<std::size_t>(total));
    std::vector<bool> locked(static_cast<std::size_t>(total));
    for (int pass = 0; pass < max_passes; ++pass) {
        // D_v = external minus internal edge weight under the current split.
        for (Eigen::Index v = 0; v < total; ++v) {
            double ext = 0.0;
            double internal = 0.0;
            for (Eigen::Index u = 0; u < total; ++u) {
                if (u == v) continue;
                if (side[static_cast<std::size_t>(u)] == side[static_cast<std::size_t>(v)]) {
                    internal += weight(v, u);
                } else {
                    ext += weight(v, u);
                }
            }
            d[static_cast<std::size_t>(v)] = ext - internal;
        }
        std::fill(locked.begin(), locked.end(), false);

        std::vector<std::pair<Eigen::Index, Eigen::Index>> swaps;
        std::vector<double> gains;
        for (Eigen::Index step = 0; step < total / 2; ++step) {
            Eigen::Index best_a = -1;
            Eigen::Index best_b = -1;
            double best_gain = 0.0;
            for (Eigen::Index a = 0; a < total; ++a) {
                if (locked[static_cast<std::size_t>(a)] || side[static_cast<std::size_t>(a)] != 0)
                    continue;
                for (Eigen::Index b = 0; b < total; ++b) {
                    if (locked[static_cast<std::size_t>(b)] ||
                        side[static_cast<std::size_t>(b)] != 1)
                        continue;
                    const double g = d[static_cast<std::size_t>(a)] +
                                     d[static_cast<std::size_t>(b)] - 2.0 * weight(a, b);
                    if (best_a < 0 || g > best_gain) {
                        best_gain = g;
                        best_a = a;
                        best_b = b;
                    }
                }
            }
            if (best_a < 0) {
                break;
            }
            swaps.emplace_back(best_a, best_b);
            gains.push_back(best_gain);
            locked[static_cast<std::size_t>(best_a)] = true;
            locked[static_cast<std::size_t>(best_b)] = true;
            for (Eigen::Index x = 0; x < total; ++x) {
                if (locked[static_cast<std::size_t>(x)]) continue;
                const double delta = 2.0 * weight(x, best_a) - 2.0 * weight(x, best_b);
                d[static_cast<std::size_t>(x)] +=
                    side[static_cast<std::size_t>(x)] == 0 ? delta : -delta;
            }
        }

        // Best prefix of the tentative swap sequence (first maximum wins).
        double best_total = 0.0;
        std::size_t best_len = 0;
        double running = 0.0;
        for (std::size_t i = 0; i < gains.size(); ++i) {
            running += gains[i];
            if (running > best_total) {
                best_total = running;
                best_len = i + 1;
            }
        }
        if (best_len == 0) {
            break;
        }
        for (std::size_t i = 0; i < best_len; ++i) {
            std::swap(side[static_cast<std::size_t>(swaps[i].first)],
                      side[static_cast<std::size_t>(swaps[i].second)]);
        }
        result.pass_cut.push_back(cut());
    }

    result.cut_weight = result.pass_cut.back();
    result.partition.resolution = 1.0;
    result.partition.community_count = 2;
    result.partition.community.resize(static_cast<std::size_t>(n));
    const int first_side = side[0];
    for (Eigen::Index v = 0; v < n; ++v) {
        result.partition.community[static_cast<std::size_t>(v)] =
            side[static_cast<std::size_t>(v)] == first_side ? 0 : 1;
    }
    return result;
}

std::vector<Eigen::Index> community_sizes(const Partition& partition) {
    std::vector<Eigen::Index> sizes(static_cast<std::size_t>(partition.community_count), 0);
    for (int c : partition.community) {
        ++sizes[static_cast<std::size_t>(c)];
    }
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    return sizes;
}

}  // namespace neurograph
