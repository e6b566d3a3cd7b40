#include "rgr/graph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace rgr {

DirectedGraph::DirectedGraph(int m, std::vector<Edge> edges) : m_{m}, edges_{std::move(edges)} {
    if (m < 0) {
        throw std::invalid_argument("vertex count must be non-negative");
    }
    for (const Edge& e : edges_) {
        if (e.source < 0 || e.source >= m || e.target < 0 || e.target >= m) {
            throw std::invalid_argument("edge (" + std::to_string(e.source) + ", " +
                                        std::to_string(e.target) + ") out of range");
        }
        if (e.source == e.target) {
            throw std::invalid_argument("self-loop at vertex " + std::to_string(e.source));
        }
    }
    std::sort(edges_.begin(), edges_.end());
    if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
        throw std::invalid_argument("duplicate edge");
    }
}

bool DirectedGraph::has_edge(int source, int target) const {
    return std::binary_search(edges_.begin(), edges_.end(), Edge{source, target});
}

std::vector<int> DirectedGraph::out_degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(m_), 0);
    for (const Edge& e : edges_) {
        ++deg[static_cast<std::size_t>(e.source)];
    }
    return deg;
}

std::vector<int> DirectedGraph::in_degrees() const {
    std::vector<int> deg(static_cast<std::size_t>(m_), 0);
    for (const Edge& e : edges_) {
        ++deg[static_cast<std::size_t>(e.target)];
    }
    return deg;
}

std::vector<char> DirectedGraph::adjacency() const {
    const auto m = static_cast<std::size_t>(m_);
    std::vector<char> adj(m * m, 0);
    for (const Edge& e : edges_) {
        adj[static_cast<std::size_t>(e.source) * m + static_cast<std::size_t>(e.target)] = 1;
    }
    return adj;
}

PermutationGraph::PermutationGraph(std::vector<int> pi) : pi_{std::move(pi)} {
    std::vector<char> seen(pi_.size(), 0);
    for (std::size_t i = 0; i < pi_.size(); ++i) {
        const int t = pi_[i];
        if (t < 0 || static_cast<std::size_t>(t) >= pi_.size() || seen[static_cast<std::size_t>(t)]) {
            throw std::invalid_argument("pi is not a bijection");
        }
        if (static_cast<std::size_t>(t) == i) {
            throw std::invalid_argument("pi has a fixed point at " + std::to_string(i));
        }
        seen[static_cast<std::size_t>(t)] = 1;
    }
}

std::vector<int> PermutationGraph::inverse() const {
    std::vector<int> inv(pi_.size());
    for (std::size_t i = 0; i < pi_.size(); ++i) {
        inv[static_cast<std::size_t>(pi_[i])] = static_cast<int>(i);
    }
    return inv;
}

DirectedGraph PermutationGraph::to_graph() const {
    std::vector<Edge> edges;
    edges.reserve(pi_.size());
    for (std::size_t i = 0; i < pi_.size(); ++i) {
        edges.push_back({static_cast<int>(i), pi_[i]});
    }
    return DirectedGraph(size(), std::move(edges));
}

PermutationGraph random_derangement(int m, Seed seed) {
    if (m < 2) {
        throw std::invalid_argument("derangement requires m >= 2");
    }
    Rng rng(seed, Stream::permutation);
    std::vector<int> pi(static_cast<std::size_t>(m));
    for (;;) {
        std::iota(pi.begin(), pi.end(), 0);
        std::shuffle(pi.begin(), pi.end(), rng.engine());
        bool fixed = false;
        for (int i = 0; i < m && !fixed; ++i) {
            fixed = pi[static_cast<std::size_t>(i)] == i;
        }
        if (!fixed) {
            return PermutationGraph(std::move(pi));
        }
    }
}

namespace {

std::int64_t pair_count(int m) {
    return static_cast<std::int64_t>(m) * (m - 1);
}

// Index r in [0, m(m-1)) -> ordered pair with target skipping the source.
Edge pair_from_index(std::int64_t r, int m) {
    const auto source = static_cast<int>(r / (m - 1));
    auto target = static_cast<int>(r % (m - 1));
    if (target >= source) {
        ++target;
    }
    return {source, target};
}

}  // namespace

DirectedGraph random_directed_graph(int m, std::int64_t m_prime, Seed seed) {
    if (m < 1) {
        throw std::invalid_argument("m must be positive");
    }
    const std::int64_t total = pair_count(m);
    if (m_prime < 0 || m_prime > total) {
        throw std::invalid_argument("m_prime must lie in [0, m(m-1)]");
    }
    Rng rng(seed, Stream::graph);
    // Floyd's subset sampling: uniform over all m_prime-subsets.
    std::unordered_set<std::int64_t> chosen;
    chosen.reserve(static_cast<std::size_t>(m_prime) * 2);
    for (std::int64_t j = total - m_prime; j < total; ++j) {
        std::uniform_int_distribution<std::int64_t> dist(0, j);
        const std::int64_t t = dist(rng.engine());
        if (!chosen.insert(t).second) {
            chosen.insert(j);
        }
    }
    std::vector<Edge> edges;
    edges.reserve(chosen.size());
    for (std::int64_t r : chosen) {
        edges.push_back(pair_from_index(r, m));
    }
    return DirectedGraph(m, std::move(edges));
}

DirectedGraph random_bounded_degree_digraph(int m, std::int64_t m_prime, int degree_cap, Seed seed) {
    if (m < 2 || degree_cap < 1) {
        throw std::invalid_argument("need m >= 2 and degree_cap >= 1");
    }
    if (m_prime < 0 || m_prime > static_cast<std::int64_t>(m) * std::min(degree_cap, m - 1)) {
        throw std::invalid_argument("m_prime unreachable under the degree cap");
    }
    const std::int64_t total = pair_count(m);
    Rng rng(seed, Stream::graph);
    std::vector<int> out(static_cast<std::size_t>(m), 0);
    std::vector<int> in(static_cast<std::size_t>(m), 0);
    std::unordered_set<std::int64_t> chosen;
    std::uniform_int_distribution<std::int64_t> dist(0, total - 1);
    const std::int64_t max_proposals = 1000 * std::max<std::int64_t>(total, 1);
    std::int64_t proposals = 0;
    while (static_cast<std::int64_t>(chosen.size()) < m_prime) {
        if (++proposals > max_proposals) {
            throw std::runtime_error("bounded-degree sampler got stuck; lower m_prime or raise the cap");
        }
        const std::int64_t r = dist(rng.engine());
        const Edge e = pair_from_index(r, m);
        auto& o = out[static_cast<std::size_t>(e.source)];
        auto& i = in[static_cast<std::size_t>(e.target)];
        if (o >= degree_cap || i >= degree_cap || chosen.contains(r)) {
            continue;
        }
        chosen.insert(r);
        ++o;
        ++i;
    }
    std::vector<Edge> edges;
    edges.reserve(chosen.size());
    for (std::int64_t r : chosen) {
        edges.push_back(pair_from_index(r, m));
    }
    return DirectedGraph(m, std::move(edges));
}

int max_out_degree(const DirectedGraph& g) {
    const auto deg = g.out_degrees();
    return deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
}

int max_in_degree(const DirectedGraph& g) {
    const auto deg = g.in_degrees();
    return deg.empty() ? 0 : *std::max_element(deg.begin(), deg.end());
}

int max_degree(const DirectedGraph& g) {
    return std::max(max_out_degree(g), max_in_degree(g));
}

std::vector<int> bipartite_edge_coloring(const DirectedGraph& g) {
    const int colors = max_degree(g);
    const auto m = static_cast<std::size_t>(g.vertex_count());
    const auto& edges = g.edges();
    constexpr int kNone = -1;
    // at_source[u*colors + c] / at_target[v*colors + c]: edge index holding colour c.
    std::vector<int> at_source(m * static_cast<std::size_t>(colors), kNone);
    std::vector<int> at_target(m * static_cast<std::size_t>(colors), kNone);
    std::vector<int> color(edges.size(), kNone);

    auto src_slot = [&](int u, int c) -> int& {
        return at_source[static_cast<std::size_t>(u) * static_cast<std::size_t>(colors) + static_cast<std::size_t>(c)];
    };
    auto dst_slot = [&](int v, int c) -> int& {
        return at_target[static_cast<std::size_t>(v) * static_cast<std::size_t>(colors) + static_cast<std::size_t>(c)];
    };
    auto lowest_free = [&](auto&& slot, int vertex) {
        for (int c = 0; c < colors; ++c) {
            if (slot(vertex, c) == kNone) {
                return c;
            }
        }
        throw std::logic_error("no free colour; degree bookkeeping broken");
    };

    std::vector<int> path;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const int u = edges[e].source;
        const int v = edges[e].target;
        const int a = lowest_free(src_slot, u);
        if (dst_slot(v, a) != kNone) {
            const int b = lowest_free(dst_slot, v);
            // Walk the a/b alternating path leaving v and swap its colours;
            // bipartiteness guarantees it never reaches u, freeing a at v.
            path.clear();
            int vertex = v;
            bool on_target_side = true;
            int want = a;
            for (;;) {
                const int next = on_target_side ? dst_slot(vertex, want) : src_slot(vertex, want);
                if (next == kNone) {
                    break;
                }
                path.push_back(next);
                vertex = on_target_side ? edges[static_cast<std::size_t>(next)].source
                                        : edges[static_cast<std::size_t>(next)].target;
                on_target_side = !on_target_side;
                want = want == a ? b : a;
            }
            for (int pe : path) {
                const Edge& pe_edge = edges[static_cast<std::size_t>(pe)];
                src_slot(pe_edge.source, color[static_cast<std::size_t>(pe)]) = kNone;
                dst_slot(pe_edge.target, color[static_cast<std::size_t>(pe)]) = kNone;
            }
            for (int pe : path) {
                const Edge& pe_edge = edges[static_cast<std::size_t>(pe)];
                int& c = color[static_cast<std::size_t>(pe)];
                c = c == a ? b : a;
                src_slot(pe_edge.source, c) = pe;
                dst_slot(pe_edge.target, c) = pe;
            }
        }
        color[e] = a;
        src_slot(u, a) = static_cast<int>(e);
        dst_slot(v, a) = static_cast<int>(e);
    }
    return color;
}

MatchingDecomposition decompose_into_matchings(const DirectedGraph& g, int block_cap) {
    if (block_cap < 1) {
        throw std::invalid_argument("block_cap must be >= 1");
    }
    const int colors = max_degree(g);
    const auto color = bipartite_edge_coloring(g);
    std::vector<std::vector<Edge>> classes(static_cast<std::size_t>(colors));
    for (std::size_t e = 0; e < color.size(); ++e) {
        classes[static_cast<std::size_t>(color[e])].push_back(g.edges()[e]);
    }
    MatchingDecomposition out;
    out.block_cap = block_cap;
    const auto cap = static_cast<std::size_t>(block_cap);
    for (const auto& cls : classes) {
        for (std::size_t start = 0; start < cls.size(); start += cap) {
            const std::size_t stop = std::min(cls.size(), start + cap);
            out.matchings.emplace_back(cls.begin() + static_cast<std::ptrdiff_t>(start),
                                       cls.begin() + static_cast<std::ptrdiff_t>(stop));
        }
    }
    return out;
}

}  // namespace rgr
