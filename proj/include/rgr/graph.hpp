#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include "rgr/rng.hpp"

namespace rgr {

struct Edge {
    int source = 0;
    int target = 0;

    friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Loop-free directed graph on vertices [0, m). Edges are kept sorted and
// unique; construction validates every invariant.
class DirectedGraph {
public:
    DirectedGraph() = default;
    DirectedGraph(int m, std::vector<Edge> edges);

    int vertex_count() const noexcept { return m_; }
    std::int64_t edge_count() const noexcept { return static_cast<std::int64_t>(edges_.size()); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }

    bool has_edge(int source, int target) const;
    std::vector<int> out_degrees() const;
    std::vector<int> in_degrees() const;

    // Row-major m*m membership table, handy for bulk labelling.
    std::vector<char> adjacency() const;

private:
    int m_ = 0;
    std::vector<Edge> edges_;
};

// A derangement pi of [0, m): edges (i, pi[i]).
class PermutationGraph {
public:
    PermutationGraph() = default;
    explicit PermutationGraph(std::vector<int> pi);

    int size() const noexcept { return static_cast<int>(pi_.size()); }
    int target(int source) const { return pi_.at(static_cast<std::size_t>(source)); }
    const std::vector<int>& map() const noexcept { return pi_; }
    std::vector<int> inverse() const;
    DirectedGraph to_graph() const;

private:
    std::vector<int> pi_;
};

struct MatchingDecomposition {
    // Each matching is a partial bijection: distinct sources, distinct targets.
    std::vector<std::vector<Edge>> matchings;
    int block_cap = 0;

    std::size_t size() const noexcept { return matchings.size(); }
};

PermutationGraph random_derangement(int m, Seed seed);

// Uniform m_prime-subset of the m(m-1) ordered loop-free pairs.
DirectedGraph random_directed_graph(int m, std::int64_t m_prime, Seed seed);

// Random digraph whose in- and out-degrees never exceed degree_cap. Edges are
// proposed uniformly and rejected when they would break the cap; this is not
// uniform over the capped family. Throws if the cap makes m_prime unreachable.
DirectedGraph random_bounded_degree_digraph(int m, std::int64_t m_prime, int degree_cap, Seed seed);

int max_out_degree(const DirectedGraph& g);
int max_in_degree(const DirectedGraph& g);
int max_degree(const DirectedGraph& g);

// Proper edge colouring of the bipartite incidence graph with exactly
// max_degree(g) colours; result[e] is the colour of g.edges()[e].
std::vector<int> bipartite_edge_coloring(const DirectedGraph& g);

// Colour classes split into chunks of at most block_cap edges.
MatchingDecomposition decompose_into_matchings(const DirectedGraph& g, int block_cap);

}  // namespace rgr
