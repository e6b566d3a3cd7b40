#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgr/embed.hpp"
#include "rgr/graph.hpp"

namespace rgr {

struct AttentionHead {
    Matrix w_q;  // d_model x d_k
    Matrix w_k;  // d_model x d_k

    // Exact, shape-aware comparison.
    friend bool operator==(const AttentionHead& a, const AttentionHead& b) {
        const auto same = [](const Matrix& x, const Matrix& y) {
            return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
        };
        return same(a.w_q, b.w_q) && same(a.w_k, b.w_k);
    }
};

enum class SignatureKind { bernoulli, rademacher };

std::string_view to_string(SignatureKind kind) noexcept;
SignatureKind signature_kind_from_string(std::string_view name);

// One head's share of the relation: sources[t] -> targets[t] is the local
// bijection, so sources are distinct and targets are distinct.
struct HeadBlock {
    std::vector<int> sources;
    std::vector<int> targets;
};

struct ConstructionTrace {
    Matrix signatures;  // m x d_k, entries in {0,1} or {-1,+1}
    std::vector<HeadBlock> blocks;  // one per head
    SignatureKind kind = SignatureKind::rademacher;
    double p = 0.0;  // Bernoulli density; unused for Rademacher
    double mu = 1.0;
};

struct AttentionParams {
    std::vector<AttentionHead> heads;
    double tau = 0.0;
    std::string construction;  // "I".."IV", "trained" or empty
    Seed seed = 0;
    std::optional<ConstructionTrace> trace;

    int h() const noexcept { return static_cast<int>(heads.size()); }
    int d_model() const noexcept { return heads.empty() ? 0 : static_cast<int>(heads.front().w_q.rows()); }
    int d_k() const noexcept { return heads.empty() ? 0 : static_cast<int>(heads.front().w_q.cols()); }
    int total_key_dim() const noexcept { return h() * d_k(); }

    // Throws unless every head has the same (d_model, d_k) shape.
    void validate() const;

    static AttentionParams zeros(int h, int d_model, int d_k, double tau);
};

// ceil(C * ln m); C = 6 is the library default.
int default_key_width(int m, double c = 6.0);

// Rows of an m x d_k signature matrix; deterministic per seed.
Matrix draw_signatures(int m, int d_k, SignatureKind kind, double p, Seed seed);

// Construction I: one-hot inputs, one head, Bernoulli(p) keys; row i of W_Q is row pi(i) of W_K.
AttentionParams construct_onehot_permutation(const PermutationGraph& pi, double p, int d_k, Seed seed);

// Construction II: Gaussian unit-norm X, ceil(m/d_model) contiguous source
// blocks, shared Rademacher signatures, de-embedding through X^T, tau = d_k/2.
AttentionParams construct_compressive_permutation(const PermutationGraph& pi, const EmbeddingMatrix& X, int d_k,
                                                  Seed seed);

// Construction III: any embedding through X_inv = X^T / mu with blocks of
// size B. Bernoulli(p) signatures use tau = (p + p^2)/2 * d_k and need
// p <= 1/20; Rademacher signatures use tau = d_k/2 and ignore p.
AttentionParams construct_general_embedding(const PermutationGraph& pi, const EmbeddingMatrix& X, double mu,
                                            int block_size, double p, int d_k, Seed seed,
                                            SignatureKind signatures = SignatureKind::bernoulli);

// Construction IV: arbitrary digraph packed into matchings of size <= d_model,
// one head per matching, otherwise as Construction II. An edgeless graph gets
// a single all-zero head.
AttentionParams construct_general_graph(const DirectedGraph& g, const EmbeddingMatrix& X, int d_k, Seed seed);

}  // namespace rgr
