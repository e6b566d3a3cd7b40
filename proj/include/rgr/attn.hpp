#pragma once

#include <stdexcept>
#include <vector>

#include "rgr/construct.hpp"

namespace rgr {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

class unsupported_operation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Ordered tuple of distinct vertex ids.
class Context {
public:
    Context() = default;
    explicit Context(std::vector<int> indices);

    int length() const noexcept { return static_cast<int>(indices_.size()); }
    const std::vector<int>& indices() const noexcept { return indices_; }
    int operator[](int p) const { return indices_[static_cast<std::size_t>(p)]; }

    void require_within(int m) const;

private:
    std::vector<int> indices_;
};

struct ScoreTensor {
    std::vector<Matrix> per_head;  // h matrices, each l x l

    int heads() const noexcept { return static_cast<int>(per_head.size()); }
    int length() const noexcept { return per_head.empty() ? 0 : static_cast<int>(per_head.front().rows()); }
};

struct ScoreDecomposition {
    double signal = 0.0;
    double n1 = 0.0;
    double n2 = 0.0;
    double n3 = 0.0;
    int head = 0;

    double total() const noexcept { return signal + n1 + n2 + n3; }
};

// S^(k) = (X_C W_Q^(k)) (X_C W_K^(k))^T, unscaled.
ScoreTensor head_scores(const AttentionParams& params, const EmbeddingMatrix& X, const Context& c);

Matrix aggregate_max(const ScoreTensor& t);

// Stabilised log-sum-exp over heads.
Matrix aggregate_lse(const ScoreTensor& t);

// Strict agg > tau; self-pairs are never edges.
BoolMatrix decide_edges(const Matrix& agg, double tau);

// Row softmax over the whole context (self included) of the max-aggregated
// scores; edge iff weight >= tau_hat, self-pairs excluded.
BoolMatrix softmax_decide(const ScoreTensor& t, const Context& c, double tau_hat);

// Lower bound 1/(delta + (ell - delta) e^{-gamma}) on a true edge's softmax weight.
double softmax_margin_bound(double gamma, int delta, int ell);

// Splits head k's score for (i, j) into the signature match and three
// leakage terms, using u_t = e_t + delta_t from the construction trace.
// Throws unsupported_operation when params carry no trace.
ScoreDecomposition score_decomposition(const AttentionParams& params, const EmbeddingMatrix& X, int i, int j, int k);

// Precomputed queries and keys for every vertex; scores of arbitrary pairs in O(D_K).
class PairScorer {
public:
    PairScorer(const AttentionParams& params, const EmbeddingMatrix& X);

    double head_score(int head, int source, int target) const;
    double max_score(int source, int target) const;
    // m x m matrix of max-aggregated scores.
    Matrix full_max_scores() const;

    int heads() const noexcept { return heads_; }

private:
    int heads_ = 0;
    int d_k_ = 0;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> queries_;  // m x D_K
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> keys_;     // m x D_K
};

}  // namespace rgr
