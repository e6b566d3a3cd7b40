#include "rgr/attn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rgr {

Context::Context(std::vector<int> indices) : indices_{std::move(indices)} {
    if (indices_.empty()) {
        throw std::invalid_argument("context must be non-empty");
    }
    std::vector<int> sorted = indices_;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0) {
        throw std::invalid_argument("negative vertex id in context");
    }
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw std::invalid_argument("context items must be distinct");
    }
}

void Context::require_within(int m) const {
    for (int v : indices_) {
        if (v >= m) {
            throw std::invalid_argument("context index " + std::to_string(v) + " out of range for m=" +
                                        std::to_string(m));
        }
    }
}

ScoreTensor head_scores(const AttentionParams& params, const EmbeddingMatrix& X, const Context& c) {
    c.require_within(X.m());
    if (params.d_model() != X.d_model()) {
        throw std::invalid_argument("params and embedding disagree on d_model");
    }
    const Matrix x_c = X.rows(c.indices(), Eigen::all);
    ScoreTensor t;
    t.per_head.reserve(params.heads.size());
    for (const auto& head : params.heads) {
        const Matrix q = x_c * head.w_q;
        const Matrix k = x_c * head.w_k;
        t.per_head.push_back(q * k.transpose());
    }
    return t;
}

Matrix aggregate_max(const ScoreTensor& t) {
    if (t.per_head.empty()) {
        throw std::invalid_argument("aggregation needs at least one head");
    }
    Matrix out = t.per_head.front();
    for (std::size_t k = 1; k < t.per_head.size(); ++k) {
        out = out.cwiseMax(t.per_head[k]);
    }
    return out;
}

Matrix aggregate_lse(const ScoreTensor& t) {
    const Matrix peak = aggregate_max(t);
    Matrix acc = Matrix::Zero(peak.rows(), peak.cols());
    for (const auto& s : t.per_head) {
        acc.array() += (s - peak).array().exp();
    }
    return peak.array() + acc.array().log();
}

BoolMatrix decide_edges(const Matrix& agg, double tau) {
    if (agg.rows() != agg.cols()) {
        throw std::invalid_argument("score matrix must be square");
    }
    BoolMatrix out = agg.array() > tau;
    out.matrix().diagonal().setConstant(false);
    return out;
}

BoolMatrix softmax_decide(const ScoreTensor& t, const Context& c, double tau_hat) {
    if (!(tau_hat > 0.0 && tau_hat < 1.0)) {
        throw std::invalid_argument("tau_hat must lie in (0, 1)");
    }
    if (t.length() != c.length()) {
        throw std::invalid_argument("score tensor does not match the context length");
    }
    const Matrix agg = aggregate_max(t);
    Matrix weights(agg.rows(), agg.cols());
    for (Eigen::Index p = 0; p < agg.rows(); ++p) {
        const double peak = agg.row(p).maxCoeff();
        const Eigen::ArrayXd e = (agg.row(p).array() - peak).exp().transpose();
        weights.row(p) = (e / e.sum()).transpose().matrix();
    }
    BoolMatrix out = weights.array() >= tau_hat;
    out.matrix().diagonal().setConstant(false);
    return out;
}

double softmax_margin_bound(double gamma, int delta, int ell) {
    if (delta < 1 || ell < delta) {
        throw std::invalid_argument("need ell >= delta >= 1");
    }
    return 1.0 / (delta + (ell - delta) * std::exp(-gamma));
}

ScoreDecomposition score_decomposition(const AttentionParams& params, const EmbeddingMatrix& X, int i, int j, int k) {
    if (!params.trace) {
        throw unsupported_operation("score decomposition needs a construction trace");
    }
    const auto& trace = *params.trace;
    if (k < 0 || k >= static_cast<int>(trace.blocks.size())) {
        throw std::invalid_argument("head index out of range");
    }
    if (i < 0 || j < 0 || i >= X.m() || j >= X.m()) {
        throw std::invalid_argument("vertex index out of range");
    }
    const HeadBlock& block = trace.blocks[static_cast<std::size_t>(k)];
    const Matrix& w = trace.signatures;

    Vector delta_i = approx_inverse_row(X.rows.row(i), X, trace.mu);
    Vector delta_j = approx_inverse_row(X.rows.row(j), X, trace.mu);
    delta_i(i) -= 1.0;
    delta_j(j) -= 1.0;

    // Query leakage: sum_s delta_i(s) w_pi(s); key leakage: sum_t delta_j(t) w_t.
    RowVector query_leak = RowVector::Zero(w.cols());
    RowVector key_leak = RowVector::Zero(w.cols());
    int own_target = -1;
    bool j_is_target = false;
    for (std::size_t t = 0; t < block.sources.size(); ++t) {
        const int s = block.sources[t];
        const int target = block.targets[t];
        query_leak += delta_i(s) * w.row(target);
        key_leak += delta_j(target) * w.row(target);
        if (s == i) {
            own_target = target;
        }
        if (target == j) {
            j_is_target = true;
        }
    }

    ScoreDecomposition d;
    d.head = k;
    if (own_target >= 0) {
        const auto w_target = w.row(own_target);
        if (j_is_target) {
            d.signal = w_target.dot(w.row(j));
        }
        d.n1 = w_target.dot(key_leak);
    }
    if (j_is_target) {
        d.n2 = query_leak.dot(w.row(j));
    }
    d.n3 = query_leak.dot(key_leak);
    return d;
}

PairScorer::PairScorer(const AttentionParams& params, const EmbeddingMatrix& X)
    : heads_{params.h()}, d_k_{params.d_k()} {
    if (params.d_model() != X.d_model()) {
        throw std::invalid_argument("params and embedding disagree on d_model");
    }
    queries_.resize(X.m(), static_cast<Eigen::Index>(heads_) * d_k_);
    keys_.resize(X.m(), static_cast<Eigen::Index>(heads_) * d_k_);
    for (int k = 0; k < heads_; ++k) {
        const auto& head = params.heads[static_cast<std::size_t>(k)];
        queries_.middleCols(static_cast<Eigen::Index>(k) * d_k_, d_k_) = X.rows * head.w_q;
        keys_.middleCols(static_cast<Eigen::Index>(k) * d_k_, d_k_) = X.rows * head.w_k;
    }
}

double PairScorer::head_score(int head, int source, int target) const {
    const auto offset = static_cast<Eigen::Index>(head) * d_k_;
    return queries_.row(source).segment(offset, d_k_).dot(keys_.row(target).segment(offset, d_k_));
}

double PairScorer::max_score(int source, int target) const {
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < heads_; ++k) {
        best = std::max(best, head_score(k, source, target));
    }
    return best;
}

Matrix PairScorer::full_max_scores() const {
    const auto m = queries_.rows();
    Matrix out = Matrix::Constant(m, m, -std::numeric_limits<double>::infinity());
    for (int k = 0; k < heads_; ++k) {
        const auto offset = static_cast<Eigen::Index>(k) * d_k_;
        const Matrix s = queries_.middleCols(offset, d_k_) * keys_.middleCols(offset, d_k_).transpose();
        out = out.cwiseMax(s);
    }
    return out;
}

}  // namespace rgr
