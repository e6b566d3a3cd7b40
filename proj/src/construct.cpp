#include "rgr/construct.hpp"

#include <cmath>
#include <stdexcept>

namespace rgr {

std::string_view to_string(SignatureKind kind) noexcept {
    return kind == SignatureKind::bernoulli ? "bernoulli" : "rademacher";
}

SignatureKind signature_kind_from_string(std::string_view name) {
    if (name == "bernoulli") {
        return SignatureKind::bernoulli;
    }
    if (name == "rademacher") {
        return SignatureKind::rademacher;
    }
    throw std::invalid_argument("unknown signature kind '" + std::string(name) + "'");
}

void AttentionParams::validate() const {
    for (const auto& head : heads) {
        if (head.w_q.rows() != d_model() || head.w_k.rows() != d_model() || head.w_q.cols() != d_k() ||
            head.w_k.cols() != d_k()) {
            throw std::invalid_argument("attention heads disagree on (d_model, d_k)");
        }
    }
}

AttentionParams AttentionParams::zeros(int h, int d_model, int d_k, double tau) {
    AttentionParams params;
    params.heads.assign(static_cast<std::size_t>(h), {Matrix::Zero(d_model, d_k), Matrix::Zero(d_model, d_k)});
    params.tau = tau;
    return params;
}

int default_key_width(int m, double c) {
    return static_cast<int>(std::ceil(c * std::log(static_cast<double>(m))));
}

Matrix draw_signatures(int m, int d_k, SignatureKind kind, double p, Seed seed) {
    Rng rng(seed, Stream::signatures);
    Matrix w(m, d_k);
    for (int j = 0; j < m; ++j) {
        for (int r = 0; r < d_k; ++r) {
            w(j, r) = kind == SignatureKind::bernoulli ? (rng.bernoulli(p) ? 1.0 : 0.0) : rng.rademacher();
        }
    }
    return w;
}

namespace {

// W_Q = X_inv W'_Q and W_K = X_inv W'_K where the templates hold signature
// rows only on the block's sources (resp. targets).
AttentionHead realize_head(const HeadBlock& block, const Matrix& signatures, const EmbeddingMatrix& X, double mu) {
    const Matrix x_src = X.rows(block.sources, Eigen::all);
    const Matrix x_dst = X.rows(block.targets, Eigen::all);
    const Matrix sig = signatures(block.targets, Eigen::all);
    AttentionHead head;
    head.w_q = x_src.transpose() * sig;
    head.w_k = x_dst.transpose() * sig;
    if (mu != 1.0) {
        head.w_q /= mu;
        head.w_k /= mu;
    }
    return head;
}

std::vector<HeadBlock> contiguous_blocks(const PermutationGraph& pi, int block_size) {
    const int m = pi.size();
    std::vector<HeadBlock> blocks;
    for (int start = 0; start < m; start += block_size) {
        HeadBlock block;
        for (int s = start; s < std::min(m, start + block_size); ++s) {
            block.sources.push_back(s);
            block.targets.push_back(pi.target(s));
        }
        blocks.push_back(std::move(block));
    }
    return blocks;
}

AttentionParams assemble(std::vector<HeadBlock> blocks, Matrix signatures, const EmbeddingMatrix& X, double mu,
                         SignatureKind kind, double p, double tau, std::string construction, Seed seed) {
    AttentionParams params;
    params.heads.reserve(blocks.size());
    for (const auto& block : blocks) {
        params.heads.push_back(realize_head(block, signatures, X, mu));
    }
    params.tau = tau;
    params.construction = std::move(construction);
    params.seed = seed;
    params.trace = ConstructionTrace{std::move(signatures), std::move(blocks), kind, p, mu};
    return params;
}

void require_width(int d_k) {
    if (d_k < 1) {
        throw std::invalid_argument("d_k must be positive");
    }
}

void require_gun(const EmbeddingMatrix& X, int m) {
    if (X.kind != EmbeddingKind::gaussian_unit_norm) {
        throw std::invalid_argument("construction requires a Gaussian unit-norm embedding");
    }
    if (X.m() != m) {
        throw std::invalid_argument("embedding row count does not match the graph");
    }
}

}  // namespace

AttentionParams construct_onehot_permutation(const PermutationGraph& pi, double p, int d_k, Seed seed) {
    if (!(p > 0.0 && p < 0.5)) {
        throw std::invalid_argument("p must lie in (0, 1/2)");
    }
    require_width(d_k);
    const int m = pi.size();
    Matrix keys = draw_signatures(m, d_k, SignatureKind::bernoulli, p, seed);
    AttentionHead head;
    head.w_k = keys;
    head.w_q.resize(m, d_k);
    for (int i = 0; i < m; ++i) {
        head.w_q.row(i) = keys.row(pi.target(i));
    }
    AttentionParams params;
    params.heads.push_back(std::move(head));
    params.tau = (p + p * p) / 2.0 * d_k;
    params.construction = "I";
    params.seed = seed;
    params.trace = ConstructionTrace{std::move(keys), contiguous_blocks(pi, m), SignatureKind::bernoulli, p, 1.0};
    return params;
}

AttentionParams construct_compressive_permutation(const PermutationGraph& pi, const EmbeddingMatrix& X, int d_k,
                                                  Seed seed) {
    require_gun(X, pi.size());
    require_width(d_k);
    if (X.d_model() > pi.size()) {
        throw std::invalid_argument("compressive construction needs d_model <= m");
    }
    return assemble(contiguous_blocks(pi, X.d_model()),
                    draw_signatures(pi.size(), d_k, SignatureKind::rademacher, 0.0, seed), X, 1.0,
                    SignatureKind::rademacher, 0.0, d_k / 2.0, "II", seed);
}

AttentionParams construct_general_embedding(const PermutationGraph& pi, const EmbeddingMatrix& X, double mu,
                                            int block_size, double p, int d_k, Seed seed, SignatureKind signatures) {
    const int m = pi.size();
    if (X.m() != m) {
        throw std::invalid_argument("embedding row count does not match the graph");
    }
    if (block_size < 1 || block_size > m) {
        throw std::invalid_argument("block size must lie in [1, m]");
    }
    if (!(mu > 0.0)) {
        throw std::invalid_argument("mu must be positive");
    }
    require_width(d_k);
    double tau = d_k / 2.0;
    if (signatures == SignatureKind::bernoulli) {
        if (!(p > 0.0 && p <= 1.0 / 20.0)) {
            throw std::invalid_argument("signature sparsity p must lie in (0, 1/20]");
        }
        tau = (p + p * p) / 2.0 * d_k;
    }
    return assemble(contiguous_blocks(pi, block_size), draw_signatures(m, d_k, signatures, p, seed), X, mu,
                    signatures, signatures == SignatureKind::bernoulli ? p : 0.0, tau, "III", seed);
}

AttentionParams construct_general_graph(const DirectedGraph& g, const EmbeddingMatrix& X, int d_k, Seed seed) {
    require_gun(X, g.vertex_count());
    require_width(d_k);
    const auto decomposition = decompose_into_matchings(g, X.d_model());
    std::vector<HeadBlock> blocks;
    blocks.reserve(decomposition.size());
    for (const auto& matching : decomposition.matchings) {
        HeadBlock block;
        for (const Edge& e : matching) {
            block.sources.push_back(e.source);
            block.targets.push_back(e.target);
        }
        blocks.push_back(std::move(block));
    }
    if (blocks.empty()) {
        AttentionParams params = AttentionParams::zeros(1, X.d_model(), d_k, d_k / 2.0);
        params.construction = "IV";
        params.seed = seed;
        params.trace = ConstructionTrace{draw_signatures(g.vertex_count(), d_k, SignatureKind::rademacher, 0.0, seed),
                                         {HeadBlock{}}, SignatureKind::rademacher, 0.0, 1.0};
        return params;
    }
    return assemble(std::move(blocks), draw_signatures(g.vertex_count(), d_k, SignatureKind::rademacher, 0.0, seed),
                    X, 1.0, SignatureKind::rademacher, 0.0, d_k / 2.0, "IV", seed);
}

}  // namespace rgr
