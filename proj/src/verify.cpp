#include "rgr/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rgr {

SeparationReport full_separation_check(const AttentionParams& params, const EmbeddingMatrix& X,
                                       const DirectedGraph& g) {
    const int m = g.vertex_count();
    if (X.m() != m) {
        throw std::invalid_argument("embedding row count does not match the graph");
    }
    const PairScorer scorer(params, X);
    const Matrix s = scorer.full_max_scores();
    const auto adj = g.adjacency();

    SeparationReport r;
    r.min_true_margin = std::numeric_limits<double>::infinity();
    r.max_false_margin = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            if (i == j) {
                continue;
            }
            const double margin = s(i, j) - params.tau;
            if (adj[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) + static_cast<std::size_t>(j)]) {
                r.min_true_margin = std::min(r.min_true_margin, margin);
                r.true_violations += margin > 0.0 ? 0 : 1;
            } else {
                r.max_false_margin = std::max(r.max_false_margin, margin);
                r.false_violations += margin < 0.0 ? 0 : 1;
            }
        }
    }
    r.pass = r.min_true_margin > 0.0 && r.max_false_margin < 0.0;
    return r;
}

Context sample_uniform_context(int m, int ell, Rng& rng) {
    if (ell < 1 || ell > m) {
        throw std::invalid_argument("context length must lie in [1, m]");
    }
    std::vector<int> items;
    items.reserve(static_cast<std::size_t>(ell));
    if (2 * ell <= m) {
        // Rejection is cheap while the context is at most half the vertex set.
        while (static_cast<int>(items.size()) < ell) {
            const int v = rng.uniform_index(m);
            if (std::find(items.begin(), items.end(), v) == items.end()) {
                items.push_back(v);
            }
        }
    } else {
        std::vector<int> all(static_cast<std::size_t>(m));
        std::iota(all.begin(), all.end(), 0);
        for (int t = 0; t < ell; ++t) {
            const int pick = t + rng.uniform_index(m - t);
            std::swap(all[static_cast<std::size_t>(t)], all[static_cast<std::size_t>(pick)]);
            items.push_back(all[static_cast<std::size_t>(t)]);
        }
    }
    return Context(std::move(items));
}

Context sample_context(const PermutationGraph& pi, int ell, double rho, Rng& rng) {
    const int m = pi.size();
    if (ell < 2 || ell > m) {
        throw std::invalid_argument("context length must lie in [2, m]");
    }
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw std::invalid_argument("rho must lie in [0, 1]");
    }
    std::vector<int> items = sample_uniform_context(m, ell, rng).indices();

    const int b = rng.binomial(ell, rho);
    // U: b members chosen uniformly, remembered by identity.
    std::vector<int> positions(static_cast<std::size_t>(ell));
    std::iota(positions.begin(), positions.end(), 0);
    std::vector<int> chosen;
    chosen.reserve(static_cast<std::size_t>(b));
    for (int t = 0; t < b; ++t) {
        const int pick = t + rng.uniform_index(ell - t);
        std::swap(positions[static_cast<std::size_t>(t)], positions[static_cast<std::size_t>(pick)]);
        chosen.push_back(items[static_cast<std::size_t>(positions[static_cast<std::size_t>(t)])]);
    }

    std::vector<int> victims;
    for (int i : chosen) {
        const int target = pi.target(i);
        if (std::find(items.begin(), items.end(), target) != items.end()) {
            continue;
        }
        victims.clear();
        for (int p = 0; p < ell; ++p) {
            if (items[static_cast<std::size_t>(p)] != i) {
                victims.push_back(p);
            }
        }
        const int p = victims[static_cast<std::size_t>(rng.uniform_index(static_cast<int>(victims.size())))];
        items[static_cast<std::size_t>(p)] = target;
    }
    return Context(std::move(items));
}

Context sample_context(const PermutationGraph& pi, int ell, double rho, Seed seed) {
    Rng rng(seed, Stream::contexts);
    return sample_context(pi, ell, rho, rng);
}

std::vector<Context> sample_contexts(const PermutationGraph& pi, int count, int ell, double rho, Seed seed,
                                     Stream stream) {
    std::vector<Context> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) {
        Rng rng(seed, stream, static_cast<std::uint64_t>(t));
        out.push_back(sample_context(pi, ell, rho, rng));
    }
    return out;
}

double ConfusionCounts::f1() const noexcept {
    const std::int64_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 1.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

ConfusionCounts pooled_confusion(const PairScorer& scorer, double tau, const std::vector<char>& adjacency, int m,
                                 const std::vector<Context>& contexts) {
    ConfusionCounts counts;
    for (const auto& c : contexts) {
        c.require_within(m);
        const int ell = c.length();
        for (int p = 0; p < ell; ++p) {
            for (int q = 0; q < ell; ++q) {
                if (p == q) {
                    continue;
                }
                const int u = c[p];
                const int v = c[q];
                const bool truth =
                    adjacency[static_cast<std::size_t>(u) * static_cast<std::size_t>(m) + static_cast<std::size_t>(v)] != 0;
                const bool predicted = scorer.max_score(u, v) > tau;
                if (truth && predicted) {
                    ++counts.tp;
                } else if (predicted) {
                    ++counts.fp;
                } else if (truth) {
                    ++counts.fn;
                } else {
                    ++counts.tn;
                }
            }
        }
    }
    return counts;
}

double micro_f1(const AttentionParams& params, const EmbeddingMatrix& X, const DirectedGraph& g,
                const std::vector<Context>& contexts) {
    if (contexts.empty()) {
        throw std::invalid_argument("micro-F1 needs at least one context");
    }
    const PairScorer scorer(params, X);
    return pooled_confusion(scorer, params.tau, g.adjacency(), g.vertex_count(), contexts).f1();
}

double micro_f1(const AttentionParams& params, const EmbeddingMatrix& X, const PermutationGraph& pi,
                const std::vector<Context>& contexts) {
    return micro_f1(params, X, pi.to_graph(), contexts);
}

int ConstructionSpec::resolved_d_k() const {
    return d_k > 0 ? d_k : default_key_width(m);
}

ConstructionDraw draw_construction(const ConstructionSpec& spec, Seed seed) {
    const int d_k = spec.resolved_d_k();
    switch (spec.kind) {
    case ConstructionKind::one_hot_permutation: {
        auto pi = random_derangement(spec.m, seed);
        auto params = construct_onehot_permutation(pi, spec.p, d_k, seed);
        auto graph = pi.to_graph();
        return {std::move(graph), std::move(pi), gen_one_hot(spec.m), std::move(params)};
    }
    case ConstructionKind::compressive_permutation: {
        auto pi = random_derangement(spec.m, seed);
        auto X = gen_gaussian_unit_norm(spec.m, spec.d_model, seed);
        auto params = construct_compressive_permutation(pi, X, d_k, seed);
        auto graph = pi.to_graph();
        return {std::move(graph), std::move(pi), std::move(X), std::move(params)};
    }
    case ConstructionKind::general_embedding: {
        auto pi = random_derangement(spec.m, seed);
        EmbeddingMatrix X;
        switch (spec.embedding) {
        case EmbeddingKind::one_hot:
            X = gen_one_hot(spec.m);
            break;
        case EmbeddingKind::gaussian_unit_norm:
            X = gen_gaussian_unit_norm(spec.m, spec.d_model, seed);
            break;
        case EmbeddingKind::sparse_binary:
            X = gen_sparse_binary(spec.m, spec.d_model, spec.p_b, seed);
            break;
        }
        const double mu = spec.mu > 0.0 ? spec.mu : X.default_mu();
        const int block = spec.block_size > 0 ? spec.block_size : X.d_model();
        auto params = construct_general_embedding(pi, X, mu, block, spec.p, d_k, seed, spec.signatures);
        auto graph = pi.to_graph();
        return {std::move(graph), std::move(pi), std::move(X), std::move(params)};
    }
    case ConstructionKind::general_graph: {
        auto graph = spec.degree_cap > 0
                         ? random_bounded_degree_digraph(spec.m, spec.m_prime, spec.degree_cap, seed)
                         : random_directed_graph(spec.m, spec.m_prime, seed);
        auto X = gen_gaussian_unit_norm(spec.m, spec.d_model, seed);
        auto params = construct_general_graph(graph, X, d_k, seed);
        return {std::move(graph), std::nullopt, std::move(X), std::move(params)};
    }
    }
    throw std::logic_error("unhandled construction kind");
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) {
        return *mid;
    }
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace

MonteCarloSummary monte_carlo_success(const ConstructionSpec& spec, int trials, Seed seed) {
    if (trials < 1) {
        throw std::invalid_argument("need at least one trial");
    }
    MonteCarloSummary summary;
    summary.trials = trials;
    std::vector<double> true_margins;
    std::vector<double> false_margins;
    for (int t = 0; t < trials; ++t) {
        const Seed trial_seed = derive_seed(seed, Stream::trial, static_cast<std::uint64_t>(t));
        const auto draw = draw_construction(spec, trial_seed);
        TrialOutcome outcome;
        outcome.report = full_separation_check(draw.params, draw.embedding, draw.graph);
        outcome.total_key_dim = draw.params.total_key_dim();
        outcome.heads = draw.params.h();
        outcome.max_degree = max_degree(draw.graph);
        outcome.edge_count = draw.graph.edge_count();
        summary.failures += outcome.report.pass ? 0 : 1;
        true_margins.push_back(outcome.report.min_true_margin);
        false_margins.push_back(outcome.report.max_false_margin);
        summary.outcomes.push_back(outcome);
    }
    summary.failure_rate = static_cast<double>(summary.failures) / trials;
    summary.min_true_margin = *std::min_element(true_margins.begin(), true_margins.end());
    summary.median_true_margin = median(true_margins);
    summary.median_false_margin = median(false_margins);
    return summary;
}

}  // namespace rgr
