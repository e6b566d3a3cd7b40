#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rgr/attn.hpp"

namespace rgr {

struct SeparationReport {
    double min_true_margin = 0.0;   // min over edges of S^max - tau (+inf if no edges)
    double max_false_margin = 0.0;  // max over non-edges of S^max - tau (-inf if none)
    std::int64_t true_violations = 0;   // edges with S^max <= tau
    std::int64_t false_violations = 0;  // non-edges with S^max >= tau
    bool pass = false;
};

// Exact scan of all m(m-1) ordered pairs under max aggregation.
SeparationReport full_separation_check(const AttentionParams& params, const EmbeddingMatrix& X,
                                       const DirectedGraph& g);

// Context sampler with target positive rate rho: uniform l-subset, then
// Binomial(l, rho) chosen sources get their target swapped in over a random
// other member when it is missing.
Context sample_context(const PermutationGraph& pi, int ell, double rho, Rng& rng);
Context sample_context(const PermutationGraph& pi, int ell, double rho, Seed seed);

// Uniform l-subset in random order.
Context sample_uniform_context(int m, int ell, Rng& rng);

// Contexts drawn from independent per-index streams of (seed, stream).
std::vector<Context> sample_contexts(const PermutationGraph& pi, int count, int ell, double rho, Seed seed,
                                     Stream stream = Stream::contexts);

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    // 2TP / (2TP + FP + FN), and 1 when nothing was predicted or present.
    double f1() const noexcept;
};

// Pooled counts over all ordered distinct-position pairs of every context.
ConfusionCounts pooled_confusion(const PairScorer& scorer, double tau, const std::vector<char>& adjacency, int m,
                                 const std::vector<Context>& contexts);

double micro_f1(const AttentionParams& params, const EmbeddingMatrix& X, const PermutationGraph& pi,
                const std::vector<Context>& contexts);
double micro_f1(const AttentionParams& params, const EmbeddingMatrix& X, const DirectedGraph& g,
                const std::vector<Context>& contexts);

enum class ConstructionKind { one_hot_permutation, compressive_permutation, general_embedding, general_graph };

// Everything needed to redraw one construction from scratch.
struct ConstructionSpec {
    ConstructionKind kind = ConstructionKind::one_hot_permutation;
    int m = 64;
    int d_model = 64;        // ignored for Construction I (d_model = m)
    int d_k = 0;             // 0: default_key_width(m)
    double p = 0.25;         // Bernoulli density (I, III)
    int block_size = 0;      // Construction III; 0 means d_model
    double mu = 0.0;         // Construction III; 0 means the embedding default
    EmbeddingKind embedding = EmbeddingKind::gaussian_unit_norm;  // Construction III
    double p_b = 0.0;        // sparse-binary density for Construction III
    SignatureKind signatures = SignatureKind::bernoulli;  // Construction III
    std::int64_t m_prime = 0;  // Construction IV edge count
    int degree_cap = 0;        // Construction IV: 0 = uniform random digraph

    int resolved_d_k() const;
};

struct ConstructionDraw {
    DirectedGraph graph;
    std::optional<PermutationGraph> permutation;
    EmbeddingMatrix embedding;
    AttentionParams params;
};

ConstructionDraw draw_construction(const ConstructionSpec& spec, Seed seed);

struct TrialOutcome {
    SeparationReport report;
    int total_key_dim = 0;
    int heads = 0;
    int max_degree = 0;
    std::int64_t edge_count = 0;
};

struct MonteCarloSummary {
    int trials = 0;
    int failures = 0;
    double failure_rate = 0.0;
    double min_true_margin = 0.0;     // min over trials
    double median_true_margin = 0.0;  // median over trials
    double median_false_margin = 0.0;
    std::vector<TrialOutcome> outcomes;
};

// Independent (graph, embedding, signature) draws; trial t uses
// derive_seed(seed, trial, t).
MonteCarloSummary monte_carlo_success(const ConstructionSpec& spec, int trials, Seed seed);

}  // namespace rgr
