#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "rgr/verify.hpp"

using namespace rgr;

namespace {

// One-hot toy with W_Q = P_pi (row i = e_pi(i)) and W_K = I: S(i, j) = [j == pi(i)].
AttentionParams exact_permutation_params(const PermutationGraph& pi) {
    const int m = pi.size();
    auto p = AttentionParams::zeros(1, m, m, 0.5);
    for (int i = 0; i < m; ++i) {
        p.heads[0].w_q(i, pi.target(i)) = 1.0;
    }
    p.heads[0].w_k.setIdentity();
    return p;
}

std::vector<int> iota_vec(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace

TEST_CASE("separation check on zero weights") {
    const auto pi = random_derangement(6, 1);
    const auto r = full_separation_check(AttentionParams::zeros(1, 6, 2, 1.0), gen_one_hot(6), pi.to_graph());
    CHECK(r.min_true_margin == -1.0);
    CHECK(r.max_false_margin == -1.0);
    CHECK(r.true_violations == 6);
    CHECK(r.false_violations == 0);
    CHECK_FALSE(r.pass);
}

TEST_CASE("separation check on exact parameters") {
    const auto pi = random_derangement(8, 2);
    const auto r = full_separation_check(exact_permutation_params(pi), gen_one_hot(8), pi.to_graph());
    CHECK(r.pass);
    CHECK(r.min_true_margin == 0.5);
    CHECK(r.max_false_margin == -0.5);
    const auto empty = full_separation_check(exact_permutation_params(pi), gen_one_hot(8), DirectedGraph(8, {}));
    CHECK(std::isinf(empty.min_true_margin));
    CHECK_FALSE(empty.pass);
}

TEST_CASE("sample_context") {
    const auto pi = random_derangement(256, 1);
    Rng rng(5);
    CHECK_THROWS_AS(sample_context(pi, 257, 0.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_context(pi, 1, 0.5, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_context(pi, 8, 1.5, rng), std::invalid_argument);

    for (int t = 0; t < 200; ++t) {
        const auto c = sample_context(pi, 2 + t % 40, t % 3 == 0 ? 0.0 : 0.5, rng);
        std::set<int> distinct(c.indices().begin(), c.indices().end());
        CHECK(static_cast<int>(distinct.size()) == 2 + t % 40);
    }

    const auto small = random_derangement(12, 3);
    const auto full = sample_context(small, 12, 1.0, rng);
    auto sorted = full.indices();
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == iota_vec(12));

    CHECK(sample_context(pi, 16, 0.5, Seed{4}).indices() == sample_context(pi, 16, 0.5, Seed{4}).indices());
}

TEST_CASE("realized positive rate of the literal sampler") {
    // 0.273 comes from an independent re-implementation of the three-step
    // procedure (sample, Bin(l, rho) chooser, replace-with-eviction) over 8e4
    // contexts; replacements evict earlier insertions, so the rate sits well below rho.
    const auto pi = random_derangement(256, 1);
    Rng rng(5);
    long hits = 0;
    long total = 0;
    for (int t = 0; t < 10000; ++t) {
        const auto c = sample_context(pi, 16, 0.5, rng);
        const std::set<int> members(c.indices().begin(), c.indices().end());
        for (int v : c.indices()) {
            ++total;
            hits += members.count(pi.target(v)) ? 1 : 0;
        }
    }
    CHECK(static_cast<double>(hits) / total == doctest::Approx(0.273).epsilon(0.01 / 0.273));

    // rho = 0 leaves the uniform draw: the rate drops to the chance level (l-1)/(m-1).
    long chance_hits = 0;
    for (int t = 0; t < 10000; ++t) {
        const auto c = sample_context(pi, 16, 0.0, rng);
        const std::set<int> members(c.indices().begin(), c.indices().end());
        for (int v : c.indices()) {
            chance_hits += members.count(pi.target(v)) ? 1 : 0;
        }
    }
    CHECK(static_cast<double>(chance_hits) / total == doctest::Approx(15.0 / 255.0).epsilon(0.1));
}

TEST_CASE("micro-F1") {
    const auto pi = random_derangement(8, 6);
    const auto X = gen_one_hot(8);
    const Context full(iota_vec(8));
    auto p = exact_permutation_params(pi);
    CHECK(micro_f1(p, X, pi, {full}) == 1.0);

    // One extra query component makes exactly one of the 56 ordered pairs a false positive:
    // TP = 8, FP = 1, FN = 0, so F1 = 16 / 17.
    const int extra = (pi.target(0) + 1) % 8 == 0 ? (pi.target(0) + 2) % 8 : (pi.target(0) + 1) % 8;
    auto q = p;
    q.heads[0].w_q(0, extra) = 1.0;
    CHECK(micro_f1(q, X, pi, {full}) == doctest::Approx(16.0 / 17.0));

    auto silent = p;
    silent.tau = 1e9;
    CHECK(micro_f1(silent, X, pi, {full}) == 0.0);

    // Contexts with no positives and no predictions leave F1 at 1.
    const Context lonely({0, extra == pi.target(0) ? 5 : extra});
    if (pi.target(0) != lonely[1] && pi.target(lonely[1]) != 0) {
        CHECK(micro_f1(p, X, pi, {lonely}) == 1.0);
    }
    CHECK_THROWS_AS(micro_f1(p, X, pi, {}), std::invalid_argument);

    // Pooled counts ignore the order of the context list.
    std::vector<Context> contexts;
    Rng rng(2);
    for (int t = 0; t < 30; ++t) {
        contexts.push_back(sample_context(pi, 2 + t % 7, 0.5, rng));
    }
    const double f = micro_f1(q, X, pi, contexts);
    std::reverse(contexts.begin(), contexts.end());
    CHECK(micro_f1(q, X, pi, contexts) == f);

    ConfusionCounts counts;
    counts.tp = 3;
    counts.fp = 1;
    counts.fn = 2;
    CHECK(counts.f1() == doctest::Approx(6.0 / 9.0));
    CHECK(ConfusionCounts{}.f1() == 1.0);
}

TEST_CASE("passing parameters give F1 = 1 on any contexts") {
    const auto pi = random_derangement(64, 9);
    const auto X = gen_one_hot(64);
    const auto p = construct_onehot_permutation(pi, 0.25, 300, 9);
    REQUIRE(full_separation_check(p, X, pi.to_graph()).pass);
    Rng rng(1);
    std::vector<Context> contexts;
    for (int t = 0; t < 100; ++t) {
        contexts.push_back(sample_context(pi, std::vector<int>{2, 8, 16, 32, 64}[static_cast<std::size_t>(t % 5)], 0.5, rng));
    }
    CHECK(micro_f1(p, X, pi, contexts) == 1.0);
}

TEST_CASE("Monte Carlo success rates") {
    ConstructionSpec spec;
    spec.kind = ConstructionKind::one_hot_permutation;
    spec.m = 64;
    spec.p = 0.25;
    spec.d_k = 2;
    const auto bad = monte_carlo_success(spec, 20, 1);
    CHECK(bad.failure_rate >= 0.5);
    CHECK(bad.trials == 20);
    CHECK(bad.outcomes.size() == 20);

    spec.d_k = 300;
    const auto one = monte_carlo_success(spec, 1, 3);
    CHECK((one.failure_rate == 0.0 || one.failure_rate == 1.0));
    CHECK(one.outcomes.front().total_key_dim == 300);
    CHECK(one.outcomes.front().edge_count == 64);

    const auto a = monte_carlo_success(spec, 5, 7);
    const auto b = monte_carlo_success(spec, 5, 7);
    CHECK(a.median_true_margin == b.median_true_margin);
    CHECK(a.min_true_margin <= a.median_true_margin);
    CHECK_THROWS_AS(monte_carlo_success(spec, 0, 1), std::invalid_argument);

    ConstructionSpec graph_spec;
    graph_spec.kind = ConstructionKind::general_graph;
    graph_spec.m = 128;
    graph_spec.d_model = 64;
    graph_spec.m_prime = 256;
    graph_spec.degree_cap = 4;
    const auto g = monte_carlo_success(graph_spec, 3, 2);
    for (const auto& o : g.outcomes) {
        CHECK(o.max_degree <= 4);
        CHECK(o.edge_count == 256);
        CHECK(o.heads <= 4 + o.max_degree);
        CHECK(o.total_key_dim == o.heads * default_key_width(128));
    }
}
