#include <cmath>
#include <map>
#include <set>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"
#include "rgr/attn.hpp"

using namespace rgr;

namespace {

// x_i^T (W_Q W_K^T) x_j by explicit loops over every index.
double triple_loop_score(const AttentionHead& head, const Matrix& x, int i, int j) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < x.cols(); ++a) {
        for (Eigen::Index b = 0; b < x.cols(); ++b) {
            double qk = 0.0;
            for (Eigen::Index t = 0; t < head.w_q.cols(); ++t) {
                qk += head.w_q(a, t) * head.w_k(b, t);
            }
            s += x(i, a) * qk * x(j, b);
        }
    }
    return s;
}

double chi2_against_binomial(const std::map<int, int>& observed, int n, double p, int total, int& dof) {
    const boost::math::binomial dist(n, p);
    // Pool bins with expectation below 5 into their neighbours from the tails.
    std::vector<double> obs;
    std::vector<double> exp;
    double acc_o = 0.0;
    double acc_e = 0.0;
    for (int k = 0; k <= n; ++k) {
        auto it = observed.find(k);
        acc_o += it == observed.end() ? 0.0 : it->second;
        acc_e += total * boost::math::pdf(dist, k);
        if (acc_e >= 5.0) {
            obs.push_back(acc_o);
            exp.push_back(acc_e);
            acc_o = acc_e = 0.0;
        }
    }
    obs.back() += acc_o;
    exp.back() += acc_e;
    double chi2 = 0.0;
    for (std::size_t b = 0; b < obs.size(); ++b) {
        chi2 += (obs[b] - exp[b]) * (obs[b] - exp[b]) / exp[b];
    }
    dof = static_cast<int>(obs.size()) - 1;
    return chi2;
}

}  // namespace

TEST_CASE("Construction I threshold and validation") {
    const auto pi = random_derangement(8, 1);
    CHECK(construct_onehot_permutation(pi, 0.25, 64, 1).tau == doctest::Approx(10.0));
    CHECK_THROWS_AS(construct_onehot_permutation(pi, 0.5, 8, 1), std::invalid_argument);
    CHECK_THROWS_AS(construct_onehot_permutation(pi, 0.0, 8, 1), std::invalid_argument);
    const auto p = construct_onehot_permutation(pi, 0.25, 12, 1);
    CHECK(p.h() == 1);
    CHECK(p.d_model() == 8);
    CHECK(p.total_key_dim() == 12);
    for (int i = 0; i < 8; ++i) {
        CHECK(p.heads[0].w_q.row(i) == p.heads[0].w_k.row(pi.target(i)));
    }
    CHECK(((p.heads[0].w_k.array() == 0.0) || (p.heads[0].w_k.array() == 1.0)).all());
}

TEST_CASE("Construction I true-edge score is the popcount of the target signature") {
    const auto pi = random_derangement(4, 2);
    const auto X = gen_one_hot(4);
    const auto p = construct_onehot_permutation(pi, 0.25, 8, 11);
    for (int i = 0; i < 4; ++i) {
        const int j = pi.target(i);
        const double popcount = p.heads[0].w_k.row(j).sum();
        CHECK(triple_loop_score(p.heads[0], X.rows, i, j) == popcount);
        const auto s = head_scores(p, X, Context({i, j}));
        CHECK(s.per_head[0](0, 1) == popcount);
        for (int t = 0; t < 4; ++t) {
            CHECK(s.per_head.size() == 1);
            CHECK(triple_loop_score(p.heads[0], X.rows, i, t) ==
                  doctest::Approx(PairScorer(p, X).head_score(0, i, t)));
        }
    }
}

TEST_CASE("Construction I score distributions are binomial") {
    // S_{i,pi(i)} ~ Bin(d_k, p); S_{ij} ~ Bin(d_k, p^2) for j != pi(i).
    const int d_k = 24;
    const double p = 0.25;
    std::map<int, int> edge;
    std::map<int, int> non_edge;
    int n_edge = 0;
    int n_non = 0;
    for (Seed s = 0; s < 300; ++s) {
        const auto pi = random_derangement(6, s);
        const auto params = construct_onehot_permutation(pi, p, d_k, s);
        const PairScorer scorer(params, gen_one_hot(6));
        // One edge and one non-edge per draw keeps samples independent.
        const int i = static_cast<int>(s % 6);
        ++edge[static_cast<int>(scorer.head_score(0, i, pi.target(i)))];
        ++n_edge;
        const int j = (pi.target(i) + 1) % 6 == i ? (pi.target(i) + 2) % 6 : (pi.target(i) + 1) % 6;
        ++non_edge[static_cast<int>(scorer.head_score(0, i, j))];
        ++n_non;
    }
    int dof = 0;
    const double c1 = chi2_against_binomial(edge, d_k, p, n_edge, dof);
    CHECK(c1 < boost::math::quantile(boost::math::chi_squared(dof), 0.999));
    const double c2 = chi2_against_binomial(non_edge, d_k, p * p, n_non, dof);
    CHECK(c2 < boost::math::quantile(boost::math::chi_squared(dof), 0.999));
}

TEST_CASE("Construction III with one-hot rows reduces to Construction I") {
    const auto pi = random_derangement(12, 4);
    const auto a = construct_onehot_permutation(pi, 0.05, 20, 9);
    const auto b = construct_general_embedding(pi, gen_one_hot(12), 1.0, 12, 0.05, 20, 9);
    REQUIRE(b.h() == 1);
    CHECK(a.heads[0].w_q == b.heads[0].w_q);
    CHECK(a.heads[0].w_k == b.heads[0].w_k);
    CHECK(a.tau == b.tau);
    CHECK_THROWS_AS(construct_general_embedding(pi, gen_one_hot(12), 1.0, 12, 0.06, 20, 9), std::invalid_argument);
    CHECK_THROWS_AS(construct_general_embedding(pi, gen_one_hot(12), 1.0, 0, 0.05, 20, 9), std::invalid_argument);
}

TEST_CASE("Construction III on GUN rows with B = d_model and Rademacher keys equals Construction II") {
    const auto pi = random_derangement(40, 6);
    const auto X = gen_gaussian_unit_norm(40, 8, 6);
    const auto two = construct_compressive_permutation(pi, X, 16, 3);
    const auto three = construct_general_embedding(pi, X, 1.0, 8, 0.0, 16, 3, SignatureKind::rademacher);
    REQUIRE(two.h() == three.h());
    for (int k = 0; k < two.h(); ++k) {
        CHECK(two.heads[static_cast<std::size_t>(k)].w_q.isApprox(three.heads[static_cast<std::size_t>(k)].w_q));
        CHECK(two.heads[static_cast<std::size_t>(k)].w_k.isApprox(three.heads[static_cast<std::size_t>(k)].w_k));
    }
    CHECK(two.tau == three.tau);
}

TEST_CASE("Construction II layout") {
    const auto pi = random_derangement(50, 2);
    const auto X = gen_gaussian_unit_norm(50, 16, 2);
    const auto p = construct_compressive_permutation(pi, X, 10, 5);
    CHECK(p.h() == 4);
    CHECK(p.total_key_dim() == 40);
    CHECK(p.tau == 5.0);
    REQUIRE(p.trace);
    const auto& tr = *p.trace;
    CHECK(((tr.signatures.array() == 1.0) || (tr.signatures.array() == -1.0)).all());
    int next = 0;
    for (const auto& block : tr.blocks) {
        CHECK(block.sources.size() <= 16);
        for (std::size_t t = 0; t < block.sources.size(); ++t) {
            CHECK(block.sources[t] == next++);
            CHECK(block.targets[t] == pi.target(block.sources[t]));
        }
    }
    CHECK(next == 50);
    CHECK(p.heads == construct_compressive_permutation(pi, X, 10, 5).heads);

    CHECK(construct_compressive_permutation(pi, gen_gaussian_unit_norm(50, 50, 1), 10, 5).h() == 1);
    CHECK_THROWS_AS(construct_compressive_permutation(pi, gen_gaussian_unit_norm(50, 51, 1), 10, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(construct_compressive_permutation(pi, gen_sparse_binary(50, 16, 0.2, 1), 10, 5),
                    std::invalid_argument);
}

TEST_CASE("Construction III on sparse binary rows") {
    const int m = 256;
    const int d_model = 512;
    const auto pi = random_derangement(m, 1);
    const auto X = gen_sparse_binary(m, d_model, std::log(256.0) / d_model, 1);
    const int d_k = static_cast<int>(std::ceil(10.0 * std::log(256.0)));
    const auto p = construct_general_embedding(pi, X, X.default_mu(), 93, 0.05, d_k, 1);
    CHECK(p.h() == 3);
    CHECK(p.tau == doctest::Approx((0.05 + 0.0025) / 2.0 * d_k));
    REQUIRE(p.trace);
    CHECK(p.trace->mu == doctest::Approx(std::log(256.0)));
    std::set<int> seen;
    for (const auto& block : p.trace->blocks) {
        CHECK(block.sources.size() <= 93);
        seen.insert(block.sources.begin(), block.sources.end());
    }
    CHECK(seen.size() == 256);
}

TEST_CASE("Construction IV layout") {
    const auto X = gen_gaussian_unit_norm(40, 8, 1);
    const auto perm = random_derangement(40, 1).to_graph();
    const auto p = construct_general_graph(perm, X, 12, 2);
    CHECK(p.h() == 5);
    CHECK(p.tau == 6.0);

    for (Seed s = 0; s < 10; ++s) {
        const auto g = random_bounded_degree_digraph(128, 256, 4, s);
        const auto params = construct_general_graph(g, gen_gaussian_unit_norm(128, 64, s), 30, s);
        CHECK(params.h() <= 4 + max_degree(g));
        REQUIRE(params.trace);
        // Every edge belongs to exactly one head's block.
        std::map<std::pair<int, int>, int> owner;
        for (const auto& block : params.trace->blocks) {
            CHECK(block.sources.size() <= 64);
            for (std::size_t t = 0; t < block.sources.size(); ++t) {
                ++owner[{block.sources[t], block.targets[t]}];
            }
        }
        CHECK(owner.size() == static_cast<std::size_t>(g.edge_count()));
        for (const auto& [e, count] : owner) {
            CHECK(count == 1);
            CHECK(g.has_edge(e.first, e.second));
        }
    }
    const auto empty = construct_general_graph(DirectedGraph(10, {}), gen_gaussian_unit_norm(10, 4, 1), 6, 1);
    CHECK(empty.h() == 1);
    CHECK(empty.heads[0].w_q.isZero());
}

TEST_CASE("default key width and zero params") {
    CHECK(default_key_width(512) == static_cast<int>(std::ceil(6.0 * std::log(512.0))));
    CHECK(default_key_width(64, 8.0) == 34);
    const auto z = AttentionParams::zeros(3, 5, 4, 1.0);
    CHECK(z.h() == 3);
    CHECK(z.total_key_dim() == 12);
    auto bad = z;
    bad.heads[1].w_k.resize(5, 3);
    CHECK_THROWS(bad.validate());
}
