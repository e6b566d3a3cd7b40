#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "rgr/rng.hpp"

namespace rgr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class EmbeddingKind { one_hot, gaussian_unit_norm, sparse_binary };

std::string_view to_string(EmbeddingKind kind) noexcept;
EmbeddingKind embedding_kind_from_string(std::string_view name);

struct EmbeddingMatrix {
    Matrix rows;  // m x d_model, row i is x_i
    EmbeddingKind kind = EmbeddingKind::one_hot;
    double p_b = 0.0;  // feature density, sparse-binary only
    Seed seed = 0;

    int m() const noexcept { return static_cast<int>(rows.rows()); }
    int d_model() const noexcept { return static_cast<int>(rows.cols()); }

    // 1 for one-hot and Gaussian unit-norm rows, d_model * p_B for sparse binary.
    double default_mu() const noexcept;
};

EmbeddingMatrix gen_one_hot(int m);
EmbeddingMatrix gen_gaussian_unit_norm(int m, int d_model, Seed seed);
EmbeddingMatrix gen_sparse_binary(int m, int d_model, double p_b, Seed seed);

// u = (1/mu) * x_row * X^T, a length-m approximate one-hot decoding.
Vector approx_inverse_row(const Eigen::Ref<const RowVector>& x_row, const EmbeddingMatrix& X, double mu);

// All decodings at once: (1/mu) X X^T. Row i is u_i.
Matrix approx_inverse_gram(const EmbeddingMatrix& X, double mu);

struct IncoherenceReport {
    double mu = 1.0;
    int block_size = 1;
    double eps_d = 0.0;
    double rho = 0.0;
    double gamma = 0.0;
    std::int64_t pairs_checked = 0;
    bool gamma_sampled = false;  // true when the pair scan was a uniform sample
};

inline constexpr std::int64_t kDefaultPairBudget = 1'000'000;

// Restricted self-incoherence constants at block size B. eps_d and rho are
// exact; gamma is exact per scanned pair, with pairs exhaustive whenever
// m(m-1) <= pair_budget and uniformly sampled otherwise.
IncoherenceReport check_restricted_incoherence(const EmbeddingMatrix& X, double mu, int block_size,
                                               std::int64_t pair_budget = kDefaultPairBudget,
                                               Seed sampling_seed = 0);

}  // namespace rgr
