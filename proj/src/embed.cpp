#include "rgr/embed.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace rgr {

std::string_view to_string(EmbeddingKind kind) noexcept {
    switch (kind) {
    case EmbeddingKind::one_hot:
        return "one-hot";
    case EmbeddingKind::gaussian_unit_norm:
        return "gaussian-unit-norm";
    case EmbeddingKind::sparse_binary:
        return "sparse-binary";
    }
    return "unknown";
}

EmbeddingKind embedding_kind_from_string(std::string_view name) {
    if (name == "one-hot") {
        return EmbeddingKind::one_hot;
    }
    if (name == "gaussian-unit-norm" || name == "gun") {
        return EmbeddingKind::gaussian_unit_norm;
    }
    if (name == "sparse-binary") {
        return EmbeddingKind::sparse_binary;
    }
    throw std::invalid_argument("unknown embedding kind '" + std::string(name) + "'");
}

double EmbeddingMatrix::default_mu() const noexcept {
    return kind == EmbeddingKind::sparse_binary ? d_model() * p_b : 1.0;
}

EmbeddingMatrix gen_one_hot(int m) {
    if (m < 1) {
        throw std::invalid_argument("m must be positive");
    }
    return {Matrix::Identity(m, m), EmbeddingKind::one_hot, 0.0, 0};
}

EmbeddingMatrix gen_gaussian_unit_norm(int m, int d_model, Seed seed) {
    if (m < 1 || d_model < 1) {
        throw std::invalid_argument("m and d_model must be positive");
    }
    Rng rng(seed, Stream::embedding);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(d_model));
    Matrix rows(m, d_model);
    for (int i = 0; i < m; ++i) {
        double norm = 0.0;
        while (norm == 0.0) {
            for (int c = 0; c < d_model; ++c) {
                rows(i, c) = rng.normal(0.0, stddev);
            }
            norm = rows.row(i).norm();
        }
        rows.row(i) /= norm;
    }
    return {std::move(rows), EmbeddingKind::gaussian_unit_norm, 0.0, seed};
}

EmbeddingMatrix gen_sparse_binary(int m, int d_model, double p_b, Seed seed) {
    if (m < 1 || d_model < 1) {
        throw std::invalid_argument("m and d_model must be positive");
    }
    if (!(p_b > 0.0 && p_b < 1.0)) {
        throw std::invalid_argument("p_B must lie in (0, 1)");
    }
    Rng rng(seed, Stream::embedding);
    Matrix rows(m, d_model);
    for (int i = 0; i < m; ++i) {
        for (int c = 0; c < d_model; ++c) {
            rows(i, c) = rng.bernoulli(p_b) ? 1.0 : 0.0;
        }
    }
    return {std::move(rows), EmbeddingKind::sparse_binary, p_b, seed};
}

Vector approx_inverse_row(const Eigen::Ref<const RowVector>& x_row, const EmbeddingMatrix& X, double mu) {
    if (!(mu > 0.0)) {
        throw std::invalid_argument("mu must be positive");
    }
    if (x_row.size() != X.d_model()) {
        throw std::invalid_argument("row width does not match d_model");
    }
    return (X.rows * x_row.transpose()) / mu;
}

Matrix approx_inverse_gram(const EmbeddingMatrix& X, double mu) {
    if (!(mu > 0.0)) {
        throw std::invalid_argument("mu must be positive");
    }
    return (X.rows * X.rows.transpose()) / mu;
}

namespace {

// Largest achievable |sum over S| for |S| <= B: the B biggest positive terms
// or the B most negative ones.
// Requires 1 <= block_size <= values.size().
double top_b_signed_mass(std::vector<double>& values, int block_size) {
    const auto b = static_cast<std::size_t>(block_size);
    const auto nth = values.begin() + static_cast<std::ptrdiff_t>(b) - 1;
    std::nth_element(values.begin(), nth, values.end(), std::greater<>());
    double positive = 0.0;
    for (std::size_t t = 0; t < b; ++t) {
        positive += std::max(values[t], 0.0);
    }
    std::nth_element(values.begin(), nth, values.end(), std::less<>());
    double negative = 0.0;
    for (std::size_t t = 0; t < b; ++t) {
        negative += std::min(values[t], 0.0);
    }
    return std::max(positive, -negative);
}

}  // namespace

IncoherenceReport check_restricted_incoherence(const EmbeddingMatrix& X, double mu, int block_size,
                                               std::int64_t pair_budget, Seed sampling_seed) {
    const int m = X.m();
    if (block_size < 1 || block_size > m - 1) {
        throw std::invalid_argument("block size must lie in [1, m-1]");
    }
    Matrix delta = approx_inverse_gram(X, mu);
    delta.diagonal().array() -= 1.0;

    IncoherenceReport report;
    report.mu = mu;
    report.block_size = block_size;
    // Zero rows decode to u_i(i) = 0 and so report eps_d = 1 without special casing.
    report.eps_d = delta.diagonal().cwiseAbs().maxCoeff();

    const auto b = static_cast<std::size_t>(block_size);
    std::vector<double> scratch(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        scratch.clear();
        for (int s = 0; s < m; ++s) {
            if (s != i) {
                scratch.push_back(delta(i, s) * delta(i, s));
            }
        }
        std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(b), scratch.end(),
                          std::greater<>());
        double mass = 0.0;
        for (std::size_t t = 0; t < b; ++t) {
            mass += scratch[t];
        }
        report.rho = std::max(report.rho, mass);
    }

    auto scan_pair = [&](int i, int j) {
        scratch.resize(static_cast<std::size_t>(m));
        for (int a = 0; a < m; ++a) {
            scratch[static_cast<std::size_t>(a)] = delta(i, a) * delta(j, a);
        }
        report.gamma = std::max(report.gamma, top_b_signed_mass(scratch, block_size));
        ++report.pairs_checked;
    };

    const std::int64_t ordered_pairs = static_cast<std::int64_t>(m) * (m - 1);
    if (ordered_pairs <= pair_budget) {
        // The cross-leakage sum is symmetric in (i, j): one visit per unordered pair.
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                scan_pair(i, j);
            }
        }
        report.pairs_checked *= 2;
    } else {
        report.gamma_sampled = true;
        Rng rng(sampling_seed, Stream::pair_sampling);
        for (std::int64_t t = 0; t < pair_budget; ++t) {
            const int i = rng.uniform_index(m);
            int j = rng.uniform_index(m - 1);
            if (j >= i) {
                ++j;
            }
            scan_pair(i, j);
        }
    }
    return report;
}

}  // namespace rgr
