#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "rgr/verify.hpp"

namespace rgr {

enum class InitScale { stddev, variance };

struct TrainConfig {
    double lr = 1e-3;
    double alpha = 10.0;
    int ell = 16;
    double rho = 0.5;
    int max_steps = 20000;
    int eval_every = 500;
    int patience = 5;
    double val_pass = 0.995;
    int n_val = 500;
    int n_test = 2000;
    Seed seed = 0;

    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    // The N(0, s) initializer reads s as std by default; `variance` uses sqrt(s).
    InitScale init_scale = InitScale::stddev;
    // Context length of the held-out test set; defaults to ell.
    std::optional<int> ell_test;

    // Throws std::invalid_argument naming the first bad field.
    void validate() const;
};

struct LossPoint {
    int step = 0;
    double mean_loss = 0.0;  // mean training loss over the preceding window
};

struct TrainResult {
    AttentionParams final_params;
    double test_f1 = 0.0;
    double last_val_f1 = 0.0;
    int steps_used = 0;
    bool stopped_early = false;
    std::vector<LossPoint> loss_curve;
};

BoolMatrix pair_labels(const PermutationGraph& pi, const Context& c);
BoolMatrix pair_labels(const DirectedGraph& g, const Context& c);

struct ParamGrads {
    std::vector<AttentionHead> heads;  // same shapes as the params
    double tau = 0.0;
};

struct LossAndGrads {
    double loss = 0.0;
    ParamGrads grads;
};

// Weighted logistic loss over all l^2 ordered pairs (self-pairs count as
// negatives), z = alpha (S_max - tau), positives weighted by l - 1. The max
// over heads passes gradient to the first arg-max head only.
LossAndGrads loss_and_grads(const AttentionParams& params, const EmbeddingMatrix& X, const Context& c,
                            const BoolMatrix& labels, double alpha);

// Loss only; used by the finite-difference checks.
double loss_value(const AttentionParams& params, const EmbeddingMatrix& X, const Context& c, const BoolMatrix& labels,
                  double alpha);

struct AdamState {
    std::vector<AttentionHead> m;
    std::vector<AttentionHead> v;
    double m_tau = 0.0;
    double v_tau = 0.0;

    static AdamState zeros_like(const AttentionParams& params);
};

// Decoupled weight decay (applied to the projections, not tau) followed by
// the bias-corrected Adam step t >= 1.
void adamw_step(AdamState& state, AttentionParams& params, const ParamGrads& grads, int t, const TrainConfig& cfg);

// W_Q, W_K ~ N(0, d_model^{-1/2}) read per cfg.init_scale; tau = 0.
AttentionParams init_params(int h, int d_model, int d_k, const TrainConfig& cfg, Seed seed);

// Full run: pi and the GUN embedding are fixed by seed, a fresh context per
// step, validation-driven early stopping, final micro-F1 on the test contexts.
TrainResult train_run(int m, int d_model, int h, int total_key_dim, Seed seed, const TrainConfig& cfg);

}  // namespace rgr
