#include "rgr/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rgr {

namespace {

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void require(bool ok, const char* what) {
    if (!ok) {
        throw std::invalid_argument(std::string("train config: ") + what);
    }
}

struct Projected {
    Matrix q;  // l x D_K
    Matrix k;  // l x D_K
    Matrix x;  // l x d_model
};

Projected project(const AttentionParams& params, const EmbeddingMatrix& X, const Context& c) {
    const int ell = c.length();
    const int d_k = params.d_k();
    Projected out;
    out.x = X.rows(c.indices(), Eigen::all);
    out.q.resize(ell, params.total_key_dim());
    out.k.resize(ell, params.total_key_dim());
    for (int h = 0; h < params.h(); ++h) {
        out.q.middleCols(h * d_k, d_k).noalias() = out.x * params.heads[static_cast<std::size_t>(h)].w_q;
        out.k.middleCols(h * d_k, d_k).noalias() = out.x * params.heads[static_cast<std::size_t>(h)].w_k;
    }
    return out;
}

// Max score and its first arg-max head for every ordered pair.
void max_with_argmax(const AttentionParams& params, const Projected& pr, Matrix& smax, Eigen::MatrixXi& arg) {
    const int ell = static_cast<int>(pr.q.rows());
    const int d_k = params.d_k();
    smax.resize(ell, ell);
    arg.resize(ell, ell);
    for (int h = 0; h < params.h(); ++h) {
        const Matrix s = pr.q.middleCols(h * d_k, d_k) * pr.k.middleCols(h * d_k, d_k).transpose();
        if (h == 0) {
            smax = s;
            arg.setZero();
            continue;
        }
        for (int p = 0; p < ell; ++p) {
            for (int q = 0; q < ell; ++q) {
                if (s(p, q) > smax(p, q)) {
                    smax(p, q) = s(p, q);
                    arg(p, q) = h;
                }
            }
        }
    }
}

void check_labels(const Context& c, const BoolMatrix& labels, double alpha) {
    if (labels.rows() != c.length() || labels.cols() != c.length()) {
        throw std::invalid_argument("label matrix does not match the context length");
    }
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("alpha must be positive");
    }
}

}  // namespace

void TrainConfig::validate() const {
    require(lr > 0.0, "lr must be positive");
    require(alpha > 0.0, "alpha must be positive");
    require(ell >= 2, "ell must be at least 2");
    require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0, 1]");
    require(max_steps > 0, "max_steps must be positive");
    require(eval_every > 0, "eval_every must be positive");
    require(patience > 0, "patience must be positive");
    require(val_pass > 0.0 && val_pass < 1.0, "val_pass must lie in (0, 1)");
    require(n_val > 0, "n_val must be positive");
    require(n_test > 0, "n_test must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
    require(eps > 0.0, "eps must be positive");
    require(weight_decay >= 0.0, "weight_decay must be non-negative");
    require(!ell_test || *ell_test >= 2, "ell_test must be at least 2");
}

BoolMatrix pair_labels(const DirectedGraph& g, const Context& c) {
    c.require_within(g.vertex_count());
    const int ell = c.length();
    BoolMatrix y = BoolMatrix::Constant(ell, ell, false);
    for (int p = 0; p < ell; ++p) {
        for (int q = 0; q < ell; ++q) {
            y(p, q) = p != q && g.has_edge(c[p], c[q]);
        }
    }
    return y;
}

BoolMatrix pair_labels(const PermutationGraph& pi, const Context& c) {
    c.require_within(pi.size());
    const int ell = c.length();
    BoolMatrix y = BoolMatrix::Constant(ell, ell, false);
    for (int p = 0; p < ell; ++p) {
        const int target = pi.target(c[p]);
        for (int q = 0; q < ell; ++q) {
            y(p, q) = c[q] == target;
        }
    }
    return y;
}

double loss_value(const AttentionParams& params, const EmbeddingMatrix& X, const Context& c, const BoolMatrix& labels,
                  double alpha) {
    check_labels(c, labels, alpha);
    const Projected pr = project(params, X, c);
    Matrix smax;
    Eigen::MatrixXi arg;
    max_with_argmax(params, pr, smax, arg);
    const int ell = c.length();
    const double pos_weight = ell - 1;
    double total = 0.0;
    for (int p = 0; p < ell; ++p) {
        for (int q = 0; q < ell; ++q) {
            const double z = alpha * (smax(p, q) - params.tau);
            total += labels(p, q) ? pos_weight * softplus(-z) : softplus(z);
        }
    }
    return total / (static_cast<double>(ell) * ell);
}

LossAndGrads loss_and_grads(const AttentionParams& params, const EmbeddingMatrix& X, const Context& c,
                            const BoolMatrix& labels, double alpha) {
    check_labels(c, labels, alpha);
    const Projected pr = project(params, X, c);
    Matrix smax;
    Eigen::MatrixXi arg;
    max_with_argmax(params, pr, smax, arg);

    const int ell = c.length();
    const int h = params.h();
    const int d_k = params.d_k();
    const double norm = 1.0 / (static_cast<double>(ell) * ell);
    const double pos_weight = ell - 1;

    LossAndGrads out;
    std::vector<Matrix> g_head(static_cast<std::size_t>(h), Matrix::Zero(ell, ell));
    double dz_sum = 0.0;
    for (int p = 0; p < ell; ++p) {
        for (int q = 0; q < ell; ++q) {
            const double z = alpha * (smax(p, q) - params.tau);
            double dz = 0.0;
            if (labels(p, q)) {
                out.loss += pos_weight * softplus(-z);
                dz = -pos_weight * sigmoid(-z);
            } else {
                out.loss += softplus(z);
                dz = sigmoid(z);
            }
            dz *= norm;
            dz_sum += dz;
            g_head[static_cast<std::size_t>(arg(p, q))](p, q) += alpha * dz;
        }
    }
    out.loss *= norm;
    out.grads.tau = -alpha * dz_sum;
    out.grads.heads.resize(static_cast<std::size_t>(h));
    for (int k = 0; k < h; ++k) {
        const Matrix& g = g_head[static_cast<std::size_t>(k)];
        auto& dst = out.grads.heads[static_cast<std::size_t>(k)];
        // S = Q K^T with Q = X_C W_Q, K = X_C W_K.
        dst.w_q.noalias() = pr.x.transpose() * (g * pr.k.middleCols(k * d_k, d_k));
        dst.w_k.noalias() = pr.x.transpose() * (g.transpose() * pr.q.middleCols(k * d_k, d_k));
    }
    return out;
}

AdamState AdamState::zeros_like(const AttentionParams& params) {
    AdamState s;
    for (const auto& head : params.heads) {
        AttentionHead z{Matrix::Zero(head.w_q.rows(), head.w_q.cols()), Matrix::Zero(head.w_k.rows(), head.w_k.cols())};
        s.m.push_back(z);
        s.v.push_back(std::move(z));
    }
    return s;
}

void adamw_step(AdamState& state, AttentionParams& params, const ParamGrads& grads, int t, const TrainConfig& cfg) {
    if (t < 1) {
        throw std::invalid_argument("Adam step index starts at 1");
    }
    if (grads.heads.size() != params.heads.size() || state.m.size() != params.heads.size()) {
        throw std::invalid_argument("optimizer state does not match the parameters");
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    const double b1 = cfg.beta1;
    const double b2 = cfg.beta2;

    auto update = [&](Matrix& w, Matrix& m, Matrix& v, const Matrix& g) {
        if (cfg.weight_decay > 0.0) {
            w *= 1.0 - cfg.lr * cfg.weight_decay;
        }
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
        w.array() -= cfg.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
    };
    for (std::size_t k = 0; k < params.heads.size(); ++k) {
        update(params.heads[k].w_q, state.m[k].w_q, state.v[k].w_q, grads.heads[k].w_q);
        update(params.heads[k].w_k, state.m[k].w_k, state.v[k].w_k, grads.heads[k].w_k);
    }
    state.m_tau = b1 * state.m_tau + (1.0 - b1) * grads.tau;
    state.v_tau = b2 * state.v_tau + (1.0 - b2) * grads.tau * grads.tau;
    params.tau -= cfg.lr * (state.m_tau / bc1) / (std::sqrt(state.v_tau / bc2) + cfg.eps);
}

AttentionParams init_params(int h, int d_model, int d_k, const TrainConfig& cfg, Seed seed) {
    if (h < 1 || d_model < 1 || d_k < 1) {
        throw std::invalid_argument("head count and widths must be positive");
    }
    const double s = 1.0 / std::sqrt(static_cast<double>(d_model));
    const double sd = cfg.init_scale == InitScale::stddev ? s : std::sqrt(s);
    Rng rng(seed, Stream::initialization);
    auto params = AttentionParams::zeros(h, d_model, d_k, 0.0);
    for (auto& head : params.heads) {
        for (Matrix* w : {&head.w_q, &head.w_k}) {
            for (Eigen::Index col = 0; col < w->cols(); ++col) {
                for (Eigen::Index row = 0; row < w->rows(); ++row) {
                    (*w)(row, col) = rng.normal(0.0, sd);
                }
            }
        }
    }
    params.construction = "trained";
    params.seed = seed;
    return params;
}

TrainResult train_run(int m, int d_model, int h, int total_key_dim, Seed seed, const TrainConfig& cfg) {
    cfg.validate();
    if (h < 1 || total_key_dim < 1 || total_key_dim % h != 0) {
        throw std::invalid_argument("D_K must be a positive multiple of the head count");
    }
    const int ell_test = cfg.ell_test.value_or(cfg.ell);
    if (cfg.ell > m || ell_test > m) {
        throw std::invalid_argument("context length exceeds the vertex count");
    }

    const auto pi = random_derangement(m, seed);
    const auto X = gen_gaussian_unit_norm(m, d_model, seed);
    const auto graph = pi.to_graph();
    const auto adjacency = graph.adjacency();
    const auto val = sample_contexts(pi, cfg.n_val, cfg.ell, cfg.rho, seed, Stream::validation_contexts);

    TrainResult result;
    result.final_params = init_params(h, d_model, total_key_dim / h, cfg, seed);
    AttentionParams& params = result.final_params;
    AdamState state = AdamState::zeros_like(params);
    Rng train_rng(seed, Stream::training_contexts);

    int streak = 0;
    double window_loss = 0.0;
    int window_steps = 0;
    for (int step = 1; step <= cfg.max_steps; ++step) {
        const Context c = sample_context(pi, cfg.ell, cfg.rho, train_rng);
        const auto labels = pair_labels(pi, c);
        const auto lg = loss_and_grads(params, X, c, labels, cfg.alpha);
        adamw_step(state, params, lg.grads, step, cfg);
        result.steps_used = step;
        window_loss += lg.loss;
        ++window_steps;

        if (step % cfg.eval_every == 0) {
            result.loss_curve.push_back({step, window_loss / window_steps});
            window_loss = 0.0;
            window_steps = 0;
            const PairScorer scorer(params, X);
            result.last_val_f1 = pooled_confusion(scorer, params.tau, adjacency, m, val).f1();
            streak = result.last_val_f1 > cfg.val_pass ? streak + 1 : 0;
            if (streak >= cfg.patience) {
                result.stopped_early = true;
                break;
            }
        }
    }
    if (window_steps > 0) {
        result.loss_curve.push_back({result.steps_used, window_loss / window_steps});
    }

    // Drawn only after training so the held-out set cannot influence it.
    const auto test = sample_contexts(pi, cfg.n_test, ell_test, cfg.rho, seed, Stream::test_contexts);
    const PairScorer scorer(params, X);
    result.test_f1 = pooled_confusion(scorer, params.tau, adjacency, m, test).f1();
    return result;
}

}  // namespace rgr
