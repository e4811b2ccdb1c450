// Duality-aware router: maps a pooled instruction embedding to a compression
// policy (lambda, rho) and splits the retained token budget between the
// semantic and geometric streams.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dualcomp/common.hpp"

namespace dualcomp {

struct InstructionRepr {
    std::vector<double> embedding;
    std::optional<std::string> raw_text;
};

// lambda: 0 = pure semantic preference, 1 = pure geometric preference.
// rho: fraction of tokens retained.
struct TaskPolicy {
    double lambda = 0.5;
    double rho = 1.0;
};

inline constexpr double kDefaultRhoMin = 0.01;

inline void validate(const TaskPolicy& p, double rho_min = kDefaultRhoMin) {
    if (!(p.lambda >= 0.0 && p.lambda <= 1.0)) throw ConfigError("lambda must lie in [0,1]");
    if (!(rho_min > 0.0 && rho_min <= 1.0)) throw ConfigError("rho_min must lie in (0,1]");
    if (!(p.rho >= rho_min && p.rho <= 1.0))
        throw ConfigError("rho must lie in [" + std::to_string(rho_min) + ", 1]");
}

struct TokenBudget {
    std::int64_t n_max = 0;
    std::int64_t n_keep = 0;
    std::int64_t n_sem = 0;
    std::int64_t n_geo = 0;

    friend bool operator==(const TokenBudget&, const TokenBudget&) = default;
};

// n_keep = clamp(round(n_max*rho), 1, n_max); n_geo takes the rounding residual
// so the two streams always sum to n_keep.
[[nodiscard]] inline TokenBudget allocate_budget(const TaskPolicy& policy, std::int64_t n_max) {
    if (n_max < 1) throw InvalidInput("n_max must be at least 1");
    TokenBudget b;
    b.n_max = n_max;
    b.n_keep = std::clamp<std::int64_t>(std::llround(static_cast<double>(n_max) * policy.rho), 1, n_max);
    b.n_sem = std::clamp<std::int64_t>(std::llround(static_cast<double>(b.n_keep) * (1.0 - policy.lambda)), 0, b.n_keep);
    b.n_geo = b.n_keep - b.n_sem;
    return b;
}

// ---------------------------------------------------------------------------
// Router MLP

struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> bias;     // out

    DenseLayer() = default;
    DenseLayer(int in_dim, int out_dim)
        : in(in_dim), out(out_dim),
          weights(static_cast<std::size_t>(in_dim) * static_cast<std::size_t>(out_dim), 0.0),
          bias(static_cast<std::size_t>(out_dim), 0.0) {}

    [[nodiscard]] std::size_t param_count() const noexcept { return weights.size() + bias.size(); }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct RouterDims {
    int input = 768;
    int hidden1 = 1024;
    int hidden2 = 256;

    friend bool operator==(const RouterDims&, const RouterDims&) = default;
};

// trunk: input -> hidden1 -> hidden2 with tanh; two sigmoid heads hidden2 -> 1.
// The same structure doubles as the gradient container.
struct RouterModel {
    double rho_min = kDefaultRhoMin;
    DenseLayer trunk1;
    DenseLayer trunk2;
    DenseLayer head_lambda;
    DenseLayer head_rho;

    RouterModel() : RouterModel(RouterDims{}, kDefaultRhoMin) {}
    RouterModel(RouterDims dims, double rho_min_)
        : rho_min(rho_min_), trunk1(dims.input, dims.hidden1), trunk2(dims.hidden1, dims.hidden2),
          head_lambda(dims.hidden2, 1), head_rho(dims.hidden2, 1) {
        if (dims.input < 1 || dims.hidden1 < 1 || dims.hidden2 < 1) throw ConfigError("router dimensions must be positive");
        if (!(rho_min_ > 0.0 && rho_min_ <= 1.0)) throw ConfigError("rho_min must lie in (0,1]");
    }

    [[nodiscard]] RouterDims dims() const noexcept { return {trunk1.in, trunk1.out, trunk2.out}; }
    [[nodiscard]] std::size_t param_count() const noexcept {
        return trunk1.param_count() + trunk2.param_count() + head_lambda.param_count() + head_rho.param_count();
    }

    template <typename F>
    void for_each_layer(F&& f) {
        f(trunk1);
        f(trunk2);
        f(head_lambda);
        f(head_rho);
    }
    template <typename F>
    void for_each_layer(F&& f) const {
        f(trunk1);
        f(trunk2);
        f(head_lambda);
        f(head_rho);
    }

    friend bool operator==(const RouterModel&, const RouterModel&) = default;
};

// Glorot-uniform weights, zero biases.
[[nodiscard]] inline RouterModel init_router(RouterDims dims, double rho_min, std::uint64_t seed) {
    RouterModel m(dims, rho_min);
    std::mt19937_64 rng(seed);
    m.for_each_layer([&](DenseLayer& layer) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : layer.weights) w = dist(rng);
    });
    return m;
}

namespace detail {

[[nodiscard]] inline double stable_sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// y = W x + b. When double accumulation overflows into inf - inf, the row is
// recomputed in extended precision so that saturated activations stay defined.
inline void dense_forward(const DenseLayer& layer, std::span<const double> x, std::span<double> y) {
    const auto in = static_cast<std::size_t>(layer.in);
    for (std::size_t o = 0; o < static_cast<std::size_t>(layer.out); ++o) {
        const double* row = layer.weights.data() + o * in;
        double acc = layer.bias[o];
        for (std::size_t k = 0; k < in; ++k) acc += row[k] * x[k];
        if (std::isnan(acc)) {
            long double wide = layer.bias[o];
            for (std::size_t k = 0; k < in; ++k) wide += static_cast<long double>(row[k]) * x[k];
            acc = std::isnan(wide) ? 0.0 : static_cast<double>(std::clamp<long double>(
                                                wide, -std::numeric_limits<double>::max(),
                                                std::numeric_limits<double>::max()));
        }
        y[o] = acc;
    }
}

}  // namespace detail

// Intermediate activations kept for the backward pass.
struct RouterActivations {
    std::vector<double> h1;  // tanh outputs
    std::vector<double> h2;
    double sig_lambda = 0.5;
    double sig_rho = 0.5;
    TaskPolicy policy;
};

[[nodiscard]] inline RouterActivations router_forward_full(const RouterModel& m, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(m.trunk1.in))
        throw ConfigError("instruction embedding has dimension " + std::to_string(x.size()) + ", router expects " +
                          std::to_string(m.trunk1.in));
    if (!all_finite(x)) throw InvalidInput("instruction embedding contains non-finite values");
    RouterActivations a;
    a.h1.resize(static_cast<std::size_t>(m.trunk1.out));
    a.h2.resize(static_cast<std::size_t>(m.trunk2.out));
    detail::dense_forward(m.trunk1, x, a.h1);
    for (double& v : a.h1) v = std::tanh(v);
    detail::dense_forward(m.trunk2, a.h1, a.h2);
    for (double& v : a.h2) v = std::tanh(v);
    double zl = 0.0;
    double zr = 0.0;
    detail::dense_forward(m.head_lambda, a.h2, std::span<double>(&zl, 1));
    detail::dense_forward(m.head_rho, a.h2, std::span<double>(&zr, 1));
    a.sig_lambda = detail::stable_sigmoid(zl);
    a.sig_rho = detail::stable_sigmoid(zr);
    a.policy.lambda = a.sig_lambda;
    a.policy.rho = std::clamp(m.rho_min + (1.0 - m.rho_min) * a.sig_rho, m.rho_min, 1.0);
    return a;
}

[[nodiscard]] inline TaskPolicy router_forward(const RouterModel& m, const InstructionRepr& input) {
    return router_forward_full(m, input.embedding).policy;
}

struct RouterTarget {
    double lambda_gt = 0.5;
    double rho_gt = 1.0;
};

// Squared-error loss (lambda - lambda_gt)^2 + (rho - rho_gt)^2.
[[nodiscard]] inline double router_loss(const RouterModel& m, std::span<const double> x, RouterTarget t) {
    const TaskPolicy p = router_forward_full(m, x).policy;
    return (p.lambda - t.lambda_gt) * (p.lambda - t.lambda_gt) + (p.rho - t.rho_gt) * (p.rho - t.rho_gt);
}

[[nodiscard]] inline RouterModel zero_like(const RouterModel& m) {
    return RouterModel(m.dims(), m.rho_min);
}

// Accumulates d(loss)/d(param) for one sample into `grad` and returns the loss.
inline double router_backward_accumulate(const RouterModel& m, std::span<const double> x, RouterTarget t,
                                         RouterModel& grad) {
    if (!(t.lambda_gt >= 0.0 && t.lambda_gt <= 1.0) || !(t.rho_gt >= m.rho_min && t.rho_gt <= 1.0))
        throw InvalidInput("router target outside policy bounds");
    const RouterActivations a = router_forward_full(m, x);
    const double el = a.policy.lambda - t.lambda_gt;
    const double er = a.policy.rho - t.rho_gt;
    const double dzl = 2.0 * el * a.sig_lambda * (1.0 - a.sig_lambda);
    const double dzr = 2.0 * er * (1.0 - m.rho_min) * a.sig_rho * (1.0 - a.sig_rho);

    const auto h2n = static_cast<std::size_t>(m.trunk2.out);
    const auto h1n = static_cast<std::size_t>(m.trunk1.out);
    const auto in = static_cast<std::size_t>(m.trunk1.in);

    std::vector<double> dh2(h2n, 0.0);
    for (std::size_t k = 0; k < h2n; ++k) {
        grad.head_lambda.weights[k] += dzl * a.h2[k];
        grad.head_rho.weights[k] += dzr * a.h2[k];
        dh2[k] = dzl * m.head_lambda.weights[k] + dzr * m.head_rho.weights[k];
    }
    grad.head_lambda.bias[0] += dzl;
    grad.head_rho.bias[0] += dzr;

    std::vector<double> dh1(h1n, 0.0);
    for (std::size_t o = 0; o < h2n; ++o) {
        const double dz = dh2[o] * (1.0 - a.h2[o] * a.h2[o]);
        grad.trunk2.bias[o] += dz;
        double* grow = grad.trunk2.weights.data() + o * h1n;
        const double* wrow = m.trunk2.weights.data() + o * h1n;
        for (std::size_t k = 0; k < h1n; ++k) {
            grow[k] += dz * a.h1[k];
            dh1[k] += dz * wrow[k];
        }
    }
    for (std::size_t o = 0; o < h1n; ++o) {
        const double dz = dh1[o] * (1.0 - a.h1[o] * a.h1[o]);
        grad.trunk1.bias[o] += dz;
        double* grow = grad.trunk1.weights.data() + o * in;
        for (std::size_t k = 0; k < in; ++k) grow[k] += dz * x[k];
    }
    return el * el + er * er;
}

[[nodiscard]] inline RouterModel router_backward(const RouterModel& m, const InstructionRepr& input, RouterTarget t) {
    RouterModel grad = zero_like(m);
    router_backward_accumulate(m, input.embedding, t, grad);
    return grad;
}

struct TrainingSample {
    InstructionRepr input;
    RouterTarget target;
};

struct TrainOptions {
    int steps = 2000;
    double learning_rate = 0.05;
    int batch_size = 8;
    std::uint64_t seed = 0;
};

struct TrainLog {
    std::vector<double> step_loss;  // mean minibatch loss per step
    double initial_loss = 0.0;      // mean loss over the full corpus before training
    double final_loss = 0.0;        // ... and after
};

[[nodiscard]] inline double corpus_loss(const RouterModel& m, std::span<const TrainingSample> corpus) {
    double total = 0.0;
    for (const auto& s : corpus) total += router_loss(m, s.input.embedding, s.target);
    return corpus.empty() ? 0.0 : total / static_cast<double>(corpus.size());
}

// Plain minibatch SGD with a fixed learning rate; minibatches are drawn with
// replacement from a seeded mt19937_64 so runs are reproducible.
[[nodiscard]] inline RouterModel train_router(RouterModel model, std::span<const TrainingSample> corpus,
                                              const TrainOptions& opt, TrainLog* log = nullptr) {
    if (corpus.empty()) throw InvalidInput("training corpus is empty");
    if (opt.steps < 0 || opt.batch_size < 1 || !(opt.learning_rate > 0.0) || !std::isfinite(opt.learning_rate))
        throw ConfigError("invalid training options");
    TrainLog local;
    TrainLog& out = log ? *log : local;
    out.step_loss.clear();
    out.initial_loss = corpus_loss(model, corpus);
    if (opt.steps == 0) {
        out.final_loss = out.initial_loss;
        return model;
    }
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
    RouterModel grad = zero_like(model);
    const double scale = opt.learning_rate / static_cast<double>(opt.batch_size);
    for (int step = 0; step < opt.steps; ++step) {
        grad.for_each_layer([](DenseLayer& l) {
            std::fill(l.weights.begin(), l.weights.end(), 0.0);
            std::fill(l.bias.begin(), l.bias.end(), 0.0);
        });
        double loss = 0.0;
        for (int b = 0; b < opt.batch_size; ++b) {
            const auto& s = corpus[pick(rng)];
            loss += router_backward_accumulate(model, s.input.embedding, s.target, grad);
        }
        loss /= static_cast<double>(opt.batch_size);
        if (!std::isfinite(loss))
            throw Error("router training diverged at step " + std::to_string(step) +
                        " (non-finite loss); lower the learning rate");
        out.step_loss.push_back(loss);
        std::array<DenseLayer*, 4> params{&model.trunk1, &model.trunk2, &model.head_lambda, &model.head_rho};
        std::array<const DenseLayer*, 4> grads{&grad.trunk1, &grad.trunk2, &grad.head_lambda, &grad.head_rho};
        bool finite = true;
        for (std::size_t l = 0; l < params.size(); ++l) {
            for (std::size_t k = 0; k < params[l]->weights.size(); ++k) {
                params[l]->weights[k] -= scale * grads[l]->weights[k];
                finite = finite && std::isfinite(params[l]->weights[k]);
            }
            for (std::size_t k = 0; k < params[l]->bias.size(); ++k) {
                params[l]->bias[k] -= scale * grads[l]->bias[k];
                finite = finite && std::isfinite(params[l]->bias[k]);
            }
        }
        if (!finite)
            throw Error("router training diverged at step " + std::to_string(step) +
                        " (non-finite weights); lower the learning rate");
    }
    out.final_loss = corpus_loss(model, corpus);
    if (!std::isfinite(out.final_loss)) throw Error("router training produced a non-finite final loss");
    return model;
}

}  // namespace dualcomp
