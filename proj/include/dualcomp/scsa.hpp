// Semantic stream: spatially contiguous clustering of similar tokens, cluster
// scoring by cumulative CLS attention, and size-aware representatives.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "dualcomp/common.hpp"
#include "dualcomp/grid.hpp"

namespace dualcomp::scsa {

struct ScsaConfig {
    double tau_min = 0.65;
    double tau_max = 0.95;
    int theta_min = 2;
    int theta_max = 8;
};

inline void validate(const ScsaConfig& c) {
    if (!(c.tau_min > 0.0 && c.tau_min <= 1.0 && c.tau_max > 0.0 && c.tau_max <= 1.0))
        throw ConfigError("scsa tau endpoints must lie in (0,1]");
    if (!(c.tau_min < c.tau_max)) throw ConfigError("scsa requires tau_min < tau_max");
    if (c.theta_min < 0 || c.theta_min > c.theta_max) throw ConfigError("scsa requires 0 <= theta_min <= theta_max");
}

[[nodiscard]] inline double tau_of_lambda(double lambda, const ScsaConfig& c) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda outside [0,1]");
    return c.tau_min + (c.tau_max - c.tau_min) * lambda;
}

[[nodiscard]] inline int theta_of_lambda(double lambda, const ScsaConfig& c) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda outside [0,1]");
    return static_cast<int>(std::lround(c.theta_min + (c.theta_max - c.theta_min) * lambda));
}

struct Cluster {
    std::vector<std::size_t> members;  // cell indices, raster order; members.front() is the root
    double importance = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
    friend bool operator==(const Cluster&, const Cluster&) = default;
};

struct ClusterSet {
    Shape2 shape;
    std::vector<std::size_t> parent;  // parent link chosen per cell; root iff parent[i] == i
    std::vector<int> label;           // cluster id per cell
    std::vector<Cluster> clusters;    // ids assigned in raster order of roots
    double tau_used = 0.0;

    friend bool operator==(const ClusterSet&, const ClusterSet&) = default;
};

namespace detail {

// Per-cell L2 norms in f64.
[[nodiscard]] inline std::vector<double> feature_norms(const FeatureGrid& g) {
    std::vector<double> n(g.cells());
    for (std::size_t i = 0; i < n.size(); ++i) n[i] = std::sqrt(squared_norm(g.feature(i)));
    return n;
}

// Four independent partial sums; fixed order, so results are reproducible.
[[nodiscard]] inline double fast_dot(std::span<const float> a, std::span<const float> b) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    const std::size_t n = a.size();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        s0 += static_cast<double>(a[k]) * b[k];
        s1 += static_cast<double>(a[k + 1]) * b[k + 1];
        s2 += static_cast<double>(a[k + 2]) * b[k + 2];
        s3 += static_cast<double>(a[k + 3]) * b[k + 3];
    }
    for (; k < n; ++k) s0 += static_cast<double>(a[k]) * b[k];
    return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

// Single raster pass: cell i links to its most similar already-visited
// 8-neighbour j < i when that similarity exceeds tau. Clusters are the trees of
// the resulting forest, so each is 8-connected by construction.
[[nodiscard]] inline ClusterSet cluster_grid(const FeatureGrid& grid, double tau) {
    if (grid.height <= 0 || grid.width <= 0 || grid.dim <= 0) throw InvalidInput("cannot cluster an empty grid");
    if (grid.features.size() != grid.cells() * static_cast<std::size_t>(grid.dim))
        throw InvalidInput("feature payload size does not match H*W*D");
    if (!(tau > 0.0 && tau <= 1.0)) throw InvalidInput("tau must lie in (0,1]");

    const Shape2 shape = grid.shape();
    const std::size_t n = shape.cells();
    const auto norms = detail::feature_norms(grid);

    ClusterSet cs;
    cs.shape = shape;
    cs.tau_used = tau;
    cs.parent.resize(n);
    // Visited neighbours in raster order.
    constexpr int kOffsets[4][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}};
    for (std::size_t i = 0; i < n; ++i) {
        const Cell c = shape.cell(i);
        cs.parent[i] = i;
        if (norms[i] == 0.0) continue;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_j = i;
        for (const auto& off : kOffsets) {
            const Cell nb{c.row + off[0], c.col + off[1]};
            if (!shape.contains(nb)) continue;
            const std::size_t j = shape.index(nb);
            const double cs_ij =
                norms[j] == 0.0 ? 0.0 : detail::fast_dot(grid.feature(i), grid.feature(j)) / (norms[i] * norms[j]);
            if (cs_ij > best) {
                best = cs_ij;
                best_j = j;
            }
        }
        if (best_j != i && best > tau) cs.parent[i] = best_j;
    }

    // parent[i] < i for non-roots, so one forward sweep resolves every root
    // (equivalent to find() with full path compression).
    std::vector<std::size_t> root(n);
    for (std::size_t i = 0; i < n; ++i) root[i] = cs.parent[i] == i ? i : root[cs.parent[i]];
    cs.label.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (root[i] == i) {
            cs.label[i] = static_cast<int>(cs.clusters.size());
            cs.clusters.emplace_back();
        } else {
            cs.label[i] = cs.label[root[i]];
        }
        cs.clusters[static_cast<std::size_t>(cs.label[i])].members.push_back(i);
    }
    return cs;
}

// softmax(q . k_i / sqrt(d)) over all cells, max-subtracted, in f64.
[[nodiscard]] inline std::vector<double> cls_attention(std::span<const float> q_cls, std::span<const float> keys,
                                                       std::size_t cells, int scale_dim) {
    if (scale_dim < 1) throw InvalidInput("attention scale dimension must be >= 1");
    if (q_cls.empty() || keys.size() != cells * q_cls.size()) throw InvalidInput("q_cls/keys dimensions disagree");
    if (!all_finite(q_cls) || !all_finite(keys)) throw InvalidInput("q_cls/keys contain non-finite values");
    const std::size_t d = q_cls.size();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(scale_dim));
    std::vector<double> logits(cells);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cells; ++i) {
        logits[i] = detail::fast_dot(q_cls, keys.subspan(i * d, d)) * inv_sqrt_d;
        mx = std::max(mx, logits[i]);
    }
    double z = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : logits) v /= z;
    return logits;
}

// Attention map for a grid: the ingested map, or one computed from q_cls/keys.
// Exactly one source may be present.
[[nodiscard]] inline std::vector<double> attention_of(const FeatureGrid& g) {
    if (g.cls_attn && g.q_cls) throw InvalidInput("grid carries both cls_attn and q_cls/keys");
    if (g.cls_attn) return *g.cls_attn;
    if (g.q_cls && g.keys) return cls_attention(*g.q_cls, *g.keys, g.cells(), g.dim);
    throw InvalidInput("grid has no CLS-attention source (cls_attn or q_cls/keys)");
}

// importance(c) = sum of member attention.
inline void score_clusters(ClusterSet& cs, std::span<const double> cls_attn) {
    if (cls_attn.size() != cs.shape.cells()) throw InvalidInput("cls_attn size does not match cluster grid");
    for (auto& c : cs.clusters) {
        double s = 0.0;
        for (std::size_t i : c.members) s += cls_attn[i];
        c.importance = s;
    }
}

enum class TokenKind { kept_original, summary };

struct SemanticToken {
    std::vector<double> vector;
    int cluster_id = -1;
    std::optional<Cell> cell;  // set for kept-original tokens
    TokenKind kind = TokenKind::kept_original;
    double importance = 0.0;
    std::size_t cluster_size = 0;

    friend bool operator==(const SemanticToken&, const SemanticToken&) = default;
};

using SemanticTokens = std::vector<SemanticToken>;

// Cluster ids ordered by descending importance, ties to the lower id.
[[nodiscard]] inline std::vector<int> rank_clusters(const ClusterSet& cs) {
    std::vector<int> order(cs.clusters.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return cs.clusters[static_cast<std::size_t>(a)].importance > cs.clusters[static_cast<std::size_t>(b)].importance;
    });
    return order;
}

// Top n_sem clusters by importance. Clusters of at most theta_size cells keep
// their highest-attention member verbatim; larger ones emit the
// attention-weighted mean (plain mean if the cluster has zero attention mass).
[[nodiscard]] inline SemanticTokens represent_clusters(const FeatureGrid& grid, const ClusterSet& scored,
                                                       std::span<const double> cls_attn, std::int64_t n_sem,
                                                       int theta_size, unsigned workers = 1) {
    if (n_sem <= 0) return {};
    if (cls_attn.size() != grid.cells()) throw InvalidInput("cls_attn size does not match grid");
    const auto order = rank_clusters(scored);
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n_sem), order.size());
    SemanticTokens out(take);
    const std::size_t d = static_cast<std::size_t>(grid.dim);
    parallel_for(take, workers, [&](std::size_t t) {
        const int id = order[t];
        const Cluster& c = scored.clusters[static_cast<std::size_t>(id)];
        SemanticToken& tok = out[t];
        tok.cluster_id = id;
        tok.importance = c.importance;
        tok.cluster_size = c.size();
        tok.vector.assign(d, 0.0);
        if (c.size() <= static_cast<std::size_t>(std::max(theta_size, 0))) {
            std::size_t best = c.members.front();
            for (std::size_t i : c.members)
                if (cls_attn[i] > cls_attn[best]) best = i;
            const auto f = grid.feature(best);
            std::copy(f.begin(), f.end(), tok.vector.begin());
            tok.kind = TokenKind::kept_original;
            tok.cell = grid.shape().cell(best);
            return;
        }
        tok.kind = TokenKind::summary;
        double mass = 0.0;
        for (std::size_t i : c.members) mass += cls_attn[i];
        std::vector<double> lo(d, std::numeric_limits<double>::infinity());
        std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
        for (std::size_t i : c.members) {
            const double w = mass > 0.0 ? cls_attn[i] / mass : 1.0 / static_cast<double>(c.size());
            const auto f = grid.feature(i);
            for (std::size_t k = 0; k < d; ++k) {
                tok.vector[k] += w * f[k];
                lo[k] = std::min(lo[k], static_cast<double>(f[k]));
                hi[k] = std::max(hi[k], static_cast<double>(f[k]));
            }
        }
        // Rounding in the weighted sum must not step outside the members' hull.
        for (std::size_t k = 0; k < d; ++k) tok.vector[k] = std::clamp(tok.vector[k], lo[k], hi[k]);
    });
    return out;
}

}  // namespace dualcomp::scsa
