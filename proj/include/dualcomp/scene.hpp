// Synthetic ultra-high-resolution scene benchmark: seeded scene generator with
// ground truth, the fidelity proxies used by the sweeps, and a synthetic
// instruction corpus for router training.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualcomp/common.hpp"
#include "dualcomp/fusion.hpp"
#include "dualcomp/grid.hpp"
#include "dualcomp/labels.hpp"
#include "dualcomp/router.hpp"
#include "dualcomp/scsa.hpp"

namespace dualcomp::scene {

// ---------------------------------------------------------------------------
// Counter-based generator: value n of stream `seed` is splitmix64's finaliser
// applied to seed + (n+1) * golden-gamma. Pure function of (seed, counter).

[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : seed_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next() noexcept { return mix64(seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }
    // [0, 1)
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    // [lo, hi] inclusive
    int uniform_int(int lo, int hi) noexcept {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next() % span);
    }
    double normal() noexcept {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

enum class TaskKind { semantic, geometric, balanced };

[[nodiscard]] inline std::string_view to_string(TaskKind k) noexcept {
    switch (k) {
        case TaskKind::semantic: return "semantic";
        case TaskKind::geometric: return "geometric";
        case TaskKind::balanced: return "balanced";
    }
    return "balanced";
}

[[nodiscard]] inline TaskKind parse_task_kind(std::string_view s) {
    if (s == "semantic") return TaskKind::semantic;
    if (s == "geometric") return TaskKind::geometric;
    if (s == "balanced") return TaskKind::balanced;
    throw ConfigError("unknown task kind '" + std::string(s) + "'");
}

struct SceneSpec {
    int height = 48;
    int width = 48;
    int dim = 64;
    int n_objects = 8;
    int object_size_min = 2;
    int object_size_max = 4;
    int n_roads = 2;
    int road_waypoints = 4;
    double noise_scale = 0.3;       // L2 norm of per-cell background perturbation
    int n_clutter = 6;              // textured built-up patches
    int clutter_size_max = 6;
    double clutter_strength = 0.45;
    double road_contrast_min = 0.35;  // per-segment road/background blend lower bound
    double object_attention_boost = 4.0;
    double road_attention_boost = 0.5;
    TaskKind task_kind = TaskKind::balanced;
    std::uint64_t seed = 0;
};

inline void validate(const SceneSpec& s) {
    if (s.height <= 0 || s.width <= 0 || static_cast<long long>(s.height) * s.width < 16)
        throw ConfigError("scene needs H*W >= 16");
    if (s.dim < 4) throw ConfigError("scene feature dimension must be >= 4");
    if (s.n_objects < 0 || s.n_roads < 0 || s.n_clutter < 0) throw ConfigError("scene counts must be >= 0");
    if (s.object_size_min < 1 || s.object_size_min > s.object_size_max) throw ConfigError("invalid object size range");
    if (s.road_waypoints < 2) throw ConfigError("roads need at least 2 waypoints");
    if (!(s.noise_scale >= 0.0) || !(s.clutter_strength >= 0.0)) throw ConfigError("noise scales must be >= 0");
    if (!(s.road_contrast_min > 0.0 && s.road_contrast_min <= 1.0)) throw ConfigError("road_contrast_min must lie in (0,1]");
    if (s.clutter_size_max < 1) throw ConfigError("clutter_size_max must be >= 1");
}

struct GroundTruth {
    Shape2 shape;
    std::vector<char> object_mask;
    std::vector<std::vector<char>> road_masks;
    std::vector<double> object_feature;
    std::vector<double> road_feature;
    std::vector<double> background_feature;
    TaskKind task_kind = TaskKind::balanced;

    [[nodiscard]] std::size_t object_cells() const {
        return static_cast<std::size_t>(std::count(object_mask.begin(), object_mask.end(), 1));
    }
};

struct Scene {
    FeatureGrid grid;
    GroundTruth truth;
};

// Bresenham segment, inclusive of both endpoints; consecutive cells are
// 8-adjacent.
[[nodiscard]] inline std::vector<Cell> bresenham(Cell a, Cell b) {
    std::vector<Cell> out;
    int x0 = a.col, y0 = a.row;
    const int x1 = b.col, y1 = b.row;
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        out.push_back(Cell{y0, x0});
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
    return out;
}

namespace detail {

[[nodiscard]] inline std::vector<std::vector<double>> orthonormal_set(CounterRng& rng, int count, int dim) {
    std::vector<std::vector<double>> basis;
    while (static_cast<int>(basis.size()) < count) {
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (double& x : v) x = rng.normal();
        for (const auto& b : basis) {
            const double p = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
            for (std::size_t k = 0; k < v.size(); ++k) v[k] -= p * b[k];
        }
        const double n = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (n < 1e-6) continue;
        for (double& x : v) x /= n;
        basis.push_back(std::move(v));
    }
    return basis;
}

[[nodiscard]] inline Cell border_point(CounterRng& rng, Shape2 s, int side) {
    switch (side & 3) {
        case 0: return {0, rng.uniform_int(0, s.width - 1)};
        case 1: return {s.height - 1, rng.uniform_int(0, s.width - 1)};
        case 2: return {rng.uniform_int(0, s.height - 1), 0};
        default: return {rng.uniform_int(0, s.height - 1), s.width - 1};
    }
}

}  // namespace detail

// Background = background_feature + seeded perturbation; textured clutter
// patches; roads are Bresenham polylines between border-to-border waypoints
// with per-segment contrast; objects are rectangular or elliptic blobs placed
// away from roads where possible (objects win any overlap). CLS attention is a
// softmax over a score map raised on objects (and slightly on roads).
[[nodiscard]] inline Scene generate_scene(const SceneSpec& spec) {
    validate(spec);
    CounterRng rng(spec.seed);
    const Shape2 shape{spec.height, spec.width};
    const std::size_t n = shape.cells();
    const auto d = static_cast<std::size_t>(spec.dim);

    Scene sc;
    auto& g = sc.grid;
    auto& t = sc.truth;
    g = FeatureGrid(spec.height, spec.width, spec.dim);
    t.shape = shape;
    t.task_kind = spec.task_kind;
    t.object_mask.assign(n, 0);

    const auto basis = detail::orthonormal_set(rng, 3, spec.dim);
    t.background_feature = basis[0];
    t.object_feature = basis[1];
    t.road_feature = basis[2];

    // f64 working copy, rounded to f32 once at the end.
    std::vector<double> feat(n * d);
    const double per_component = spec.noise_scale / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d; ++k) feat[i * d + k] = t.background_feature[k] + per_component * rng.normal();

    // Clutter: each cell gets its own random direction on top of background.
    const double clutter_component = spec.clutter_strength / std::sqrt(static_cast<double>(d));
    for (int c = 0; c < spec.n_clutter; ++c) {
        const int h = rng.uniform_int(2, std::max(2, std::min(spec.clutter_size_max, spec.height)));
        const int w = rng.uniform_int(2, std::max(2, std::min(spec.clutter_size_max, spec.width)));
        const int r0 = rng.uniform_int(0, std::max(0, spec.height - h));
        const int c0 = rng.uniform_int(0, std::max(0, spec.width - w));
        for (int r = r0; r < std::min(spec.height, r0 + h); ++r)
            for (int cc = c0; cc < std::min(spec.width, c0 + w); ++cc) {
                const std::size_t i = shape.index(Cell{r, cc});
                for (std::size_t k = 0; k < d; ++k) feat[i * d + k] += clutter_component * rng.normal();
            }
    }

    // Roads.
    std::vector<char> any_road(n, 0);
    for (int r = 0; r < spec.n_roads; ++r) {
        std::vector<char> mask(n, 0);
        const int side = rng.uniform_int(0, 3);
        std::vector<Cell> way;
        way.push_back(detail::border_point(rng, shape, side));
        for (int k = 0; k + 2 < spec.road_waypoints; ++k)
            way.push_back(Cell{rng.uniform_int(0, spec.height - 1), rng.uniform_int(0, spec.width - 1)});
        way.push_back(detail::border_point(rng, shape, side ^ 1));
        for (std::size_t s = 0; s + 1 < way.size(); ++s) {
            const double contrast = rng.uniform(spec.road_contrast_min, 1.0);
            for (Cell c : bresenham(way[s], way[s + 1])) {
                const std::size_t i = shape.index(c);
                if (mask[i]) continue;
                mask[i] = 1;
                if (any_road[i]) continue;  // first road to claim a cell sets its feature
                any_road[i] = 1;
                for (std::size_t k = 0; k < d; ++k)
                    feat[i * d + k] += contrast * (t.road_feature[k] - t.background_feature[k]);
            }
        }
        t.road_masks.push_back(std::move(mask));
    }

    // Objects.
    for (int o = 0; o < spec.n_objects; ++o) {
        std::vector<Cell> blob;
        for (int attempt = 0; attempt < 64; ++attempt) {
            blob.clear();
            const int h = rng.uniform_int(spec.object_size_min, spec.object_size_max);
            const int w = rng.uniform_int(spec.object_size_min, spec.object_size_max);
            const bool ellipse = rng.uniform() < 0.5;
            const int r0 = rng.uniform_int(0, std::max(0, spec.height - h));
            const int c0 = rng.uniform_int(0, std::max(0, spec.width - w));
            bool clear = true;
            for (int r = r0; r < std::min(spec.height, r0 + h); ++r) {
                for (int c = c0; c < std::min(spec.width, c0 + w); ++c) {
                    if (ellipse && h > 2 && w > 2) {
                        const double y = (r - r0 + 0.5) / h - 0.5;
                        const double x = (c - c0 + 0.5) / w - 0.5;
                        if (x * x + y * y > 0.25) continue;
                    }
                    blob.push_back(Cell{r, c});
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc) {
                            const Cell nb{r + dr, c + dc};
                            if (shape.contains(nb) && any_road[shape.index(nb)]) clear = false;
                        }
                }
            }
            if (clear) break;
        }
        for (Cell c : blob) {
            const std::size_t i = shape.index(c);
            t.object_mask[i] = 1;
            for (auto& m : t.road_masks) m[i] = 0;
            any_road[i] = 0;
            for (std::size_t k = 0; k < d; ++k) feat[i * d + k] = t.object_feature[k] + per_component * rng.normal();
        }
    }

    for (std::size_t k = 0; k < feat.size(); ++k) g.features[k] = static_cast<float>(feat[k]);

    // CLS attention.
    std::vector<double> score(n);
    const double jitter = 0.1 * spec.noise_scale;
    for (std::size_t i = 0; i < n; ++i) {
        score[i] = jitter * rng.normal();
        if (t.object_mask[i]) score[i] += spec.object_attention_boost;
        else if (any_road[i]) score[i] += spec.road_attention_boost;
    }
    const double mx = *std::max_element(score.begin(), score.end());
    double z = 0.0;
    for (double& s : score) {
        s = std::exp(s - mx);
        z += s;
    }
    for (double& s : score) s /= z;
    g.cls_attn = std::move(score);

    // Text relevance against the feature the task asks about.
    std::vector<float> target(d);
    for (std::size_t k = 0; k < d; ++k) {
        double v = 0.0;
        switch (spec.task_kind) {
            case TaskKind::geometric: v = t.road_feature[k]; break;
            case TaskKind::semantic: v = t.object_feature[k]; break;
            case TaskKind::balanced: v = (t.road_feature[k] + t.object_feature[k]) / std::sqrt(2.0); break;
        }
        target[k] = static_cast<float>(v);
    }
    std::vector<double> sim(n);
    for (std::size_t i = 0; i < n; ++i) sim[i] = cosine(std::span<const float>(target), g.feature(i));
    g.text_sim = std::move(sim);
    return sc;
}

// ---------------------------------------------------------------------------
// Fidelity proxies

// Fraction of object cells that are a retained token's source cell or belong
// to a cluster represented in the semantic block. No object cells -> 1.0.
[[nodiscard]] inline double object_preservation(const fusion::CompressedSequence& seq, const scsa::ClusterSet* clusters,
                                                const GroundTruth& truth) {
    const std::size_t total = truth.object_cells();
    if (total == 0) return 1.0;
    const Shape2 shape = truth.shape;
    std::vector<char> covered(shape.cells(), 0);
    std::vector<char> selected(clusters ? clusters->clusters.size() : 0, 0);
    for (const auto& tok : seq.tokens) {
        if (tok.cell) covered[shape.index(*tok.cell)] = 1;
        if (tok.stream == fusion::Stream::semantic && clusters && tok.cluster_id >= 0)
            selected[static_cast<std::size_t>(tok.cluster_id)] = 1;
    }
    std::size_t hit = 0;
    for (std::size_t i = 0; i < shape.cells(); ++i) {
        if (!truth.object_mask[i]) continue;
        if (covered[i] || (clusters && selected[static_cast<std::size_t>(clusters->label[i])])) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

namespace detail {

struct DisjointSet {
    std::vector<std::size_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace detail

struct PathRecall {
    double recall = 1.0;             // over the union of all road cells
    std::vector<bool> connected;     // per road
    bool vacuous = false;            // no road cells
};

// A road cell is recalled when some geometric token lies within Chebyshev
// `radius`. A road is connected when the geometric tokens within `radius` of it
// form a single 8-connected component.
[[nodiscard]] inline PathRecall path_recall(const fusion::CompressedSequence& seq, const GroundTruth& truth, int radius = 1) {
    if (radius < 0) throw InvalidInput("path_recall radius must be >= 0");
    const Shape2 shape = truth.shape;
    std::vector<Cell> geo;
    for (const auto& tok : seq.tokens)
        if (tok.stream == fusion::Stream::geometric && tok.cell) geo.push_back(*tok.cell);

    // Dilate the token set by `radius`.
    std::vector<char> near_token(shape.cells(), 0);
    for (Cell c : geo)
        for (int dr = -radius; dr <= radius; ++dr)
            for (int dc = -radius; dc <= radius; ++dc) {
                const Cell nb{c.row + dr, c.col + dc};
                if (shape.contains(nb)) near_token[shape.index(nb)] = 1;
            }

    PathRecall out;
    std::size_t road_total = 0;
    std::size_t road_hit = 0;
    for (std::size_t i = 0; i < shape.cells(); ++i) {
        bool road = false;
        for (const auto& m : truth.road_masks) road = road || m[i];
        if (!road) continue;
        ++road_total;
        if (near_token[i]) ++road_hit;
    }
    out.vacuous = road_total == 0;
    out.recall = out.vacuous ? 1.0 : static_cast<double>(road_hit) / static_cast<double>(road_total);

    std::vector<int> token_at(shape.cells(), -1);
    for (std::size_t k = 0; k < geo.size(); ++k) token_at[shape.index(geo[k])] = static_cast<int>(k);
    for (const auto& mask : truth.road_masks) {
        std::vector<char> near_road(shape.cells(), 0);
        for (std::size_t i = 0; i < shape.cells(); ++i) {
            if (!mask[i]) continue;
            const Cell c = shape.cell(i);
            for (int dr = -radius; dr <= radius; ++dr)
                for (int dc = -radius; dc <= radius; ++dc) {
                    const Cell nb{c.row + dr, c.col + dc};
                    if (shape.contains(nb)) near_road[shape.index(nb)] = 1;
                }
        }
        std::vector<std::size_t> members;
        for (std::size_t k = 0; k < geo.size(); ++k)
            if (near_road[shape.index(geo[k])]) members.push_back(k);
        if (members.empty()) {
            out.connected.push_back(false);
            continue;
        }
        detail::DisjointSet dsu(geo.size());
        for (std::size_t k : members) {
            const Cell c = geo[k];
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    const Cell nb{c.row + dr, c.col + dc};
                    if (!shape.contains(nb)) continue;
                    const int j = token_at[shape.index(nb)];
                    if (j >= 0 && near_road[shape.index(nb)]) dsu.unite(k, static_cast<std::size_t>(j));
                }
        }
        const std::size_t root = dsu.find(members.front());
        out.connected.push_back(std::all_of(members.begin(), members.end(),
                                            [&](std::size_t k) { return dsu.find(k) == root; }));
    }
    return out;
}

// Relative LLM cost estimate: linear_per_token * n + quadratic_per_token2 * n^2.
struct CostModel {
    double params = 8.0e9;  // dense parameters of the host LLM
    int layers = 32;
    int hidden = 4096;

    // 2 FLOPs per parameter per token.
    [[nodiscard]] double linear() const noexcept { return 2.0 * params; }
    // Attention scores plus weighted sum: 4 * layers * hidden per token pair.
    [[nodiscard]] double quadratic() const noexcept { return 4.0 * layers * static_cast<double>(hidden); }
};

// TFLOPs for `tokens` visual tokens.
[[nodiscard]] inline double flops_proxy(double tokens, double linear, double quadratic) {
    if (tokens < 0.0) throw InvalidInput("token count must be >= 0");
    return (linear * tokens + quadratic * tokens * tokens) * 1e-12;
}

[[nodiscard]] inline double flops_proxy(double tokens, const CostModel& m = {}) {
    if (!(m.params > 0.0) || m.layers <= 0 || m.hidden <= 0) throw ConfigError("cost model dims must be positive");
    return flops_proxy(tokens, m.linear(), m.quadratic());
}

struct FidelityReport {
    double object_preservation = 1.0;
    double path_recall = 1.0;
    std::vector<bool> path_connected;
    double compression_ratio = 1.0;  // n_max / n_keep
    std::size_t tokens_kept = 0;     // n_keep
    std::size_t tokens_emitted = 0;  // length of the fused sequence
    double flops_proxy = 0.0;
    bool objects_vacuous = false;
    bool roads_vacuous = false;

    [[nodiscard]] double path_connected_frac() const noexcept {
        if (path_connected.empty()) return 1.0;
        return static_cast<double>(std::count(path_connected.begin(), path_connected.end(), true)) /
               static_cast<double>(path_connected.size());
    }
};

// FLOPs are charged for the emitted tokens.
[[nodiscard]] inline FidelityReport evaluate(const fusion::CompressedSequence& seq, const scsa::ClusterSet* clusters,
                                             const GroundTruth& truth, const TokenBudget& budget,
                                             const CostModel& cost = {}, int radius = 1) {
    if (budget.n_keep < 1) throw InvalidInput("budget n_keep must be >= 1");
    FidelityReport r;
    r.tokens_kept = static_cast<std::size_t>(budget.n_keep);
    r.tokens_emitted = seq.tokens.size();
    r.compression_ratio = static_cast<double>(budget.n_max) / static_cast<double>(budget.n_keep);
    r.object_preservation = object_preservation(seq, clusters, truth);
    r.objects_vacuous = truth.object_cells() == 0;
    const auto pr = path_recall(seq, truth, radius);
    r.path_recall = pr.recall;
    r.path_connected = pr.connected;
    r.roads_vacuous = pr.vacuous;
    r.flops_proxy = flops_proxy(static_cast<double>(r.tokens_emitted), cost);
    return r;
}

// Uncompressed reference: every one of the n_max input tokens is kept.
[[nodiscard]] inline FidelityReport evaluate_identity(const GroundTruth& truth, const CostModel& cost = {}) {
    FidelityReport r;
    r.tokens_kept = truth.shape.cells();
    r.tokens_emitted = r.tokens_kept;
    r.compression_ratio = 1.0;
    r.objects_vacuous = truth.object_cells() == 0;
    r.roads_vacuous = std::none_of(truth.road_masks.begin(), truth.road_masks.end(),
                                   [](const auto& m) { return std::count(m.begin(), m.end(), 1) > 0; });
    r.path_connected.assign(truth.road_masks.size(), true);
    r.flops_proxy = flops_proxy(static_cast<double>(r.tokens_kept), cost);
    return r;
}

// ---------------------------------------------------------------------------
// Synthetic instruction embeddings and router corpus

// Deterministic per-word Gaussian vectors (seeded by an FNV-1a hash of the
// lowercased word), mean-pooled over the instruction's words.
[[nodiscard]] inline std::vector<double> word_embedding(std::string_view word, int dim) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : word) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    CounterRng rng(h, 0x7e47);
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = rng.normal();
    return v;
}

[[nodiscard]] inline InstructionRepr embed_instruction(std::string_view text, int dim) {
    auto words = tokenize_words(text);
    if (words.empty()) words.emplace_back("<empty>");
    std::vector<std::vector<double>> toks;
    toks.reserve(words.size());
    for (const auto& w : words) toks.push_back(word_embedding(w, dim));
    return mean_pool(toks, std::string(text));
}

// Retention target per task class.
struct RhoTable {
    double semantic = 0.04;
    double balanced = 0.06;
    double geometric = 0.10;

    [[nodiscard]] double of(TaskKind k) const noexcept {
        switch (k) {
            case TaskKind::semantic: return semantic;
            case TaskKind::geometric: return geometric;
            case TaskKind::balanced: return balanced;
        }
        return balanced;
    }
};

struct CorpusEntry {
    std::string text;
    TaskKind kind = TaskKind::balanced;
};

// Template instructions. `held_out` switches to a disjoint filler vocabulary.
[[nodiscard]] inline std::vector<CorpusEntry> instruction_corpus(std::size_t count, std::uint64_t seed, bool held_out = false) {
    static constexpr std::array<std::string_view, 8> kPlacesA{"harbor", "stadium", "airport", "school",
                                                              "bridge", "market", "station", "hospital"};
    static constexpr std::array<std::string_view, 8> kPlacesB{"factory", "temple", "pier", "campus",
                                                              "depot", "library", "park", "castle"};
    static constexpr std::array<std::string_view, 6> kThingsA{"cars", "ships", "trucks", "planes", "tanks", "buses"};
    static constexpr std::array<std::string_view, 6> kThingsB{"boats", "vans", "cranes", "trains", "bikes", "silos"};

    static constexpr std::array<std::string_view, 6> kGeometric{
        "Plan a route from the {p} to the {q}",
        "Which path connects the {p} and the {q}",
        "Describe the layout around the {p}",
        "What is the land use zone near the {p}",
        "Trace the boundary of the region around the {q}",
        "In which direction should I go to connect the {p} to the {q}"};
    static constexpr std::array<std::string_view, 6> kSemantic{
        "How many {t} are parked near the {p}",
        "Count the {t} in the image",
        "What color are the {t}",
        "Are any {t} present next to the {p}",
        "Which category of object are the {t}",
        "Are the {t} moving or parked"};
    static constexpr std::array<std::string_view, 4> kBalanced{
        "What color is the object on the route to the {p}",
        "Count the {t} along the path to the {q}",
        "Which class of object lies inside the zone by the {p}",
        "How many {t} are inside the region near the {q}"};

    const auto& places = held_out ? kPlacesB : kPlacesA;
    const auto& things = held_out ? kThingsB : kThingsA;
    CounterRng rng(seed, held_out ? 2 : 1);
    auto fill = [&](std::string_view tmpl) {
        std::string out;
        for (std::size_t k = 0; k < tmpl.size(); ++k) {
            if (tmpl[k] == '{' && k + 2 < tmpl.size() && tmpl[k + 2] == '}') {
                const char tag = tmpl[k + 1];
                if (tag == 't') out += things[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(things.size()) - 1))];
                else out += places[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(places.size()) - 1))];
                k += 2;
            } else {
                out.push_back(tmpl[k]);
            }
        }
        return out;
    };
    std::vector<CorpusEntry> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int cls = static_cast<int>(i % 5);  // 2 geometric : 2 semantic : 1 balanced
        CorpusEntry e;
        if (cls < 2) {
            e.kind = TaskKind::geometric;
            e.text = fill(kGeometric[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(kGeometric.size()) - 1))]);
        } else if (cls < 4) {
            e.kind = TaskKind::semantic;
            e.text = fill(kSemantic[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(kSemantic.size()) - 1))]);
        } else {
            e.kind = TaskKind::balanced;
            e.text = fill(kBalanced[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(kBalanced.size()) - 1))]);
        }
        out.push_back(std::move(e));
    }
    return out;
}

// Rule-labelled records for a corpus (no LLM score).
[[nodiscard]] inline std::vector<LabelRecord> label_corpus(const std::vector<CorpusEntry>& corpus, const Lexicon& lex,
                                                           const RhoTable& rho, double alpha, double rho_min) {
    std::vector<LabelRecord> out;
    out.reserve(corpus.size());
    for (const auto& e : corpus)
        out.push_back(make_label(e.text, rule_label(e.text, lex), std::nullopt, alpha, rho.of(e.kind), rho_min));
    return out;
}

[[nodiscard]] inline std::vector<TrainingSample> training_samples(const std::vector<LabelRecord>& labels, int dim) {
    std::vector<TrainingSample> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back({embed_instruction(l.text, dim), RouterTarget{l.lambda_gt, l.rho_gt}});
    return out;
}

}  // namespace dualcomp::scene
