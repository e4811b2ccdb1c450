// Geometric stream: local-difference structural saliency, optional text-aware
// modulation, coverage anchors, and greedy Chebyshev-decreasing path tracing
// between consecutive anchors.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "dualcomp/common.hpp"
#include "dualcomp/grid.hpp"

namespace dualcomp::igsr {

struct IgsrConfig {
    double beta = 1.0;
    int radius = 1;       // neighbourhood radius used while tracing
    int k_min = 2;        // anchor count: max(k_min, round(k_scale * sqrt(n_geo))), capped at n_geo
    double k_scale = 1.0;
};

inline void validate(const IgsrConfig& c) {
    if (!(c.beta >= 0.0) || !std::isfinite(c.beta)) throw ConfigError("igsr beta must be >= 0");
    if (c.radius < 1) throw ConfigError("igsr neighbourhood radius must be >= 1");
    if (c.k_min < 1) throw ConfigError("igsr k_min must be >= 1");
    if (!(c.k_scale > 0.0) || !std::isfinite(c.k_scale)) throw ConfigError("igsr k_scale must be > 0");
}

[[nodiscard]] inline std::int64_t k_target_for(std::int64_t n_geo, std::size_t cells, const IgsrConfig& c) {
    if (n_geo <= 0) return 0;
    const auto k = std::max<std::int64_t>(c.k_min, std::llround(c.k_scale * std::sqrt(static_cast<double>(n_geo))));
    return std::min<std::int64_t>({k, n_geo, static_cast<std::int64_t>(cells)});
}

// ||F(i) - mean of F over the in-bounds 3x3 window around i||^2.
[[nodiscard]] inline std::vector<double> local_difference_saliency(const FeatureGrid& grid) {
    const Shape2 shape = grid.shape();
    const auto d = static_cast<std::size_t>(grid.dim);
    std::vector<double> out(shape.cells(), 0.0);
    std::vector<double> mean(d);
    for (int r = 0; r < shape.height; ++r) {
        for (int c = 0; c < shape.width; ++c) {
            std::fill(mean.begin(), mean.end(), 0.0);
            int count = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const Cell nb{r + dr, c + dc};
                    if (!shape.contains(nb)) continue;
                    const auto f = grid.feature(nb);
                    for (std::size_t k = 0; k < d; ++k) mean[k] += f[k];
                    ++count;
                }
            }
            const double inv = 1.0 / count;
            const auto f = grid.feature(Cell{r, c});
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = static_cast<double>(f[k]) - mean[k] * inv;
                s += diff * diff;
            }
            out[shape.index(Cell{r, c})] = s;
        }
    }
    return out;
}

// Per-cell cosine between the text embedding and the cell feature.
[[nodiscard]] inline std::vector<double> text_relevance(const FeatureGrid& grid, std::span<const float> text_embedding) {
    if (text_embedding.size() != static_cast<std::size_t>(grid.dim))
        throw InvalidInput("text embedding dimension " + std::to_string(text_embedding.size()) +
                           " does not match feature dimension " + std::to_string(grid.dim));
    std::vector<double> out(grid.cells());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cosine(text_embedding, grid.feature(i));
    return out;
}

// Min-max to [0,1]; a constant field maps to all zeros.
[[nodiscard]] inline std::vector<double> min_max_normalize(std::span<const double> v) {
    std::vector<double> out(v.size(), 0.0);
    if (v.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / range;
    return out;
}

struct StructField {
    Shape2 shape;
    std::vector<double> s_geo;
    std::optional<std::vector<double>> s_text;
    std::vector<double> s_struct;
    double beta = 1.0;

    [[nodiscard]] double at(Cell c) const noexcept { return s_struct[shape.index(c)]; }
};

// s_struct = norm(s_geo) * (1 + beta * norm(s_text)); norm(s_geo) without text.
[[nodiscard]] inline StructField build_struct_field(Shape2 shape, std::vector<double> s_geo,
                                                    std::optional<std::vector<double>> s_text, double beta) {
    if (!(beta >= 0.0)) throw InvalidInput("beta must be >= 0");
    if (s_geo.size() != shape.cells()) throw InvalidInput("s_geo size does not match grid");
    if (s_text && s_text->size() != shape.cells()) throw InvalidInput("s_text size does not match grid");
    StructField f;
    f.shape = shape;
    f.beta = beta;
    f.s_struct = min_max_normalize(s_geo);
    if (s_text) {
        const auto nt = min_max_normalize(*s_text);
        for (std::size_t i = 0; i < nt.size(); ++i) f.s_struct[i] *= 1.0 + beta * nt[i];
    }
    f.s_geo = std::move(s_geo);
    f.s_text = std::move(s_text);
    return f;
}

// Higher score first, then raster order.
[[nodiscard]] inline bool ranks_before(const StructField& f, Cell a, Cell b) noexcept {
    const double sa = f.at(a);
    const double sb = f.at(b);
    if (sa != sb) return sa > sb;
    return a < b;
}

struct AnchorSet {
    std::vector<Cell> anchors;
    int grid_rows = 0;  // subregion partition
    int grid_cols = 0;
};

// Smallest near-square partition with at least k subregions that fits the grid.
[[nodiscard]] inline std::pair<int, int> partition_dims(Shape2 shape, std::int64_t k) {
    auto ceil_div = [](std::int64_t a, std::int64_t b) { return (a + b - 1) / b; };
    std::int64_t cols = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(k))));
    std::int64_t rows = ceil_div(k, cols);
    if (cols > shape.width) {
        cols = shape.width;
        rows = ceil_div(k, cols);
    }
    if (rows > shape.height) {
        rows = shape.height;
        cols = std::min<std::int64_t>(shape.width, ceil_div(k, rows));
    }
    return {static_cast<int>(rows), static_cast<int>(cols)};
}

// Greedy nearest-neighbour chain under Chebyshev distance, starting from the
// raster-smallest anchor; ties go to raster order.
[[nodiscard]] inline std::vector<Cell> traversal_order(std::vector<Cell> anchors) {
    if (anchors.size() <= 1) return anchors;
    std::sort(anchors.begin(), anchors.end());
    std::vector<Cell> chain;
    chain.reserve(anchors.size());
    std::vector<bool> used(anchors.size(), false);
    std::size_t cur = 0;
    used[0] = true;
    chain.push_back(anchors[0]);
    for (std::size_t step = 1; step < anchors.size(); ++step) {
        std::size_t best = anchors.size();
        int best_d = std::numeric_limits<int>::max();
        for (std::size_t j = 0; j < anchors.size(); ++j) {
            if (used[j]) continue;
            const int dj = chebyshev(anchors[cur], anchors[j]);
            if (dj < best_d) {  // anchors are sorted, so the first minimum is raster-smallest
                best_d = dj;
                best = j;
            }
        }
        used[best] = true;
        chain.push_back(anchors[best]);
        cur = best;
    }
    return chain;
}

// One argmax anchor per subregion, trimmed to the k best when the partition
// has spare cells, then chained by traversal_order.
[[nodiscard]] inline AnchorSet extract_anchors(const StructField& field, std::int64_t k_target) {
    AnchorSet out;
    if (k_target <= 0) return out;
    const Shape2 shape = field.shape;
    if (static_cast<std::size_t>(k_target) > shape.cells()) throw InvalidInput("k_target exceeds grid cell count");
    const auto [rows, cols] = partition_dims(shape, k_target);
    out.grid_rows = rows;
    out.grid_cols = cols;
    std::vector<Cell> candidates;
    candidates.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int gr = 0; gr < rows; ++gr) {
        const int r0 = gr * shape.height / rows;
        const int r1 = (gr + 1) * shape.height / rows;
        for (int gc = 0; gc < cols; ++gc) {
            const int c0 = gc * shape.width / cols;
            const int c1 = (gc + 1) * shape.width / cols;
            Cell best{r0, c0};
            for (int r = r0; r < r1; ++r)
                for (int c = c0; c < c1; ++c)
                    if (ranks_before(field, Cell{r, c}, best)) best = Cell{r, c};
            candidates.push_back(best);
        }
    }
    if (candidates.size() > static_cast<std::size_t>(k_target)) {
        std::sort(candidates.begin(), candidates.end(), [&](Cell a, Cell b) { return ranks_before(field, a, b); });
        candidates.resize(static_cast<std::size_t>(k_target));
    }
    out.anchors = traversal_order(std::move(candidates));
    return out;
}

// Greedy trace from `from` to `to`: each step moves to the highest-scoring cell
// within `radius` that is strictly closer (Chebyshev) to the target; ties go to
// the closer cell, then raster order. Returns the visited cells including both
// endpoints.
[[nodiscard]] inline std::vector<Cell> trace_path(const StructField& field, Cell from, Cell to, int radius = 1) {
    if (from == to) throw InvalidInput("trace_path requires distinct endpoints");
    if (!field.shape.contains(from) || !field.shape.contains(to)) throw InvalidInput("trace endpoint out of bounds");
    if (radius < 1) throw InvalidInput("trace radius must be >= 1");
    std::vector<Cell> path{from};
    path.reserve(static_cast<std::size_t>(chebyshev(from, to)) + 1);
    Cell v = from;
    while (v != to) {
        const int dv = chebyshev(v, to);
        std::optional<Cell> best;
        double best_s = 0.0;
        int best_d = 0;
        for (int dr = -radius; dr <= radius; ++dr) {
            for (int dc = -radius; dc <= radius; ++dc) {
                const Cell u{v.row + dr, v.col + dc};
                if ((dr == 0 && dc == 0) || !field.shape.contains(u)) continue;
                const int du = chebyshev(u, to);
                if (du >= dv) continue;
                const double su = field.at(u);
                // Candidates are scanned in raster order, so strict comparisons keep the raster-first tie.
                if (!best || su > best_s || (su == best_s && du < best_d)) {
                    best = u;
                    best_s = su;
                    best_d = du;
                }
            }
        }
        // A step toward `to` on each axis is always in bounds and strictly closer.
        v = *best;
        path.push_back(v);
    }
    return path;
}

struct GeoToken {
    std::vector<double> vector;
    Cell cell;
    bool is_anchor = false;
    double score = 0.0;  // s_struct at the source cell

    friend bool operator==(const GeoToken&, const GeoToken&) = default;
};

struct TracedPaths {
    std::vector<std::vector<Cell>> paths;  // one per consecutive anchor pair
    std::vector<GeoToken> geo_tokens;      // trace order
};

namespace detail {

[[nodiscard]] inline GeoToken make_geo_token(const FeatureGrid& grid, const StructField& field, Cell c, bool anchor) {
    GeoToken t;
    const auto f = grid.feature(c);
    t.vector.assign(f.begin(), f.end());
    t.cell = c;
    t.is_anchor = anchor;
    t.score = field.at(c);
    return t;
}

}  // namespace detail

// Traces every consecutive anchor pair (in parallel), concatenates the cells in
// trace order keeping first occurrences, then trims to n_geo by dropping the
// lowest-scoring non-anchor cells. With fewer slots than anchors only the best
// anchors are kept and no paths are traced.
[[nodiscard]] inline TracedPaths complete_topology(const FeatureGrid& grid, const StructField& field,
                                                   const AnchorSet& anchors, std::int64_t n_geo,
                                                   const IgsrConfig& cfg = {}, unsigned workers = 1) {
    TracedPaths out;
    const auto& a = anchors.anchors;
    if (n_geo <= 0 || a.empty()) return out;
    const Shape2 shape = field.shape;

    if (static_cast<std::size_t>(n_geo) < a.size()) {
        std::vector<Cell> best = a;
        std::sort(best.begin(), best.end(), [&](Cell x, Cell y) { return ranks_before(field, x, y); });
        best.resize(static_cast<std::size_t>(n_geo));
        for (Cell c : a)
            if (std::find(best.begin(), best.end(), c) != best.end())
                out.geo_tokens.push_back(detail::make_geo_token(grid, field, c, true));
        return out;
    }

    out.paths.resize(a.size() - 1);
    parallel_for(out.paths.size(), workers,
                 [&](std::size_t p) { out.paths[p] = trace_path(field, a[p], a[p + 1], cfg.radius); });

    std::vector<char> is_anchor(shape.cells(), 0);
    for (Cell c : a) is_anchor[shape.index(c)] = 1;
    std::vector<char> seen(shape.cells(), 0);
    std::vector<Cell> order;
    auto visit = [&](Cell c) {
        const std::size_t i = shape.index(c);
        if (seen[i]) return;
        seen[i] = 1;
        order.push_back(c);
    };
    visit(a.front());
    for (const auto& path : out.paths)
        for (Cell c : path) visit(c);

    if (order.size() > static_cast<std::size_t>(n_geo)) {
        std::vector<Cell> droppable;
        for (Cell c : order)
            if (!is_anchor[shape.index(c)]) droppable.push_back(c);
        std::sort(droppable.begin(), droppable.end(), [&](Cell x, Cell y) {
            const double sx = field.at(x);
            const double sy = field.at(y);
            if (sx != sy) return sx < sy;
            return x < y;
        });
        std::vector<char> dropped(shape.cells(), 0);
        const std::size_t excess = order.size() - static_cast<std::size_t>(n_geo);
        for (std::size_t k = 0; k < excess; ++k) dropped[shape.index(droppable[k])] = 1;
        std::erase_if(order, [&](Cell c) { return dropped[shape.index(c)] != 0; });
    }
    out.geo_tokens.reserve(order.size());
    for (Cell c : order) out.geo_tokens.push_back(detail::make_geo_token(grid, field, c, is_anchor[shape.index(c)] != 0));
    return out;
}

// Ablation baseline: the n_geo highest-scoring cells, no anchors or paths.
[[nodiscard]] inline TracedPaths top_k_selection(const FeatureGrid& grid, const StructField& field, std::int64_t n_geo) {
    TracedPaths out;
    if (n_geo <= 0) return out;
    const Shape2 shape = field.shape;
    std::vector<Cell> cells(shape.cells());
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = shape.cell(i);
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n_geo), cells.size());
    std::partial_sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(take), cells.end(),
                      [&](Cell x, Cell y) { return ranks_before(field, x, y); });
    cells.resize(take);
    for (Cell c : cells) out.geo_tokens.push_back(detail::make_geo_token(grid, field, c, false));
    return out;
}

}  // namespace dualcomp::igsr
