// Lambda-weighted concatenation of the two streams and the final token order.
#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "dualcomp/common.hpp"
#include "dualcomp/igsr.hpp"
#include "dualcomp/scsa.hpp"

namespace dualcomp::fusion {

enum class Stream : std::uint8_t { semantic = 0, geometric = 1 };

struct FusedToken {
    std::vector<double> vector;  // already multiplied by weight when scaling is on
    std::optional<Cell> cell;    // source cell; absent for cluster summaries
    int cluster_id = -1;         // semantic tokens only
    Stream stream = Stream::semantic;
    double weight = 1.0;
    bool is_anchor = false;

    friend bool operator==(const FusedToken&, const FusedToken&) = default;
};

struct CompressedSequence {
    std::vector<FusedToken> tokens;
    double lambda_used = 0.0;
    double rho_used = 1.0;
    std::int64_t n_max = 0;
    int dim = 0;

    friend bool operator==(const CompressedSequence&, const CompressedSequence&) = default;
};

// [(1-lambda) * semantic..., lambda * geometric...]. A semantic kept-original
// token whose cell is also a geometric token is dropped in favour of the
// geometric one; its slot is not refilled.
[[nodiscard]] inline CompressedSequence fuse(const scsa::SemanticTokens& sem, const igsr::TracedPaths& geo, double lambda,
                                             bool scale_vectors = true) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda outside [0,1]");
    const double w_sem = 1.0 - lambda;
    const double w_geo = lambda;
    if (w_sem == 0.0 && !sem.empty()) throw InvalidInput("semantic stream is non-empty but carries zero weight");
    if (w_geo == 0.0 && !geo.geo_tokens.empty()) throw InvalidInput("geometric stream is non-empty but carries zero weight");

    CompressedSequence out;
    out.lambda_used = lambda;
    struct CellHash {
        std::size_t operator()(Cell c) const noexcept {
            return std::hash<long long>{}((static_cast<long long>(c.row) << 32) ^ static_cast<unsigned>(c.col));
        }
    };
    std::unordered_set<Cell, CellHash> geo_cells;
    for (const auto& g : geo.geo_tokens) geo_cells.insert(g.cell);

    out.tokens.reserve(sem.size() + geo.geo_tokens.size());
    for (const auto& s : sem) {
        if (s.cell && geo_cells.contains(*s.cell)) continue;
        FusedToken t;
        t.vector = s.vector;
        if (scale_vectors)
            for (double& v : t.vector) v *= w_sem;
        t.cell = s.cell;
        t.cluster_id = s.cluster_id;
        t.stream = Stream::semantic;
        t.weight = w_sem;
        out.tokens.push_back(std::move(t));
    }
    for (const auto& g : geo.geo_tokens) {
        FusedToken t;
        t.vector = g.vector;
        if (scale_vectors)
            for (double& v : t.vector) v *= w_geo;
        t.cell = g.cell;
        t.stream = Stream::geometric;
        t.weight = w_geo;
        t.is_anchor = g.is_anchor;
        out.tokens.push_back(std::move(t));
    }
    if (!out.tokens.empty()) out.dim = static_cast<int>(out.tokens.front().vector.size());
    return out;
}

enum class UnrollMode { topological, index_reorder };

[[nodiscard]] inline UnrollMode parse_unroll_mode(std::string_view s) {
    if (s == "topological") return UnrollMode::topological;
    if (s == "index_reorder" || s == "index-reorder") return UnrollMode::index_reorder;
    throw ConfigError("unknown unroll mode '" + std::string(s) + "' (expected topological or index_reorder)");
}

[[nodiscard]] inline std::string_view to_string(UnrollMode m) noexcept {
    return m == UnrollMode::topological ? "topological" : "index_reorder";
}

// topological keeps trace order; index_reorder sorts the geometric block by
// raster index. The semantic block is untouched either way.
[[nodiscard]] inline CompressedSequence unroll(CompressedSequence seq, UnrollMode mode) {
    if (mode == UnrollMode::topological) return seq;
    auto first_geo = std::find_if(seq.tokens.begin(), seq.tokens.end(),
                                  [](const FusedToken& t) { return t.stream == Stream::geometric; });
    std::stable_sort(first_geo, seq.tokens.end(),
                     [](const FusedToken& a, const FusedToken& b) { return *a.cell < *b.cell; });
    return seq;
}

}  // namespace dualcomp::fusion
