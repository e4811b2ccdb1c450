// Dense patch-token grid: the unit every compression stage operates on.
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dualcomp/common.hpp"

namespace dualcomp {

// H x W patch tokens with D-dimensional features stored row-major as f32.
// Attention and text-similarity maps are kept in f64 since they feed sums.
struct FeatureGrid {
    int height = 0;
    int width = 0;
    int dim = 0;
    std::vector<float> features;                 // H*W*D
    std::optional<std::vector<double>> cls_attn;  // H*W, nonnegative, sums to 1
    std::optional<std::vector<double>> text_sim;  // H*W
    // Alternative attention source: CLS query and per-cell keys.
    std::optional<std::vector<float>> q_cls;  // D
    std::optional<std::vector<float>> keys;   // H*W*D

    FeatureGrid() = default;
    FeatureGrid(int h, int w, int d)
        : height(h), width(w), dim(d),
          features(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(d), 0.0f) {}

    [[nodiscard]] Shape2 shape() const noexcept { return {height, width}; }
    [[nodiscard]] std::size_t cells() const noexcept { return shape().cells(); }

    [[nodiscard]] std::span<const float> feature(std::size_t i) const noexcept {
        return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    [[nodiscard]] std::span<float> feature(std::size_t i) noexcept {
        return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    [[nodiscard]] std::span<const float> feature(Cell c) const noexcept { return feature(shape().index(c)); }
    [[nodiscard]] std::span<float> feature(Cell c) noexcept { return feature(shape().index(c)); }

    friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

inline constexpr double kAttentionSumTolerance = 1e-5;

// Throws InvalidInput when the grid breaks a structural or numeric invariant.
inline void validate(const FeatureGrid& g) {
    if (g.height <= 0 || g.width <= 0) throw InvalidInput("feature grid is empty");
    if (g.dim <= 0) throw InvalidInput("feature grid has zero feature dimension");
    const std::size_t n = g.cells();
    if (g.features.size() != n * static_cast<std::size_t>(g.dim))
        throw InvalidInput("feature payload size does not match H*W*D");
    if (!all_finite(std::span<const float>(g.features))) throw InvalidInput("feature grid contains non-finite values");
    if (g.cls_attn) {
        const auto& a = *g.cls_attn;
        if (a.size() != n) throw InvalidInput("cls_attn size does not match H*W");
        double sum = 0.0;
        for (double v : a) {
            if (!std::isfinite(v) || v < 0.0) throw InvalidInput("cls_attn must be finite and nonnegative");
            sum += v;
        }
        if (std::abs(sum - 1.0) >= kAttentionSumTolerance)
            throw InvalidInput("cls_attn does not sum to 1 (sum=" + std::to_string(sum) + ")");
    }
    if (g.text_sim) {
        if (g.text_sim->size() != n) throw InvalidInput("text_sim size does not match H*W");
        if (!all_finite(std::span<const double>(*g.text_sim))) throw InvalidInput("text_sim contains non-finite values");
    }
    if (g.q_cls.has_value() != g.keys.has_value()) throw InvalidInput("q_cls and keys must be provided together");
    if (g.q_cls) {
        if (g.q_cls->size() != static_cast<std::size_t>(g.dim)) throw InvalidInput("q_cls dimension does not match D");
        if (g.keys->size() != g.features.size()) throw InvalidInput("keys payload size does not match H*W*D");
        if (!all_finite(std::span<const float>(*g.q_cls)) || !all_finite(std::span<const float>(*g.keys)))
            throw InvalidInput("q_cls/keys contain non-finite values");
    }
    if (g.cls_attn && g.q_cls) throw InvalidInput("cls_attn and q_cls/keys are mutually exclusive attention sources");
}

}  // namespace dualcomp
