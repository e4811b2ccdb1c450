// End-to-end compression of one grid: policy -> budget -> semantic stream ->
// geometric stream -> fusion -> unrolling. Also hosts the ablation variants.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualcomp/fusion.hpp"
#include "dualcomp/grid.hpp"
#include "dualcomp/igsr.hpp"
#include "dualcomp/router.hpp"
#include "dualcomp/scsa.hpp"

namespace dualcomp {

struct PipelineConfig {
    scsa::ScsaConfig scsa;
    igsr::IgsrConfig igsr;
    double rho_min = kDefaultRhoMin;
    bool scale_vectors = true;
    fusion::UnrollMode unroll = fusion::UnrollMode::topological;
    unsigned workers = 1;
};

inline void validate(const PipelineConfig& c) {
    scsa::validate(c.scsa);
    igsr::validate(c.igsr);
    if (!(c.rho_min > 0.0 && c.rho_min <= 1.0)) throw ConfigError("rho_min must lie in (0,1]");
}

enum class Variant { full, scsa_only, igsr_only, top_k, tasm_off, index_reorder };

inline constexpr std::array<Variant, 6> kAllVariants{Variant::full,  Variant::scsa_only, Variant::igsr_only,
                                                     Variant::top_k, Variant::tasm_off,  Variant::index_reorder};

[[nodiscard]] inline std::string_view to_string(Variant v) noexcept {
    switch (v) {
        case Variant::full: return "full";
        case Variant::scsa_only: return "scsa_only";
        case Variant::igsr_only: return "igsr_only";
        case Variant::top_k: return "top_k";
        case Variant::tasm_off: return "tasm_off";
        case Variant::index_reorder: return "index_reorder";
    }
    return "full";
}

[[nodiscard]] inline Variant parse_variant(std::string_view s) {
    for (Variant v : kAllVariants)
        if (to_string(v) == s) return v;
    throw ConfigError("unknown variant '" + std::string(s) + "'");
}

struct PipelineResult {
    TaskPolicy policy;
    TokenBudget budget;
    bool router_invoked = false;
    std::optional<scsa::ClusterSet> clusters;
    scsa::SemanticTokens semantic;
    std::optional<igsr::StructField> field;
    igsr::AnchorSet anchors;
    igsr::TracedPaths traced;
    fusion::CompressedSequence sequence;

    // Retention budget n_keep; the emitted sequence can be shorter (fusion
    // dedup, fewer clusters than n_sem, shorter traced paths).
    [[nodiscard]] std::size_t tokens_kept() const noexcept { return static_cast<std::size_t>(budget.n_keep); }
    [[nodiscard]] std::size_t tokens_emitted() const noexcept { return sequence.tokens.size(); }
    // n_max / n_keep
    [[nodiscard]] double compression_ratio() const noexcept {
        return static_cast<double>(budget.n_max) / static_cast<double>(budget.n_keep);
    }
};

// Runs the executors for an explicit policy. `text_embedding`, when given and
// the grid carries no text_sim map, supplies the text relevance signal.
[[nodiscard]] inline PipelineResult compress(const FeatureGrid& grid, const TaskPolicy& policy, const PipelineConfig& cfg,
                                             Variant variant = Variant::full,
                                             std::optional<std::span<const float>> text_embedding = std::nullopt) {
    validate(grid);
    validate(cfg);
    validate(policy, cfg.rho_min);

    PipelineResult res;
    res.policy = policy;
    res.budget = allocate_budget(policy, static_cast<std::int64_t>(grid.cells()));
    TokenBudget work = res.budget;
    double fuse_lambda = policy.lambda;
    if (variant == Variant::scsa_only) {
        work.n_sem = work.n_keep;
        work.n_geo = 0;
        fuse_lambda = 0.0;
    } else if (variant == Variant::igsr_only) {
        work.n_sem = 0;
        work.n_geo = work.n_keep;
        fuse_lambda = 1.0;
    }

    if (work.n_sem > 0) {
        const auto attn = scsa::attention_of(grid);
        auto clusters = scsa::cluster_grid(grid, scsa::tau_of_lambda(policy.lambda, cfg.scsa));
        scsa::score_clusters(clusters, attn);
        res.semantic = scsa::represent_clusters(grid, clusters, attn, work.n_sem,
                                                scsa::theta_of_lambda(policy.lambda, cfg.scsa), cfg.workers);
        res.clusters = std::move(clusters);
    }

    if (work.n_geo > 0) {
        std::optional<std::vector<double>> s_text;
        if (variant != Variant::tasm_off) {
            if (grid.text_sim) s_text = *grid.text_sim;
            else if (text_embedding) s_text = igsr::text_relevance(grid, *text_embedding);
        }
        res.field = igsr::build_struct_field(grid.shape(), igsr::local_difference_saliency(grid), std::move(s_text),
                                             cfg.igsr.beta);
        if (variant == Variant::top_k) {
            res.traced = igsr::top_k_selection(grid, *res.field, work.n_geo);
        } else {
            res.anchors = igsr::extract_anchors(*res.field, igsr::k_target_for(work.n_geo, grid.cells(), cfg.igsr));
            res.traced = igsr::complete_topology(grid, *res.field, res.anchors, work.n_geo, cfg.igsr, cfg.workers);
        }
    }

    auto seq = fusion::fuse(res.semantic, res.traced, fuse_lambda, cfg.scale_vectors);
    seq.lambda_used = policy.lambda;
    seq.rho_used = policy.rho;
    seq.n_max = res.budget.n_max;
    seq.dim = grid.dim;
    const auto mode = variant == Variant::index_reorder ? fusion::UnrollMode::index_reorder : cfg.unroll;
    res.sequence = fusion::unroll(std::move(seq), mode);
    return res;
}

// Router-driven variant: predicts the policy from the instruction first.
[[nodiscard]] inline PipelineResult compress(const FeatureGrid& grid, const RouterModel& router,
                                             const InstructionRepr& instruction, PipelineConfig cfg,
                                             std::optional<std::span<const float>> text_embedding = std::nullopt) {
    cfg.rho_min = std::min(cfg.rho_min, router.rho_min);
    const TaskPolicy policy = router_forward(router, instruction);
    auto res = compress(grid, policy, cfg, Variant::full, text_embedding);
    res.router_invoked = true;
    return res;
}

}  // namespace dualcomp
