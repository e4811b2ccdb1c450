// Duality sweep and ablation matrix over synthetic scenes, with CSV output.
#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <map>
#include <utility>
#include <ostream>
#include <string>
#include <vector>

#include "dualcomp/pipeline.hpp"
#include "dualcomp/scene.hpp"

namespace dualcomp::bench {

struct RunRow {
    std::uint64_t scene_seed = 0;
    scene::TaskKind task_kind = scene::TaskKind::balanced;
    Variant variant = Variant::full;
    double rho = 1.0;
    double lambda = 0.5;
    scene::FidelityReport report;
};

struct LambdaTable {
    double semantic = 0.1;
    double balanced = 0.5;
    double geometric = 0.9;

    [[nodiscard]] double of(scene::TaskKind k) const noexcept {
        switch (k) {
            case scene::TaskKind::semantic: return semantic;
            case scene::TaskKind::geometric: return geometric;
            case scene::TaskKind::balanced: return balanced;
        }
        return balanced;
    }
};

[[nodiscard]] inline RunRow run_one(const scene::Scene& sc, std::uint64_t seed, double rho, double lambda, Variant v,
                                    const PipelineConfig& cfg, const scene::CostModel& cost) {
    const auto res = compress(sc.grid, TaskPolicy{lambda, rho}, cfg, v);
    RunRow row;
    row.scene_seed = seed;
    row.task_kind = sc.truth.task_kind;
    row.variant = v;
    row.rho = rho;
    row.lambda = lambda;
    row.report = scene::evaluate(res.sequence, res.clusters ? &*res.clusters : nullptr, sc.truth, res.budget, cost);
    return row;
}

struct SweepConfig {
    scene::SceneSpec base;
    std::vector<std::uint64_t> seeds;
    std::vector<scene::TaskKind> kinds{scene::TaskKind::semantic, scene::TaskKind::balanced, scene::TaskKind::geometric};
    std::vector<double> rhos{1.0, 0.5, 0.1, 0.04, 0.02, 0.01};
    LambdaTable lambdas;
    PipelineConfig pipeline;
    scene::CostModel cost;
    unsigned workers = 1;
};

// Full pipeline per (scene seed, task kind, rho). A rho of 1 is the
// uncompressed reference row. Rows ordered by seed, kind, then rho as listed.
[[nodiscard]] inline std::vector<RunRow> duality_sweep(const SweepConfig& cfg) {
    for (std::size_t k = 1; k < cfg.rhos.size(); ++k)
        if (cfg.rhos[k] > cfg.rhos[k - 1]) throw ConfigError("rho list must be sorted in descending order");
    const std::size_t jobs = cfg.seeds.size() * cfg.kinds.size();
    std::vector<std::vector<RunRow>> slots(jobs);
    PipelineConfig inner = cfg.pipeline;
    inner.workers = 1;
    parallel_for(jobs, cfg.workers, [&](std::size_t j) {
        const std::uint64_t seed = cfg.seeds[j / cfg.kinds.size()];
        scene::SceneSpec spec = cfg.base;
        spec.seed = seed;
        spec.task_kind = cfg.kinds[j % cfg.kinds.size()];
        const auto sc = scene::generate_scene(spec);
        const double lambda = cfg.lambdas.of(spec.task_kind);
        for (double rho : cfg.rhos) {
            if (rho >= 1.0) {
                RunRow row{seed, spec.task_kind, Variant::full, rho, lambda, scene::evaluate_identity(sc.truth, cfg.cost)};
                slots[j].push_back(std::move(row));
                continue;
            }
            slots[j].push_back(run_one(sc, seed, rho, lambda, Variant::full, inner, cfg.cost));
        }
    });
    std::vector<RunRow> rows;
    for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
    return rows;
}

struct AblationConfig {
    scene::SceneSpec base;
    std::vector<std::uint64_t> seeds;
    double rho = 0.05;
    double lambda = 0.9;
    std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
    PipelineConfig pipeline;
    scene::CostModel cost;
    unsigned workers = 1;
};

// One row per (variant, scene). Rows are grouped in variant blocks.
[[nodiscard]] inline std::vector<RunRow> ablation_matrix(const AblationConfig& cfg) {
    std::vector<std::vector<RunRow>> per_seed(cfg.seeds.size());
    PipelineConfig inner = cfg.pipeline;
    inner.workers = 1;
    parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t j) {
        scene::SceneSpec spec = cfg.base;
        spec.seed = cfg.seeds[j];
        const auto sc = scene::generate_scene(spec);
        for (Variant v : cfg.variants) per_seed[j].push_back(run_one(sc, spec.seed, cfg.rho, cfg.lambda, v, inner, cfg.cost));
    });
    std::vector<RunRow> rows;
    for (std::size_t v = 0; v < cfg.variants.size(); ++v)
        for (const auto& s : per_seed) rows.push_back(s[v]);
    return rows;
}

inline constexpr const char* kCsvHeader =
    "scene_seed,task_kind,variant,rho,lambda,tokens_kept,tokens_emitted,compression_ratio,object_preservation,path_recall,"
    "path_connected_frac,flops_proxy,vacuous";

// Shortest round-trip representation, so CSVs reproduce byte for byte.
[[nodiscard]] inline std::string fmt_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline void write_csv_row(std::ostream& out, const RunRow& r) {
    std::string vac;
    if (r.report.objects_vacuous) vac += "objects";
    if (r.report.roads_vacuous) vac += vac.empty() ? "roads" : "|roads";
    out << r.scene_seed << ',' << scene::to_string(r.task_kind) << ',' << to_string(r.variant) << ','
        << fmt_double(r.rho) << ',' << fmt_double(r.lambda) << ',' << r.report.tokens_kept << ',' << r.report.tokens_emitted << ','
        << fmt_double(r.report.compression_ratio) << ',' << fmt_double(r.report.object_preservation) << ','
        << fmt_double(r.report.path_recall) << ',' << fmt_double(r.report.path_connected_frac()) << ','
        << fmt_double(r.report.flops_proxy) << ',' << (vac.empty() ? "none" : vac) << '\n';
}

inline void write_csv(std::ostream& out, const std::vector<RunRow>& rows) {
    out << kCsvHeader << '\n';
    for (const auto& r : rows) write_csv_row(out, r);
}

struct VariantSummary {
    std::size_t runs = 0;
    double mean_object_preservation = 0.0;
    double mean_path_recall = 0.0;
    double mean_connected = 0.0;
    double mean_tokens = 0.0;
};

[[nodiscard]] inline std::map<std::string, VariantSummary> summarize_by_variant(const std::vector<RunRow>& rows) {
    std::map<std::string, VariantSummary> out;
    for (const auto& r : rows) {
        auto& s = out[std::string(to_string(r.variant))];
        ++s.runs;
        s.mean_object_preservation += r.report.object_preservation;
        s.mean_path_recall += r.report.path_recall;
        s.mean_connected += r.report.path_connected_frac();
        s.mean_tokens += static_cast<double>(r.report.tokens_emitted);
    }
    for (auto& [_, s] : out) {
        const double n = static_cast<double>(std::max<std::size_t>(s.runs, 1));
        s.mean_object_preservation /= n;
        s.mean_path_recall /= n;
        s.mean_connected /= n;
        s.mean_tokens /= n;
    }
    return out;
}

}  // namespace dualcomp::bench
