#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <random>

#include "support.hpp"

using namespace dualcomp;
using namespace dualcomp::scene;

namespace {

double ref_object_preservation(const fusion::CompressedSequence& seq, const scsa::ClusterSet* cs, const GroundTruth& t) {
    std::size_t total = 0, hit = 0;
    for (std::size_t i = 0; i < t.object_mask.size(); ++i) {
        if (!t.object_mask[i]) continue;
        ++total;
        const Cell c{static_cast<int>(i) / t.shape.width, static_cast<int>(i) % t.shape.width};
        bool kept = false;
        for (const auto& tok : seq.tokens) {
            if (tok.cell && *tok.cell == c) kept = true;
            if (tok.stream == fusion::Stream::semantic && cs && tok.cluster_id >= 0) {
                const auto& m = cs->clusters[static_cast<std::size_t>(tok.cluster_id)].members;
                if (std::find(m.begin(), m.end(), i) != m.end()) kept = true;
            }
        }
        hit += kept;
    }
    return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

// Per-cell scan for recall; BFS over tokens for connectivity.
PathRecall ref_path_recall(const fusion::CompressedSequence& seq, const GroundTruth& t, int radius) {
    std::vector<Cell> geo;
    for (const auto& tok : seq.tokens)
        if (tok.stream == fusion::Stream::geometric) geo.push_back(*tok.cell);
    PathRecall out;
    std::size_t total = 0, hit = 0;
    for (std::size_t i = 0; i < t.shape.cells(); ++i) {
        bool road = false;
        for (const auto& m : t.road_masks) road = road || m[i];
        if (!road) continue;
        ++total;
        const Cell c = t.shape.cell(i);
        hit += std::any_of(geo.begin(), geo.end(), [&](Cell g) { return chebyshev(g, c) <= radius; });
    }
    out.vacuous = total == 0;
    out.recall = total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
    for (const auto& m : t.road_masks) {
        std::vector<Cell> near;
        for (Cell g : geo)
            for (std::size_t i = 0; i < t.shape.cells(); ++i)
                if (m[i] && chebyshev(g, t.shape.cell(i)) <= radius) {
                    near.push_back(g);
                    break;
                }
        if (near.empty()) {
            out.connected.push_back(false);
            continue;
        }
        std::vector<char> seen(near.size(), 0);
        std::deque<std::size_t> q{0};
        seen[0] = 1;
        while (!q.empty()) {
            const auto x = q.front();
            q.pop_front();
            for (std::size_t y = 0; y < near.size(); ++y)
                if (!seen[y] && chebyshev(near[x], near[y]) == 1) {
                    seen[y] = 1;
                    q.push_back(y);
                }
        }
        out.connected.push_back(std::all_of(seen.begin(), seen.end(), [](char s) { return s != 0; }));
    }
    return out;
}

SceneSpec small_spec(std::uint64_t seed) {
    SceneSpec s;
    s.height = 16;
    s.width = 16;
    s.dim = 16;
    s.n_objects = 3;
    s.n_roads = 1;
    s.road_waypoints = 3;
    s.n_clutter = 2;
    s.clutter_size_max = 4;
    s.seed = seed;
    s.task_kind = TaskKind::geometric;
    return s;
}

}  // namespace

TEST(Rng, CounterBasedAndSeeded) {
    CounterRng a(5), b(5), c(6);
    for (int k = 0; k < 100; ++k) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        EXPECT_NE(x, c.next());
    }
    CounterRng u(1);
    for (int k = 0; k < 1000; ++k) {
        const double v = u.uniform();
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
        const int i = u.uniform_int(-3, 4);
        ASSERT_GE(i, -3);
        ASSERT_LE(i, 4);
    }
}

TEST(Scene, DeterministicPerSeed) {
    SceneSpec s;
    s.seed = 7;
    const auto a = generate_scene(s), b = generate_scene(s);
    EXPECT_EQ(a.grid, b.grid);
    EXPECT_EQ(a.truth.object_mask, b.truth.object_mask);
    EXPECT_EQ(a.truth.road_masks, b.truth.road_masks);
    s.seed = 8;
    EXPECT_NE(generate_scene(s).grid, a.grid);
}

TEST(Scene, EmptySceneHasNearUniformAttention) {
    SceneSpec s;
    s.n_objects = 0;
    s.n_roads = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        s.seed = seed;
        const auto sc = generate_scene(s);
        const auto [lo, hi] = std::minmax_element(sc.grid.cls_attn->begin(), sc.grid.cls_attn->end());
        EXPECT_LT(*hi / *lo, 1.5);
        EXPECT_EQ(sc.truth.object_cells(), 0u);
    }
}

TEST(Scene, SingleRoadIsEightConnected) {
    SceneSpec s;
    s.n_objects = 0;
    s.n_roads = 1;
    s.road_waypoints = 3;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        s.seed = seed;
        const auto sc = generate_scene(s);
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < sc.truth.road_masks[0].size(); ++i)
            if (sc.truth.road_masks[0][i]) members.push_back(i);
        ASSERT_FALSE(members.empty());
        ASSERT_TRUE(testsupport::eight_connected(members, s.width));
    }
}

TEST(Scene, TruthFeaturesAreNearlyOrthogonalAndValid) {
    SceneSpec s;
    for (TaskKind k : {TaskKind::semantic, TaskKind::geometric, TaskKind::balanced}) {
        s.task_kind = k;
        const auto sc = generate_scene(s);
        const auto& t = sc.truth;
        EXPECT_LT(std::abs(cosine(std::span<const double>(t.object_feature), std::span<const double>(t.road_feature))), 0.3);
        EXPECT_LT(std::abs(cosine(std::span<const double>(t.object_feature), std::span<const double>(t.background_feature))), 0.3);
        EXPECT_LT(std::abs(cosine(std::span<const double>(t.road_feature), std::span<const double>(t.background_feature))), 0.3);
        EXPECT_NO_THROW(validate(sc.grid));
        for (std::size_t i = 0; i < t.object_mask.size(); ++i)
            for (const auto& m : t.road_masks) ASSERT_FALSE(t.object_mask[i] && m[i]);
    }
}

TEST(Scene, BresenhamIsEightConnectedAndInclusive) {
    const auto line = bresenham({0, 0}, {3, 7});
    EXPECT_EQ(line.front(), (Cell{0, 0}));
    EXPECT_EQ(line.back(), (Cell{3, 7}));
    for (std::size_t k = 1; k < line.size(); ++k) EXPECT_EQ(chebyshev(line[k - 1], line[k]), 1);
}

TEST(Scene, InvalidSpecRejected) {
    SceneSpec s;
    s.height = 3;
    s.width = 3;
    EXPECT_THROW((void)generate_scene(s), ConfigError);
}

TEST(Metrics, VacuousAndEmptyCases) {
    SceneSpec s = small_spec(1);
    s.n_objects = 0;
    const auto sc = generate_scene(s);
    fusion::CompressedSequence empty;
    EXPECT_EQ(object_preservation(empty, nullptr, sc.truth), 1.0);
    EXPECT_EQ(path_recall(empty, sc.truth).recall, 0.0);
}

TEST(Metrics, FullRetentionOfRoadCells) {
    const auto sc = generate_scene(small_spec(2));
    fusion::CompressedSequence seq;
    for (std::size_t i = 0; i < sc.truth.shape.cells(); ++i)
        if (sc.truth.road_masks[0][i]) {
            fusion::FusedToken t;
            t.cell = sc.truth.shape.cell(i);
            t.stream = fusion::Stream::geometric;
            seq.tokens.push_back(t);
        }
    const auto pr = path_recall(seq, sc.truth);
    EXPECT_EQ(pr.recall, 1.0);
    EXPECT_TRUE(pr.connected[0]);
}

TEST(Metrics, MatchBruteForceOracles) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 60; ++k) {
        const auto sc = generate_scene(small_spec(static_cast<std::uint64_t>(k)));
        const TaskPolicy p{u(rng), 0.02 + 0.5 * u(rng)};
        const auto res = compress(sc.grid, p, PipelineConfig{});
        const auto* cs = res.clusters ? &*res.clusters : nullptr;
        ASSERT_DOUBLE_EQ(object_preservation(res.sequence, cs, sc.truth), ref_object_preservation(res.sequence, cs, sc.truth));
        for (int radius : {0, 1, 2}) {
            const auto a = path_recall(res.sequence, sc.truth, radius);
            const auto b = ref_path_recall(res.sequence, sc.truth, radius);
            ASSERT_DOUBLE_EQ(a.recall, b.recall);
            ASSERT_EQ(a.connected, b.connected);
        }
    }
}

TEST(Metrics, MonotoneInNestedBudgets) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto sc = generate_scene(small_spec(seed));
        const auto g = sc.grid;
        auto cs = scsa::cluster_grid(g, 0.8);
        scsa::score_clusters(cs, *g.cls_attn);
        const auto field = igsr::build_struct_field(g.shape(), igsr::local_difference_saliency(g), g.text_sim, 1.0);
        double prev_obj = -1.0, prev_road = -1.0;
        for (std::int64_t n = 1; n <= 64; n *= 2) {
            const auto sem = scsa::represent_clusters(g, cs, *g.cls_attn, n, 3);
            const auto obj = object_preservation(fusion::fuse(sem, {}, 0.0), &cs, sc.truth);
            ASSERT_GE(obj, prev_obj);
            prev_obj = obj;
            const auto geo = igsr::top_k_selection(g, field, n);
            const auto road = path_recall(fusion::fuse({}, geo, 1.0), sc.truth).recall;
            ASSERT_GE(road, prev_road);
            prev_road = road;
        }
    }
}

TEST(Flops, ProxyShape) {
    EXPECT_EQ(flops_proxy(0.0), 0.0);
    EXPECT_DOUBLE_EQ(flops_proxy(200.0, 3.0, 0.0), 2.0 * flops_proxy(100.0, 3.0, 0.0));
    const CostModel m;
    EXPECT_GT(flops_proxy(13800.0, m) / flops_proxy(6400.0, m), 1.0);
}

TEST(Corpus, ClassesAndHeldOutVocabulary) {
    const auto train = instruction_corpus(50, 1);
    const auto held = instruction_corpus(50, 1, true);
    EXPECT_EQ(std::count_if(train.begin(), train.end(), [](const auto& e) { return e.kind == TaskKind::geometric; }), 20);
    EXPECT_EQ(std::count_if(train.begin(), train.end(), [](const auto& e) { return e.kind == TaskKind::semantic; }), 20);
    for (const auto& e : held) EXPECT_EQ(e.text.find("harbor"), std::string::npos);
    const auto a = embed_instruction("Plan a route", 32), b = embed_instruction("plan A ROUTE", 32);
    EXPECT_EQ(a.embedding, b.embedding);
}
