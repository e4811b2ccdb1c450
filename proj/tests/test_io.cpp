#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "support.hpp"

using namespace dualcomp;
using testsupport::random_grid;

namespace {

// Maps are stored as f32 on disk.
FeatureGrid f32_maps(FeatureGrid g) {
    for (auto* m : {&g.cls_attn, &g.text_sim})
        if (*m)
            for (double& v : **m) v = static_cast<float>(v);
    return g;
}

std::string error_of(std::string_view data) {
    try {
        (void)io::decode_grid(data);
    } catch (const FormatError& e) {
        return e.what();
    }
    return {};
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("dualcomp_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST(GridFile, RoundTripIsBitwise) {
    auto g = f32_maps(random_grid(24, 24, 64, 1));
    EXPECT_EQ(io::decode_grid(io::encode_grid(g)), g);
    const auto dir = temp_dir("grid");
    io::write_grid(g, dir / "g.fgrd");
    EXPECT_EQ(io::read_grid(dir / "g.fgrd"), g);
    EXPECT_FALSE(std::filesystem::exists(dir / "g.fgrd.tmp"));
}

TEST(GridFile, FuzzedRoundTrips) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> side(1, 12), dim(1, 9), opt(0, 3);
    for (int k = 0; k < 100; ++k) {
        auto g = random_grid(side(rng), side(rng), dim(rng), static_cast<std::uint64_t>(k));
        const int o = opt(rng);
        if (o & 1) {
            g.text_sim = std::vector<double>(g.cells());
            for (double& v : *g.text_sim) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
        }
        if (o & 2) {
            g.cls_attn.reset();
            g.q_cls = std::vector<float>(static_cast<std::size_t>(g.dim), 0.5f);
            g.keys = g.features;
        }
        g = f32_maps(g);
        ASSERT_EQ(io::decode_grid(io::encode_grid(g)), g);
    }
}

TEST(GridFile, TruncationNamesSizes) {
    const auto g = f32_maps(random_grid(4, 4, 3, 2));
    const auto data = io::encode_grid(g);
    const auto msg = error_of(std::string_view(data).substr(0, data.size() - 4));
    EXPECT_NE(msg.find("expected " + std::to_string(data.size() - 20) + " bytes"), std::string::npos) << msg;
    EXPECT_NE(msg.find("got " + std::to_string(data.size() - 24)), std::string::npos) << msg;
    EXPECT_NE(error_of(std::string_view(data).substr(0, 10)).find("truncated"), std::string::npos);
}

TEST(GridFile, BadMagicAndFlagsRejected) {
    const auto g = f32_maps(random_grid(4, 4, 3, 2));
    auto data = io::encode_grid(g);
    auto bad = data;
    bad[0] = 'X';
    EXPECT_NE(error_of(bad).find("bad magic"), std::string::npos);
    bad = data;
    bad[6] = static_cast<char>(io::kGridHasAttn | io::kGridHasQK);
    EXPECT_NE(error_of(bad).find("both"), std::string::npos);
    bad = data;
    bad[4] = 9;
    EXPECT_NE(error_of(bad).find("version"), std::string::npos);
}

TEST(SequenceFile, RoundTrip) {
    const auto g = random_grid(12, 12, 8, 3);
    const auto res = compress(g, {0.5, 0.2}, PipelineConfig{});
    auto seq = res.sequence;
    for (auto& t : seq.tokens)
        for (double& v : t.vector) v = static_cast<float>(v);
    const auto back = io::decode_sequence(io::encode_sequence(seq, true));
    EXPECT_EQ(back, seq);
    auto data = io::encode_sequence(seq, true);
    data.pop_back();
    EXPECT_THROW((void)io::decode_sequence(data), FormatError);
}

TEST(ModelFile, RoundTripAndCorruption) {
    const auto m = init_router({16, 8, 4}, 0.01, 3);
    EXPECT_EQ(io::decode_model(io::encode_model(m)), m);
    const auto dir = temp_dir("model");
    io::write_model(m, dir / "r.dcrt");
    EXPECT_EQ(io::read_model(dir / "r.dcrt"), m);
    auto data = io::encode_model(m);
    data.resize(data.size() - 8);
    EXPECT_THROW((void)io::decode_model(data), FormatError);
    EXPECT_THROW((void)io::read_model(dir / "missing.dcrt"), Error);
}

TEST(LabelFile, RoundTripAndErrors) {
    const auto labels = scene::label_corpus(scene::instruction_corpus(20, 1), default_lexicon(), {}, 0.5, 0.01);
    std::istringstream in(io::format_labels(labels));
    const auto back = io::parse_labels(in, 0.5, 0.01);
    ASSERT_EQ(back.size(), labels.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
        EXPECT_EQ(back[k].text, labels[k].text);
        EXPECT_EQ(back[k].lambda_gt, labels[k].lambda_gt);
        EXPECT_EQ(back[k].rho_gt, labels[k].rho_gt);
    }
    std::istringstream with_llm(R"({"text":"a","lambda_llm":0.8,"lambda_rule":0.4,"rho_gt":0.1})");
    EXPECT_NEAR(io::parse_labels(with_llm, 0.5, 0.01).at(0).lambda_gt, 0.6, 1e-12);
    std::istringstream broken("{\"text\":\"a\"}\n");
    EXPECT_THROW((void)io::parse_labels(broken, 0.5, 0.01), FormatError);
    std::istringstream bad_rho(R"({"text":"a","lambda_rule":0.4,"rho_gt":0.001})");
    EXPECT_THROW((void)io::parse_labels(bad_rho, 0.5, 0.01), FormatError);
}

TEST(Config, ParseFormatRoundTrip) {
    std::istringstream in("# run\nscsa.tau_min = 0.7\nigsr.beta=2 # trailing\nfusion.unroll = index_reorder\n"
                          "fusion.scale_vectors = false\nrouter.hidden1 = 64\n");
    const auto c = parse_config(in);
    EXPECT_EQ(c.pipeline.scsa.tau_min, 0.7);
    EXPECT_EQ(c.pipeline.igsr.beta, 2.0);
    EXPECT_EQ(c.pipeline.unroll, fusion::UnrollMode::index_reorder);
    EXPECT_FALSE(c.pipeline.scale_vectors);
    EXPECT_EQ(c.router_dims.hidden1, 64);
    std::istringstream again(format_config(c));
    EXPECT_EQ(format_config(parse_config(again)), format_config(c));
}

TEST(Config, ErrorsNameTheLine) {
    std::istringstream unknown("\nfoo.bar = 1\n");
    try {
        (void)parse_config(unknown, "run.cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos);
    }
    std::istringstream nan_value("igsr.beta = lots\n");
    EXPECT_THROW((void)parse_config(nan_value), ConfigError);
    std::istringstream no_eq("igsr.beta 2\n");
    EXPECT_THROW((void)parse_config(no_eq), ConfigError);
    std::istringstream bad_range("scsa.tau_min = 0.99\nscsa.tau_max = 0.5\n");
    EXPECT_THROW((void)parse_config(bad_range), ConfigError);
}
