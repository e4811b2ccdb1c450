#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "support.hpp"

using namespace dualcomp;

using testsupport::numeric_grad;
using testsupport::random_input;
using testsupport::small_model;

TEST(Budget, Examples) {
    EXPECT_EQ(allocate_budget({0.0, 0.5}, 576), (TokenBudget{576, 288, 288, 0}));
    EXPECT_EQ(allocate_budget({1.0, 1.0}, 100), (TokenBudget{100, 100, 0, 100}));
    EXPECT_EQ(allocate_budget({0.4, 0.1}, 576), (TokenBudget{576, 58, 35, 23}));
}

TEST(Budget, FuzzedSumsAndClamp) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<std::int64_t> n(1, 20000);
    for (int k = 0; k < 1000; ++k) {
        const double lambda = u(rng);
        const double rho = 0.01 + 0.99 * u(rng);
        const auto n_max = n(rng);
        const auto b = allocate_budget({lambda, rho}, n_max);
        const auto expect = std::clamp<std::int64_t>(std::llround(static_cast<double>(n_max) * rho), 1, n_max);
        ASSERT_EQ(b.n_keep, expect);
        ASSERT_EQ(b.n_sem + b.n_geo, b.n_keep);
        ASSERT_GE(b.n_sem, 0);
        ASSERT_GE(b.n_geo, 0);
    }
}

TEST(Budget, RejectsEmptyGrid) { EXPECT_THROW((void)allocate_budget({0.5, 0.5}, 0), InvalidInput); }

TEST(Router, DefaultDimensionsAreAboutOneMillionParameters) {
    RouterModel m;
    EXPECT_EQ(m.param_count(), 768u * 1024 + 1024 + 1024u * 256 + 256 + 2u * (256 + 1));
    EXPECT_NEAR(static_cast<double>(m.param_count()), 1.0e6, 0.1e6);
}

TEST(Router, ZeroModelGivesMidpoints) {
    RouterModel m({16, 8, 4}, 0.01);
    const auto p = router_forward(m, random_input(16, 1));
    EXPECT_DOUBLE_EQ(p.lambda, 0.5);
    EXPECT_DOUBLE_EQ(p.rho, 0.01 + 0.5 * 0.99);
}

TEST(Router, DimensionMismatchIsConfigError) {
    RouterModel m({16, 8, 4}, 0.01);
    EXPECT_THROW((void)router_forward(m, random_input(15, 1)), ConfigError);
}

TEST(Router, ExtremeWeightsStayInBounds) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> mag(-300.0, 300.0);
    for (int s = 0; s < 50; ++s) {
        auto m = init_router({8, 6, 4}, 0.05, static_cast<std::uint64_t>(s));
        const double scale = std::pow(10.0, s % 8);
        m.for_each_layer([&](DenseLayer& l) {
            for (double& w : l.weights) w *= scale;
            for (double& b : l.bias) b = mag(rng) * scale;
        });
        InstructionRepr x = random_input(8, 100 + s);
        for (double& v : x.embedding) v *= 1e6;
        const auto p = router_forward(m, x);
        ASSERT_TRUE(std::isfinite(p.lambda) && std::isfinite(p.rho));
        ASSERT_GE(p.lambda, 0.0);
        ASSERT_LE(p.lambda, 1.0);
        ASSERT_GE(p.rho, 0.05);
        ASSERT_LE(p.rho, 1.0);
    }
}

TEST(Router, NonFiniteInputRejected) {
    RouterModel m({4, 4, 4}, 0.01);
    InstructionRepr x;
    x.embedding = {0.0, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
    EXPECT_THROW((void)router_forward(m, x), InvalidInput);
}

TEST(RouterGradients, MatchFiniteDifferencesOnTwentyModels) { EXPECT_LT(testsupport::worst_gradient_error(20), 1e-5); }

TEST(RouterGradients, ZeroAtExactTarget) {
    const auto m = small_model(5);
    const auto x = random_input(8, 9);
    const auto p = router_forward(m, x);
    const auto g = router_backward(m, x, {p.lambda, p.rho});
    g.for_each_layer([](const DenseLayer& l) {
        for (double w : l.weights) EXPECT_EQ(w, 0.0);
        for (double b : l.bias) EXPECT_EQ(b, 0.0);
    });
}

TEST(RouterGradients, TwoIdenticalSamplesDouble) {
    const auto m = small_model(6);
    const auto x = random_input(8, 10);
    const RouterTarget t{0.2, 0.7};
    const auto once = router_backward(m, x, t);
    auto twice = zero_like(m);
    (void)router_backward_accumulate(m, x.embedding, t, twice);
    (void)router_backward_accumulate(m, x.embedding, t, twice);
    std::array<const DenseLayer*, 4> a{&once.trunk1, &once.trunk2, &once.head_lambda, &once.head_rho};
    std::array<const DenseLayer*, 4> b{&twice.trunk1, &twice.trunk2, &twice.head_lambda, &twice.head_rho};
    for (std::size_t l = 0; l < 4; ++l) {
        for (std::size_t k = 0; k < a[l]->weights.size(); ++k) ASSERT_EQ(2.0 * a[l]->weights[k], b[l]->weights[k]);
        for (std::size_t k = 0; k < a[l]->bias.size(); ++k) ASSERT_EQ(2.0 * a[l]->bias[k], b[l]->bias[k]);
    }
}

namespace {

std::vector<TrainingSample> corpus_samples(int dim) {
    const auto corpus = scene::instruction_corpus(200, 1);
    const auto labels = scene::label_corpus(corpus, default_lexicon(), scene::RhoTable{}, 0.5, kDefaultRhoMin);
    return scene::training_samples(labels, dim);
}

}  // namespace

TEST(RouterTraining, ZeroStepsIsBitwiseNoop) {
    const auto samples = corpus_samples(16);
    const auto m = init_router({16, 8, 4}, 0.01, 1);
    TrainOptions opt;
    opt.steps = 0;
    EXPECT_EQ(train_router(m, samples, opt), m);
}

TEST(RouterTraining, SameSeedSameWeights) {
    const auto samples = corpus_samples(16);
    const auto m = init_router({16, 8, 4}, 0.01, 1);
    TrainOptions opt;
    opt.steps = 200;
    opt.seed = 42;
    EXPECT_EQ(train_router(m, samples, opt), train_router(m, samples, opt));
}

TEST(RouterTraining, LossDecreasesAndLogIsComplete) {
    const auto samples = corpus_samples(32);
    TrainOptions opt;
    opt.steps = 300;
    TrainLog log;
    (void)train_router(init_router({32, 16, 8}, 0.01, 2), samples, opt, &log);
    EXPECT_EQ(log.step_loss.size(), 300u);
    EXPECT_LE(log.final_loss, log.initial_loss);
}

TEST(RouterTraining, DivergenceIsReported) {
    const auto samples = corpus_samples(16);
    auto m = init_router({16, 8, 4}, 0.01, 3);
    m.head_lambda.weights[0] = std::numeric_limits<double>::infinity();
    TrainOptions opt;
    opt.steps = 5;
    EXPECT_THROW((void)train_router(m, samples, opt), Error);
}

TEST(RouterTraining, HugeLearningRateNeverYieldsNonFiniteModel) {
    const auto samples = corpus_samples(16);
    TrainOptions opt;
    opt.steps = 50;
    for (double lr : {1e10, 1e200, 1e308}) {
        opt.learning_rate = lr;
        try {
            const auto m = train_router(init_router({16, 8, 4}, 0.01, 3), samples, opt);
            bool finite = true;
            m.for_each_layer([&](const DenseLayer& l) {
                finite = finite && all_finite(std::span<const double>(l.weights)) && all_finite(std::span<const double>(l.bias));
            });
            EXPECT_TRUE(finite) << lr;
        } catch (const Error&) {
        }
    }
    opt.learning_rate = std::numeric_limits<double>::infinity();
    EXPECT_THROW((void)train_router(init_router({16, 8, 4}, 0.01, 3), samples, opt), ConfigError);
}

TEST(RouterTraining, EmptyCorpusRejected) {
    std::vector<TrainingSample> none;
    EXPECT_THROW((void)train_router(init_router({4, 4, 4}, 0.01, 1), none, {}), InvalidInput);
}
