#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "advnoise/datagen.hpp"

using namespace advnoise;

namespace {

double mean_tv_to_onehot(const OracleDataset& ds) {
    const auto r = mismatch_report(one_hot_labels(ds.assigned, ds.classes), *ds.true_dist, ds.assigned);
    return r.mean_tv;
}

}  // namespace

TEST(GaussianMixture, WellSeparatedIsNearlyOneHot) {
    const auto ds = gen_gaussian_mixture(2, 3, 50, {Vector(3, -50.0), Vector(3, 50.0)}, 1.0, 1);
    ASSERT_TRUE(ds.has_truth());
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_GT((*ds.true_dist)[i][ds.assigned[i]], 1.0 - 1e-6);
    EXPECT_GT(data_quality(ds.assigned, *ds.true_dist), 1.0 - 1e-6);
}

TEST(GaussianMixture, IdenticalMeansGiveUniformTruth) {
    const auto ds = gen_gaussian_mixture(3, 2, 10, {Vector(2, 0.5), Vector(2, 0.5), Vector(2, 0.5)}, 1.0, 1);
    for (const auto& t : *ds.true_dist)
        for (double p : t.probs()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(data_quality(ds.assigned, *ds.true_dist), 1.0 / 3.0, 1e-15);
}

TEST(GaussianMixture, PosteriorAtMidpointIsHalf) {
    const auto ds = gen_gaussian_mixture(2, 1, 1, {Vector{0.0}, Vector{1.0}}, 1.0, 1);
    const auto p = ds.oracle->posterior(Vector{0.5});
    EXPECT_NEAR(p[0], 0.5, 1e-15);
    EXPECT_NEAR(p[1], 0.5, 1e-15);
}

TEST(GaussianMixture, PosteriorMatchesLogisticClosedForm) {
    // Equal priors and variance: P(Y=1|x) = sigmoid((mu1 - mu0) x / s^2 - (mu1^2 - mu0^2) / (2 s^2)).
    const double m0 = -0.7, m1 = 1.3, s = 0.8;
    const auto ds = gen_gaussian_mixture(2, 1, 1, {Vector{m0}, Vector{m1}}, s, 1);
    for (double x : {-3.0, -0.5, 0.0, 0.3, 2.0}) {
        const double a = (m1 - m0) * x / (s * s) - (m1 * m1 - m0 * m0) / (2 * s * s);
        EXPECT_NEAR(ds.oracle->posterior(Vector{x})[1], 1.0 / (1.0 + std::exp(-a)), 1e-13);
    }
}

TEST(GaussianMixture, ClassMajorOrderAndReproducible) {
    GeneratorConfig cfg;
    cfg.n_per_class = 5;
    const auto a = generate(cfg), b = generate(cfg);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.assigned, (std::vector<std::size_t>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
}

TEST(GaussianMixture, BadArgumentsThrow) {
    EXPECT_THROW(gen_gaussian_mixture(1, 2, 5, {Vector(2, 0.0)}, 1.0, 1), ParameterError);
    EXPECT_THROW(gen_gaussian_mixture(2, 2, 5, {Vector(2, 0.0)}, 1.0, 1), ParameterError);
    EXPECT_THROW(gen_gaussian_mixture(2, 2, 5, {Vector(2, 0.0), Vector(2, 1.0)}, 0.0, 1), ParameterError);
}

TEST(Presets, AllBuildAndStayInRange) {
    for (const char* name : {"two_gaussians", "ring_mixture", "toy_images"}) {
        GeneratorConfig cfg;
        cfg.preset = name;
        cfg.classes = 3;
        cfg.dim = 16;
        cfg.n_per_class = 20;
        if (cfg.preset == "two_gaussians") cfg.classes = 2;
        const auto ds = generate(cfg);
        EXPECT_EQ(ds.size(), cfg.classes * 20);
        for (double v : ds.inputs.data()) {
            EXPECT_GE(v, ds.lo);
            EXPECT_LE(v, ds.hi);
        }
    }
    GeneratorConfig bad;
    bad.preset = "cifar";
    EXPECT_THROW(generate(bad), ParameterError);
}

TEST(Mixup, RatioOneLeavesInputsUnchanged) {
    GeneratorConfig cfg;
    cfg.n_per_class = 10;
    const auto ds = generate(cfg);
    const auto m = mixup_once(ds, {1.0, 3});
    EXPECT_EQ(m.inputs, ds.inputs);
    EXPECT_EQ(mean_tv_to_onehot(m), 0.0);
}

TEST(Mixup, QualityAndTvAreExact) {
    GeneratorConfig cfg;
    cfg.preset = "ring_mixture";
    cfg.classes = 4;
    cfg.n_per_class = 25;
    const auto ds = generate(cfg);
    for (double rho : {0.6, 0.8, 0.95}) {
        const auto m = mixup_once(ds, {rho, 9});
        EXPECT_EQ(data_quality(m.assigned, *m.true_dist), rho);
        EXPECT_EQ(mean_tv_to_onehot(m), 1.0 - rho);
        EXPECT_EQ(m.assigned, ds.assigned);
        EXPECT_FALSE(m.oracle);
    }
}

TEST(Mixup, PartnerIsFromAnotherClassAndSeedDeterministic) {
    GeneratorConfig cfg;
    cfg.n_per_class = 15;
    const auto ds = generate(cfg);
    const auto a = mixup_once(ds, {0.7, 5}), b = mixup_once(ds, {0.7, 5}), c = mixup_once(ds, {0.7, 6});
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_NE(a.inputs, c.inputs);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR((*a.true_dist)[i][1 - a.assigned[i]], 0.3, 1e-15);
}

TEST(Mixup, InvalidInputsThrow) {
    GeneratorConfig cfg;
    cfg.n_per_class = 4;
    auto ds = generate(cfg);
    EXPECT_THROW(mixup_once(ds, {0.5, 1}), ParameterError);
    for (auto& a : ds.assigned) a = 0;
    EXPECT_THROW(mixup_once(ds, {0.8, 1}), ParameterError);
}

TEST(FixedAdversarial, ZeroEpsilonIsIdentity) {
    GeneratorConfig cfg;
    cfg.n_per_class = 10;
    const auto ds = generate(cfg);
    const auto net = Network::init({cfg.dim, {8}, 2, Activation::relu}, 1);
    const auto adv = build_fixed_adversarial(ds, net, AttackConfig::unbounded(0.0, 5, 0.1, false));
    EXPECT_EQ(adv.inputs, ds.inputs);
    EXPECT_EQ(*adv.true_dist, *ds.true_dist);
}

TEST(FixedAdversarial, LabelsCopiedAndTruthDistorted) {
    GeneratorConfig cfg;
    cfg.dim = 2;
    cfg.separation = 4.0;
    cfg.n_per_class = 50;
    const auto ds = generate(cfg);
    // A net aligned with the Bayes direction: logit difference grows along +(1,1).
    NetworkSpec spec{2, {}, 2, Activation::relu};
    const Network net(spec, {Layer{Matrix{{-1.0, -1.0}, {1.0, 1.0}}, {0.0, 0.0}}});

    double prev = mean_tv_to_onehot(ds);
    for (double eps : {0.05, 0.1, 0.2}) {
        const auto adv = build_fixed_adversarial(ds, net, AttackConfig::unbounded(eps, 10, eps / 4, false));
        EXPECT_EQ(adv.assigned, ds.assigned);
        ASSERT_TRUE(adv.has_truth());
        const double tv = mean_tv_to_onehot(adv);
        EXPECT_GT(tv, prev);
        prev = tv;
    }
}

TEST(FixedAdversarial, UnknownTruthWithoutOracle) {
    GeneratorConfig cfg;
    cfg.n_per_class = 5;
    auto ds = generate(cfg);
    ds.oracle.reset();
    const auto net = Network::init({cfg.dim, {4}, 2, Activation::relu}, 2);
    const auto adv = build_fixed_adversarial(ds, net, AttackConfig::unbounded(0.1, 3, 0.05, false));
    EXPECT_FALSE(adv.has_truth());
}

TEST(GaussianAugmented, ZeroEpsilonAndDeterminism) {
    GeneratorConfig cfg;
    cfg.n_per_class = 10;
    const auto ds = generate(cfg);
    EXPECT_EQ(build_gaussian_augmented(ds, 0.0, 1).inputs, ds.inputs);
    EXPECT_EQ(build_gaussian_augmented(ds, 0.2, 1).inputs, build_gaussian_augmented(ds, 0.2, 1).inputs);
    EXPECT_NE(build_gaussian_augmented(ds, 0.2, 1).inputs, build_gaussian_augmented(ds, 0.2, 2).inputs);
}

TEST(GaussianAugmented, PerturbationHasLinfNormEps) {
    GeneratorConfig cfg;
    cfg.n_per_class = 10;
    const auto ds = generate(cfg);
    const auto g = build_gaussian_augmented(ds, 0.3, 4);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double m = 0.0;
        for (std::size_t k = 0; k < ds.dim(); ++k) m = std::max(m, std::abs(g.x(i)[k] - ds.x(i)[k]));
        EXPECT_NEAR(m, 0.3, 1e-12);
    }
}

TEST(GaussianAugmented, DistortsTruthLessThanAdversarial) {
    GeneratorConfig cfg;
    cfg.dim = 2;
    cfg.separation = 4.0;
    cfg.n_per_class = 200;
    const auto ds = generate(cfg);
    NetworkSpec spec{2, {}, 2, Activation::relu};
    const Network net(spec, {Layer{Matrix{{-1.0, -1.0}, {1.0, 1.0}}, {0.0, 0.0}}});
    const double eps = 0.2;
    const auto adv = build_fixed_adversarial(ds, net, AttackConfig::unbounded(eps, 10, eps / 4, false));
    const auto gau = build_gaussian_augmented(ds, eps, 3);
    EXPECT_LT(mean_tv_to_onehot(gau), mean_tv_to_onehot(adv));
}

TEST(Csv, RoundTripIsExact) {
    GeneratorConfig cfg;
    cfg.preset = "ring_mixture";
    cfg.classes = 3;
    cfg.dim = 4;
    cfg.n_per_class = 7;
    const auto ds = generate(cfg);
    std::stringstream ss;
    save_csv(ds, ss);
    const auto back = load_csv(ss);
    EXPECT_EQ(back.inputs, ds.inputs);
    EXPECT_EQ(back.assigned, ds.assigned);
    ASSERT_TRUE(back.has_truth());
    EXPECT_EQ(*back.true_dist, *ds.true_dist);
}

TEST(Csv, MissingTruthColumnsMeansUnknown) {
    std::stringstream ss("2,2\n0.5,1.5,0\n-1,2,1\n");
    const auto ds = load_csv(ss);
    EXPECT_FALSE(ds.has_truth());
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.x(1)[0], -1.0);
}

TEST(Csv, MalformedRowReportsLine) {
    std::stringstream ss("2,2\n0.5,1.5,0\n0.5,abc,1\n");
    try {
        load_csv(ss);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Csv, MixedTruthColumnsRejected) {
    std::stringstream ss("1,2\n0.5,0,0.5,0.5\n0.5,1\n");
    EXPECT_THROW(load_csv(ss), ParseError);
}

TEST(Csv, BadHeaderAndOffSimplexTruth) {
    std::stringstream a("x,2\n");
    EXPECT_THROW(load_csv(a), ParseError);
    std::stringstream b("1,2\n0.5,0,0.9,0.9\n");
    EXPECT_THROW(load_csv(b), ParseError);
    std::stringstream c("1,2\n0.5,2\n");
    EXPECT_THROW(load_csv(c), ParseError);
}

TEST(ResampleAssigned, FollowsTruth) {
    const auto ds = gen_gaussian_mixture(2, 1, 20000, {Vector{0.0}, Vector{0.0}}, 1.0, 1);
    const auto r = resample_assigned(ds, 5);
    std::size_t ones = 0;
    for (auto a : r.assigned) ones += a;
    EXPECT_NEAR(static_cast<double>(ones) / r.size(), 0.5, 0.01);
}
