#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "advnoise/labels.hpp"

using namespace advnoise;

namespace {

LabelDistribution lab(std::initializer_list<double> p) { return LabelDistribution(Vector(p)); }

}  // namespace

TEST(LabelDistribution, RejectsOffSimplex) {
    EXPECT_THROW(lab({0.5, 0.6}), ParameterError);
    EXPECT_THROW(lab({-0.1, 1.1}), ParameterError);
    EXPECT_NO_THROW(lab({0.5, 0.5 + 1e-12}));
}

TEST(TvDistance, Basics) {
    EXPECT_EQ(tv_distance(lab({0.3, 0.7}), lab({0.3, 0.7})), 0.0);
    EXPECT_EQ(tv_distance(LabelDistribution::one_hot(0, 2), LabelDistribution::one_hot(1, 2)), 1.0);
    EXPECT_EQ(tv_distance(lab({0.5, 0.5}), lab({1.0, 0.0})), 0.5);
}

TEST(TvDistance, ClassCountMismatchThrows) {
    EXPECT_THROW(tv_distance(LabelDistribution::uniform(2), LabelDistribution::uniform(3)), ShapeError);
}

TEST(Rectify, EndpointsAndClosedForm) {
    const Vector z{2.0, 0.0};
    EXPECT_EQ(rectify(z, 1, {2.0, 0.0}), LabelDistribution::one_hot(1, 2));
    const auto soft = softmax_t(z, 2.0);
    const auto r1 = rectify(z, 1, {2.0, 1.0});
    EXPECT_DOUBLE_EQ(r1[0], soft[0]);
    EXPECT_DOUBLE_EQ(r1[1], soft[1]);

    const double e = std::numbers::e;
    const auto r = rectify(z, 0, {2.0, 0.5});
    EXPECT_NEAR(r[0], 0.5 * e / (e + 1.0) + 0.5, 1e-15);
    EXPECT_NEAR(r[1], 0.5 / (e + 1.0), 1e-15);
}

TEST(Rectify, InvalidParamsThrow) {
    EXPECT_THROW(rectify(Vector{1.0, 0.0}, 0, {0.0, 0.5}), ParameterError);
    EXPECT_THROW(rectify(Vector{1.0, 0.0}, 0, {1.0, 1.5}), ParameterError);
    EXPECT_THROW(rectify(Vector{1.0, 0.0}, 2, {1.0, 0.5}), ShapeError);
}

TEST(SimplexFuzz, TvAxiomsAndRectifyConvexity) {
    Rng rng(101);
    for (int t = 0; t < 10000; ++t) {
        const std::size_t K = 2 + rng.index(9);
        const LabelDistribution p(sample_simplex(rng, K)), q(sample_simplex(rng, K)), r(sample_simplex(rng, K));
        const double pq = tv_distance(p, q);
        ASSERT_GE(pq, 0.0);
        ASSERT_LE(pq, 1.0 + 1e-15);
        ASSERT_EQ(pq, tv_distance(q, p));
        ASSERT_LE(pq, tv_distance(p, r) + tv_distance(r, q) + 1e-15);

        const auto z = sample_gaussian(rng, K, 0.0, 2.0);
        const RectifierParams params{std::exp(rng.uniform(-2.0, 2.0)), rng.uniform()};
        const std::size_t a = rng.index(K);
        const auto rect = rectify(z, a, params);
        const double bound = std::max(tv_distance(LabelDistribution::one_hot(a, K), p),
                                      tv_distance(softmax_t(z, params.temperature), p));
        ASSERT_LE(tv_distance(rect, p), bound + 1e-12);
    }
}

TEST(LabelErrorRate, CleanDatasetIsZeroInBothModes) {
    const std::vector<std::size_t> assigned{0, 1, 2, 1};
    const auto truth = one_hot_labels(assigned, 3);
    EXPECT_EQ(label_error_rate(assigned, truth, ErrorRateMode::expected), 0.0);
    EXPECT_EQ(label_error_rate(assigned, truth, ErrorRateMode::sampled, 5), 0.0);
    EXPECT_EQ(data_quality(assigned, truth), 1.0);
}

TEST(LabelErrorRate, MixupStyleTruth) {
    // truth 0.6 on the assigned class, 0.4 on another.
    const std::size_t N = 100000;
    std::vector<std::size_t> assigned(N);
    std::vector<LabelDistribution> truth;
    for (std::size_t i = 0; i < N; ++i) {
        assigned[i] = i % 2;
        truth.push_back(i % 2 ? lab({0.4, 0.6}) : lab({0.6, 0.4}));
    }
    EXPECT_NEAR(label_error_rate(assigned, truth, ErrorRateMode::expected), 0.4, 1e-12);
    EXPECT_NEAR(label_error_rate(assigned, truth, ErrorRateMode::sampled, 3), 0.4, 0.01);
}

TEST(LabelErrorRate, EmptyOrMismatchedThrows) {
    EXPECT_THROW(label_error_rate({}, {}), ParameterError);
    EXPECT_THROW(data_quality({}, {}), ParameterError);
    const std::vector<std::size_t> a{0};
    const std::vector<LabelDistribution> t{LabelDistribution::uniform(2), LabelDistribution::uniform(2)};
    EXPECT_THROW(data_quality(a, t), ShapeError);
}

TEST(DataQuality, UniformTruthGivesOneOverK) {
    const std::vector<std::size_t> a{0, 3, 4};
    const std::vector<LabelDistribution> t(3, LabelDistribution::uniform(5));
    EXPECT_NEAR(data_quality(a, t), 0.2, 1e-15);
}

TEST(MismatchReport, IdenticalDistributions) {
    const std::vector<LabelDistribution> t(4, lab({0.7, 0.2, 0.1}));
    const std::vector<std::size_t> a(4, 0);
    const auto r = mismatch_report(t, t, a);
    EXPECT_NEAR(r.p_e, 0.3, 1e-15);
    EXPECT_EQ(r.mean_tv, 0.0);
    EXPECT_EQ(r.n, 4u);
}

TEST(MismatchReport, HalfFlippedOneHot) {
    const std::vector<std::size_t> assigned{0, 1, 0, 1};
    const std::vector<std::size_t> truth_cls{0, 1, 1, 0};
    const auto model = one_hot_labels(assigned, 2);
    const auto truth = one_hot_labels(truth_cls, 2);
    const auto r = mismatch_report(model, truth, assigned);
    EXPECT_EQ(r.p_e, 0.5);
    EXPECT_EQ(r.mean_tv, 0.5);
    EXPECT_EQ(r.q, 0.5);
}

TEST(MismatchReport, MixupTruthAgainstOneHot) {
    const std::vector<std::size_t> assigned{0, 1};
    const std::vector<LabelDistribution> truth{lab({0.8, 0.2}), lab({0.2, 0.8})};
    const auto r = mismatch_report(one_hot_labels(assigned, 2), truth, assigned);
    EXPECT_NEAR(r.mean_tv, 0.2, 1e-15);
    EXPECT_NEAR(r.q, 0.8, 1e-15);
}

TEST(NoiseReport, CsvRow) {
    std::ostringstream os;
    write_noise_report_row(os, "train", {0.25, 0.75, 0.5, 8});
    EXPECT_EQ(os.str(), "train,8,0.25,0.75,0.5\n");
}

TEST(SampleClass, EmpiricalFrequencies) {
    Rng rng(4);
    const auto p = lab({0.1, 0.0, 0.6, 0.3});
    std::vector<int> hits(4, 0);
    for (int i = 0; i < 100000; ++i) ++hits[sample_class(p, rng)];
    EXPECT_EQ(hits[1], 0);
    EXPECT_NEAR(hits[0] / 1e5, 0.1, 0.01);
    EXPECT_NEAR(hits[2] / 1e5, 0.6, 0.01);
}
