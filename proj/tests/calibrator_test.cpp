#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "advnoise/calibrator.hpp"
#include "advnoise/trainer.hpp"

using namespace advnoise;

namespace {

OracleDataset from_rows(std::vector<Vector> xs, std::vector<std::size_t> labels, std::size_t classes) {
    OracleDataset ds;
    ds.classes = classes;
    Vector flat;
    for (const auto& x : xs) flat.insert(flat.end(), x.begin(), x.end());
    ds.inputs = Matrix(xs.size(), xs.front().size(), std::move(flat));
    ds.assigned = std::move(labels);
    return ds;
}

/// Identity network: logits equal the input.
Network identity_net(std::size_t k) {
    NetworkSpec spec{k, {}, k, Activation::relu};
    return Network(spec, {Layer{Matrix::identity(k), Vector(k, 0.0)}});
}

}  // namespace

TEST(CalibGrid, DefaultsAndValidation) {
    const auto g = CalibGrid::defaults();
    EXPECT_EQ(g.temperatures.size(), 11u);
    EXPECT_EQ(g.lambdas.size(), 21u);
    EXPECT_NO_THROW(g.validate());
    CalibGrid bad{{1.0, 0.5}, {0.0}};
    EXPECT_THROW(bad.validate(), ParameterError);
    CalibGrid bad2{{1.0}, {1.5}};
    EXPECT_THROW(bad2.validate(), ParameterError);
}

TEST(CalibrateOnehot, SurfaceMatchesHandComputedNll) {
    // Two examples, logits [1,0] and [0,2], labels 0 and 0; observed labels 0 and 1.
    const auto net = identity_net(2);
    const auto ds = from_rows({{1.0, 0.0}, {0.0, 2.0}}, {0, 0}, 2);
    const CalibGrid grid{{1.0, 2.0}, {0.0, 0.5, 1.0}};
    const std::vector<std::size_t> observed{0, 1};
    const auto r = calibrate_onehot(net, ds, grid, std::span<const std::size_t>(observed));
    for (std::size_t a = 0; a < 2; ++a) {
        const double T = grid.temperatures[a];
        const double p0 = softmax_t(Vector{1.0, 0.0}, T)[0];
        const double p1 = softmax_t(Vector{0.0, 2.0}, T)[1];
        for (std::size_t b = 0; b < 3; ++b) {
            const double l = grid.lambdas[b];
            const double m0 = l * p0 + (1 - l) * 1.0;
            const double m1 = std::max(l * p1 + (1 - l) * 0.0, kProbFloor);
            EXPECT_NEAR(r.surface(a, b), -(std::log(m0) + std::log(m1)) / 2.0, 1e-12);
        }
    }
}

TEST(CalibrateOnehot, WithoutObservedLabelsLambdaZeroWins) {
    const auto net = identity_net(3);
    const auto ds = from_rows({{1.0, 0.0, 0.5}, {0.0, 2.0, 0.1}, {3.0, 0.0, 0.0}}, {2, 0, 1}, 3);
    const auto r = calibrate_onehot(net, ds, CalibGrid::defaults());
    EXPECT_EQ(r.lambda_star, 0.0);
    EXPECT_EQ(r.t_star, 0.5);  // ties resolve to the smallest T
    EXPECT_NEAR(r.minimum(), 0.0, 1e-15);
}

TEST(CalibrateSurrogate, IdenticalSurrogateMakesLambdaIrrelevant) {
    const auto net = Network::init({3, {5}, 3, Activation::tanh}, 3);
    GeneratorConfig g;
    g.preset = "ring_mixture";
    g.classes = 3;
    g.dim = 3;
    g.n_per_class = 30;
    const auto ds = generate(g);
    const auto r = calibrate_surrogate(net, net, ds, CalibGrid::defaults());
    for (std::size_t a = 0; a < r.surface.rows(); ++a)
        for (std::size_t b = 1; b < r.surface.cols(); ++b) EXPECT_NEAR(r.surface(a, b), r.surface(a, 0), 1e-12);
}

TEST(TvOracleSearch, FindsExactRectifier) {
    // truth = 0.5 softmax(z) + 0.5 one_hot(assigned) for every example.
    std::vector<Vector> logits{{1.0, -0.5}, {0.2, 0.9}, {-1.0, 1.0}};
    std::vector<std::size_t> assigned{0, 1, 0};
    std::vector<LabelDistribution> truth;
    for (std::size_t i = 0; i < 3; ++i) truth.push_back(rectify(logits[i], assigned[i], {1.0, 0.5}));
    const auto r = tv_oracle_search(logits, truth, assigned, CalibGrid::defaults());
    EXPECT_EQ(r.t_star, 1.0);
    EXPECT_EQ(r.lambda_star, 0.5);
    EXPECT_NEAR(r.minimum(), 0.0, 1e-15);
}

TEST(TvOracleSearch, UnknownTruthThrows) {
    const auto net = identity_net(2);
    const auto ds = from_rows({{1.0, 0.0}}, {0}, 2);
    EXPECT_THROW(tv_oracle_search(net, ds, CalibGrid::defaults()), ParameterError);
}

TEST(Calibration, MixupEndToEndLowersMismatch) {
    // Known label noise from one-time mixup; a net trained on clean data is
    // calibrated on a validation set whose observed labels follow the truth.
    GeneratorConfig g;
    g.preset = "ring_mixture";
    g.classes = 3;
    g.dim = 2;
    g.separation = 3.0;
    g.sigma = 0.6;
    g.components_per_class = 1;
    g.n_per_class = 200;
    const auto clean = generate(g);
    auto net = Network::init({2, {16}, 3, Activation::tanh}, 1);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 32;
    cfg.optimizer.lr = 0.05;
    net = train_standard(net, clean, {}, cfg).final_net;

    const auto val = mixup_once(sample_from_oracle(clean.oracle, 300, 8), {0.8, 2});
    const auto observed = resample_assigned(val, 3).assigned;
    const auto r = calibrate_onehot(net, val, CalibGrid::defaults(), std::span<const std::size_t>(observed));
    const double onehot_tv = rectified_mean_tv(net, val, {1.0, 0.0});
    EXPECT_NEAR(onehot_tv, 0.2, 1e-12);
    EXPECT_LT(r.lambda_star, 1.0);
    EXPECT_LT(rectified_mean_tv(net, val, r.params()), onehot_tv);
}

TEST(SurfaceCsv, Layout) {
    CalibResult r;
    r.surface = Matrix{{1.0, 2.0}, {3.0, 4.0}};
    const CalibGrid grid{{1.0, 2.0}, {0.0, 1.0}};
    std::ostringstream os;
    write_surface_csv(os, r, grid);
    EXPECT_EQ(os.str(), "T,0,1\n1,1,2\n2,3,4\n");
    std::ostringstream lo;
    write_surface_long_csv(lo, r, grid, "nll");
    EXPECT_EQ(lo.str(), "nll_T1,0,1\nnll_T1,1,2\nnll_T2,0,3\nnll_T2,1,4\n");
}
