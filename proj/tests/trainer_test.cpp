#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "advnoise/trainer.hpp"

using namespace advnoise;

namespace {

struct Fixture {
    OracleDataset train, test;
    Network net;
};

Fixture small_problem(std::size_t n_per_class = 20) {
    GeneratorConfig g;
    g.dim = 4;
    g.separation = 3.0;
    g.n_per_class = n_per_class;
    g.seed = 2;
    Fixture f;
    f.train = generate(g);
    f.test = sample_from_oracle(f.train.oracle, 50, 3);
    f.net = Network::init({4, {8}, 2, Activation::relu}, 4);
    return f;
}

TrainConfig quick_config(std::size_t epochs = 5) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 8;
    cfg.optimizer.lr = 0.05;
    cfg.seed = 9;
    cfg.eval_attack = AttackConfig::unbounded(0.2, 3, 0.1, false);
    cfg.train_attack = AttackConfig::unbounded(0.2, 3, 0.1, true);
    return cfg;
}

std::string csv_of(const std::vector<EpochLog>& logs) {
    std::ostringstream os;
    write_epoch_csv(os, logs);
    return os.str();
}

}  // namespace

TEST(LrSchedule, PiecewiseMilestones) {
    const LrSchedule s{{10, 15}, 0.1};
    EXPECT_DOUBLE_EQ(s.at(10, 0.1), 0.1);
    EXPECT_DOUBLE_EQ(s.at(11, 0.1), 0.1 * 0.1);
    EXPECT_DOUBLE_EQ(s.at(16, 0.1), 0.1 * 0.1 * 0.1);
    EXPECT_DOUBLE_EQ(LrSchedule{}.at(1000, 0.3), 0.3);
}

TEST(TrainConfig, Validation) {
    auto cfg = quick_config();
    cfg.epochs = 0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = quick_config();
    cfg.optimizer.lr = 0.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(TrainStandard, LearnsSeparableData) {
    auto f = small_problem(40);
    auto cfg = quick_config(30);
    cfg.eval_attack.reset();
    const auto r = train_standard(f.net, f.train, f.test, cfg);
    EXPECT_GT(r.logs.back().train_std, 0.9);
    EXPECT_GT(r.logs.back().test_std, 0.85);
    EXPECT_TRUE(std::isnan(r.logs.back().test_rob));
    ASSERT_TRUE(r.logs.back().noise);
    // One-hot labels at clean inputs: p_e is the Bayes noise of the set.
    EXPECT_NEAR(r.logs.back().noise->p_e, 1.0 - data_quality(f.train.assigned, *f.train.true_dist), 1e-12);
}

TEST(TrainStandard, AdamAlsoTrains) {
    auto f = small_problem(40);
    auto cfg = quick_config(30);
    cfg.eval_attack.reset();
    cfg.optimizer.kind = OptimizerKind::adam;
    cfg.optimizer.lr = 0.01;
    const auto r = train_standard(f.net, f.train, f.test, cfg);
    EXPECT_GT(r.logs.back().test_std, 0.85);
}

TEST(TrainAdversarial, SameSeedIsBitIdentical) {
    auto f = small_problem();
    const auto cfg = quick_config();
    const auto a = train_adversarial(f.net, f.train, f.test, cfg);
    const auto b = train_adversarial(f.net, f.train, f.test, cfg);
    EXPECT_EQ(a.final_net, b.final_net);
    EXPECT_EQ(csv_of(a.logs), csv_of(b.logs));
}

TEST(TrainAdversarial, ThreadCountDoesNotChangeResults) {
    auto f = small_problem();
    auto cfg = quick_config();
    const auto a = train_adversarial(f.net, f.train, f.test, cfg);
    cfg.threads = 3;
    const auto b = train_adversarial(f.net, f.train, f.test, cfg);
    EXPECT_EQ(a.final_net, b.final_net);
    EXPECT_EQ(csv_of(a.logs), csv_of(b.logs));
}

TEST(TrainAdversarial, ZeroEpsilonEqualsStandardTraining) {
    auto f = small_problem();
    auto cfg = quick_config();
    cfg.train_attack = AttackConfig::unbounded(0.0, 3, 0.1, true);
    const auto adv = train_adversarial(f.net, f.train, f.test, cfg);
    const auto std_run = train_standard(f.net, f.train, f.test, cfg);
    EXPECT_EQ(adv.final_net, std_run.final_net);
}

TEST(TrainKd, LambdaZeroEqualsAdversarialTraining) {
    auto f = small_problem();
    const auto cfg = quick_config();
    const auto teacher = Network::init({4, {8}, 2, Activation::relu}, 99);
    const auto kd = train_kd(f.net, teacher, f.train, f.test, cfg, {2.0, 0.0});
    const auto at = train_adversarial(f.net, f.train, f.test, cfg);
    EXPECT_EQ(kd.final_net, at.final_net);
    EXPECT_EQ(csv_of(kd.logs), csv_of(at.logs));
}

TEST(TrainKd, SoftTargetsLowerTrainingLabelMismatch) {
    // A teacher equal to the Bayes direction gives targets closer to the truth
    // than one-hot labels, so the logged mean TV drops.
    auto f = small_problem();
    const auto cfg = quick_config(3);
    auto base = train_adversarial(f.net, f.train, f.test, cfg);
    const auto kd = train_kd(f.net, base.final_net, f.train, f.test, cfg, {1.0, 1.0});
    EXPECT_LT(kd.logs.back().noise->mean_tv, base.logs.back().noise->mean_tv);
}

TEST(TrainKd, ShapeMismatchThrows) {
    auto f = small_problem();
    const auto teacher = Network::init({3, {8}, 2, Activation::relu}, 1);
    EXPECT_THROW(train_kd(f.net, teacher, f.train, f.test, quick_config(), {1.0, 1.0}), ShapeError);
}

TEST(Train, DivergenceRaisesNumericError) {
    auto f = small_problem();
    auto cfg = quick_config(20);
    cfg.eval_attack.reset();
    cfg.optimizer.lr = 1e200;
    EXPECT_THROW(train_standard(f.net, f.train, f.test, cfg), NumericError);
}

TEST(Train, DatasetShapeMismatchThrows) {
    auto f = small_problem();
    const auto wrong = Network::init({5, {8}, 2, Activation::relu}, 4);
    EXPECT_THROW(train_standard(wrong, f.train, f.test, quick_config()), ShapeError);
}

TEST(Train, CheckpointsWrittenAndReloadable) {
    auto f = small_problem();
    auto cfg = quick_config(4);
    cfg.checkpoint = CheckpointPolicy::every_k;
    cfg.checkpoint_every = 2;
    const auto dir = std::filesystem::temp_directory_path() / "advnoise_ckpt_test";
    std::filesystem::remove_all(dir);
    cfg.run_dir = dir.string();
    const auto r = train_adversarial(f.net, f.train, f.test, cfg);
    EXPECT_TRUE(std::filesystem::exists(dir / "epoch_2.ckpt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "epoch_4.ckpt"));
    EXPECT_EQ(load_checkpoint((dir / "last.ckpt").string()), r.final_net);

    cfg.checkpoint = CheckpointPolicy::best_robust;
    const auto r2 = train_adversarial(f.net, f.train, f.test, cfg);
    EXPECT_EQ(load_checkpoint((dir / "best.ckpt").string()), r2.best_net);
    std::filesystem::remove_all(dir);
}

TEST(Train, BestEpochMatchesLogs) {
    auto f = small_problem();
    const auto r = train_adversarial(f.net, f.train, f.test, quick_config(6));
    const auto s = summarize(r.logs, &EpochLog::test_rob);
    EXPECT_EQ(s.best_epoch, r.best_epoch);
    EXPECT_GE(s.diff(), 0.0);
}

TEST(Evaluate, RobustNeverExceedsStandard) {
    auto f = small_problem();
    const auto r = evaluate(f.net, f.test, AttackConfig::unbounded(0.5, 5, 0.2, false));
    EXPECT_LE(r.rob_acc, r.std_acc);
    const auto clean = evaluate(f.net, f.test, AttackConfig::unbounded(0.0, 1, 0.1, false));
    EXPECT_EQ(clean.rob_acc, clean.std_acc);
}

TEST(EpochCsv, EmptyCellsForUnmeasured) {
    EpochLog l;
    l.epoch = 3;
    l.train_std = 0.5;
    std::ostringstream os;
    write_epoch_csv(os, {l});
    EXPECT_EQ(os.str(), std::string(kEpochCsvHeader) + "\n3,0.5,,,,,,,,\n");
}

TEST(Summarize, EarliestBestAndDiff) {
    std::vector<EpochLog> logs(4);
    const double vals[] = {0.4, 0.6, 0.6, 0.5};
    for (std::size_t i = 0; i < 4; ++i) {
        logs[i].epoch = i + 1;
        logs[i].test_rob = vals[i];
    }
    const auto s = summarize(logs, &EpochLog::test_rob);
    EXPECT_EQ(s.best_epoch, 2u);
    EXPECT_DOUBLE_EQ(s.diff(), 0.1);
}
