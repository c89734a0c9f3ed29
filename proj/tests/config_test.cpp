#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "advnoise/experiments.hpp"

using namespace advnoise;
namespace ex = advnoise::experiments;

namespace {

Config parse(const std::string& text) {
    std::istringstream is(text);
    return Config::parse(is, "test.ini");
}

}  // namespace

TEST(Config, ParsesSectionsCommentsAndBareKeys) {
    const auto c = parse("top = 1\n# comment\n[train]\nepochs = 30  # trailing\n\n[attack]\neps=8/255\n");
    EXPECT_EQ(c.count("top"), 1u);
    EXPECT_EQ(c.count("train.epochs"), 30u);
    EXPECT_DOUBLE_EQ(c.real("attack.eps"), 8.0 / 255.0);
}

TEST(Config, ErrorsCarryLineNumbers) {
    try {
        parse("[a]\nx = 1\nnot an assignment\n");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("test.ini:3"), std::string::npos);
    }
    EXPECT_THROW(parse("[unclosed\n"), ConfigError);
    EXPECT_THROW(parse("= 3\n"), ConfigError);
}

TEST(Config, TypedGettersRejectBadValues) {
    Config c;
    c.set("a.n", "-3");
    c.set("a.x", "abc");
    c.set("a.z", "1/0");
    c.set("a.b", "maybe");
    EXPECT_THROW(c.count("a.n"), ConfigError);
    EXPECT_THROW(c.real("a.x"), ConfigError);
    EXPECT_THROW(c.real("a.z"), ConfigError);
    EXPECT_THROW(c.flag("a.b"), ConfigError);
    EXPECT_THROW(c.str("a.missing"), ConfigError);
}

TEST(Config, ListsAllowEmpty) {
    Config c;
    c.set("m.hidden", "128, 64");
    c.set("m.none", "");
    EXPECT_EQ(c.counts("m.hidden"), (std::vector<std::size_t>{128, 64}));
    EXPECT_TRUE(c.counts("m.none").empty());
    EXPECT_EQ(c.reals("m.hidden"), (Vector{128.0, 64.0}));
}

TEST(Config, WriteRoundTrips) {
    auto c = ex::mitigate_defaults();
    c.set("bare", "x");
    std::istringstream is(c.to_string());
    EXPECT_EQ(Config::parse(is), c);
}

TEST(Config, LaterAssignmentsWin) {
    auto c = parse("[train]\nepochs = 5\n");
    c.merge(parse("[train]\nepochs = 7\n"));
    EXPECT_EQ(c.count("train.epochs"), 7u);
    c.set_assignment("train.epochs=9");
    EXPECT_EQ(c.count("train.epochs"), 9u);
    EXPECT_THROW(c.set_assignment("no-equals"), ConfigError);
}

TEST(Config, UnknownKeysAreRejected) {
    auto c = ex::mitigate_defaults();
    EXPECT_NO_THROW(c.require_known(ex::mitigate_defaults().keys()));
    c.set("train.epoch", "3");
    EXPECT_THROW(c.require_known(ex::mitigate_defaults().keys()), ConfigError);
}

TEST(MasterSeed, ReseedsEverySeedKeyDistinctly) {
    const auto c = ex::with_master_seed(ex::fixed_adv_defaults(), 100);
    std::set<std::uint64_t> seen;
    std::size_t n = 0;
    for (const auto& k : c.keys())
        if (k.ends_with("seed")) {
            seen.insert(c.count(k));
            ++n;
        }
    EXPECT_GE(n, 6u);
    EXPECT_EQ(seen.size(), n);
    EXPECT_EQ(*seen.begin(), 100u);
    EXPECT_EQ(ex::with_master_seed(ex::fixed_adv_defaults(), 100), c);
}

TEST(Manifest, StripRunRecoversTheConfig) {
    ex::RunManifest m;
    m.command = "experiment mitigate";
    m.config = ex::mitigate_defaults();
    m.artifacts = {"summary.csv", "curves.csv"};
    m.version = "0.1.0";
    m.wall_clock_seconds = 1.5;
    std::stringstream ss;
    m.write(ss);
    const auto back = Config::parse(ss);
    EXPECT_EQ(back.str("run.command"), "experiment mitigate");
    EXPECT_EQ(back.str("run.artifacts"), "summary.csv,curves.csv");
    EXPECT_EQ(ex::RunManifest::strip_run(back), m.config);
}

TEST(Presets, DefaultsBuildValidStructs) {
    for (const auto& p : ex::preset_names()) {
        const auto c = ex::preset_defaults(p);
        EXPECT_NO_THROW(ex::generator_config(c)) << p;
        EXPECT_NO_THROW(ex::train_config(c, "train", std::nullopt, 1)) << p;
    }
    EXPECT_THROW(ex::preset_defaults("nope"), ConfigError);
    auto c = ex::mitigate_defaults();
    c.set("train.optimizer", "rmsprop");
    EXPECT_THROW(ex::train_config(c, "train", std::nullopt, 1), ConfigError);
}

TEST(Summary, RegressionSignFollowsTheMetric) {
    const ex::SummaryRow acc{"at", "test_rob", kNaN, kNaN, kNaN, {3, 0.7, 0.65}};
    const ex::SummaryRow err{"adv", "test_err", kNaN, kNaN, 0.3, {3, 0.06, 0.1}};
    EXPECT_NEAR(acc.regression(), 0.05, 1e-15);
    EXPECT_NEAR(err.regression(), 0.04, 1e-15);
    std::ostringstream os;
    ex::write_summary_csv(os, {acc});
    EXPECT_EQ(os.str(), std::string(ex::kSummaryHeader) + "\nat,test_rob,,,,3,0.69999999999999996,0.65000000000000002,"
                                                          "0.049999999999999933\n");
}

TEST(Experiments, ShrunkMitigateRunWritesItsArtifacts) {
    const auto root = std::filesystem::temp_directory_path() / "advnoise_config_test_mitigate";
    std::filesystem::remove_all(root);
    auto c = ex::mitigate_defaults();
    for (const char* s : {"data.n_per_class=10", "data.test_per_class=10", "data.val_per_class=10", "train.epochs=2",
                          "model.hidden=8", "calibrate.temperatures=1,2", "calibrate.lambdas=0,1"})
        c.set_assignment(s);
    ex::RunDir dir(root);
    ex::Context ctx{dir, 1, nullptr};
    const auto r = ex::run_experiment("mitigate", c, ctx);
    ASSERT_EQ(r.summary.size(), 3u);
    EXPECT_EQ(r.summary[0].method, "at");
    EXPECT_EQ(r.summary[1].method, "kd_auto");
    EXPECT_EQ(r.summary[1].temperature, r.calibration->t_star);
    for (const auto& f : {"summary.csv", "curves.csv", "at_epochs.csv", "kd_auto_epochs.csv", "calibration.csv",
                          "nll_surface.csv", "at_best.ckpt"})
        EXPECT_TRUE(std::filesystem::exists(root / f)) << f;
    std::filesystem::remove_all(root);
}

TEST(Experiments, UnknownKeyFailsBeforeAnyWork) {
    const auto root = std::filesystem::temp_directory_path() / "advnoise_config_test_unknown";
    auto c = ex::gaussian_defaults();
    c.set("augment.epz", "0.1");
    ex::RunDir dir(root);
    ex::Context ctx{dir, 1, nullptr};
    EXPECT_THROW(ex::run_experiment("fig4_gaussian", c, ctx), ConfigError);
    EXPECT_TRUE(dir.artifacts().empty());
    std::filesystem::remove_all(root);
}
