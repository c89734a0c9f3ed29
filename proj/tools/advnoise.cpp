#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "advnoise/experiments.hpp"
#include "advnoise/suites.hpp"

namespace fs = std::filesystem;
using namespace advnoise;
namespace ex = advnoise::experiments;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericFailure = 3, kAssertionFailure = 4 };

/// A check that ran and failed (verify suites).
struct AssertionFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Options shared by every subcommand.
struct Common {
    std::string out;
    std::string name;
    std::vector<std::string> config_files;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::string eps, steps, step_size, norm;
    bool no_random_start = false;
};

Config command_defaults() {
    auto c = ex::base_defaults();
    c.merge(ex::calibration_defaults());
    c.set("kd.temperature", "1");
    c.set("kd.lambda", "1");
    c.set("kd.attack_teacher", "false");
    c.set("data.mixup_ratio", "1");
    c.set("data.mixup_seed", "41");
    return c;
}

/// defaults < config files < dedicated flags < --set, then --seed reseeds.
Config resolve(const Config& defaults, const Common& o, const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    Config c = defaults;
    for (const auto& f : o.config_files) c.merge(ex::RunManifest::strip_run(Config::load(f)));
    auto put = [&](const char* key, const std::string& v) {
        if (!v.empty()) c.set(key, v);
    };
    put("attack.eps", o.eps);
    put("attack.steps", o.steps);
    put("attack.step_size", o.step_size);
    put("attack.norm", o.norm);
    if (o.no_random_start) c.set("attack.random_start", "false");
    for (const auto& [k, v] : extra) put(k.c_str(), v);
    for (const auto& s : o.sets) c.set_assignment(s);
    if (o.seed) c = ex::with_master_seed(c, *o.seed);
    c.require_known(defaults.keys());
    return c;
}

fs::path out_root(const Common& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv("ADVNOISE_OUT"); env && *env) return env;
    return "runs";
}

/// Runs `body` in the run directory and finishes it with a manifest.
template <class Body>
void with_run(const Common& o, const std::string& default_name, const std::string& command, const Config& cfg,
              Body&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    ex::RunDir dir(out_root(o) / (o.name.empty() ? default_name : o.name));
    body(dir);
    ex::RunManifest m;
    m.command = command;
    m.config = cfg;
    if (o.seed) m.seed = std::to_string(*o.seed);
    m.artifacts = dir.artifacts();
    m.version = kVersion;
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream os(dir.path() / ex::RunManifest::kFileName);
    m.write(os);
    std::cerr << "run directory: " << dir.path().string() << '\n';
}

/// A file an earlier subcommand should have produced.
void require_file(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p))
        throw ConfigError("missing " + p.string() + "; produce it with `advnoise " + producer + "`");
}

ex::Splits load_or_generate(const Config& c, const std::string& data_dir) {
    if (data_dir.empty()) return ex::make_splits(c);
    ex::Splits s;
    const fs::path d(data_dir);
    for (auto [split, ds] : {std::pair{"train", &s.train}, {"test", &s.test}, {"val", &s.val}}) {
        const auto p = d / (std::string(split) + ".csv");
        require_file(p, "gen --out <root> --name <dir>");
        *ds = load_csv(p.string());
    }
    return s;
}

Network load_net(const std::string& path, const std::string& flag, const std::string& producer, const std::string& file) {
    if (path.empty())
        throw ConfigError("this command needs " + flag + " <checkpoint>; produce one with `advnoise " + producer +
                          "` (" + file + ")");
    require_file(path, producer);
    return load_checkpoint(path);
}

void write_noise_rows(std::ostream& os, const std::string& tag, const OracleDataset& ds) {
    if (!ds.has_truth()) throw ConfigError("dataset '" + tag + "' carries no truth columns; nothing to diagnose");
    write_noise_report_row(os, tag, mismatch_report(one_hot_labels(ds.assigned, ds.classes), *ds.true_dist, ds.assigned));
}

// ---------------------------------------------------------------------------

void cmd_gen(const Common& o) {
    const auto cfg = resolve(command_defaults(), o);
    with_run(o, "gen", "gen", cfg, [&](ex::RunDir& dir) {
        auto s = ex::make_splits(cfg);
        const double ratio = cfg.real("data.mixup_ratio");
        if (ratio < 1.0) s.train = mixup_once(s.train, {ratio, cfg.count("data.mixup_seed")});
        save_csv(s.train, dir.file("train.csv").string());
        save_csv(s.test, dir.file("test.csv").string());
        save_csv(s.val, dir.file("val.csv").string());
        dir.write("noise_report.csv", [&](std::ostream& os) {
            os << kNoiseReportHeader << '\n';
            write_noise_rows(os, "train", s.train);
            write_noise_rows(os, "test", s.test);
            write_noise_rows(os, "val", s.val);
        });
    });
}

struct TrainArgs {
    std::string mode;
    std::string data;
    std::string teacher;
    std::string temperature, lambda;
};

void cmd_train(const Common& o, const TrainArgs& a) {
    const auto cfg = resolve(command_defaults(), o, {{"kd.temperature", a.temperature}, {"kd.lambda", a.lambda}});
    std::optional<Network> teacher;
    if (a.mode == "kd") teacher = load_net(a.teacher, "--teacher", "train adversarial", "best.ckpt");
    with_run(o, "train-" + a.mode, "train " + a.mode, cfg, [&](ex::RunDir& dir) {
        const auto s = load_or_generate(cfg, a.data);
        const auto init = Network::init(ex::network_spec(cfg, s.train.dim(), s.train.classes), cfg.count("model.seed"));
        const auto attack = ex::attack_config(cfg, s.train);
        auto tc = ex::train_config(cfg, "train", attack, o.jobs);
        TrainResult r;
        if (a.mode == "standard") {
            tc.train_attack.reset();
            r = train_standard(init, s.train, s.test, tc);
        } else if (a.mode == "adversarial") {
            r = train_adversarial(init, s.train, s.test, tc);
        } else {
            tc.attack_teacher = cfg.flag("kd.attack_teacher");
            r = train_kd(init, *teacher, s.train, s.test, tc, {cfg.real("kd.temperature"), cfg.real("kd.lambda")});
        }
        dir.write("epochs.csv", [&](std::ostream& os) { write_epoch_csv(os, r.logs); });
        save_checkpoint(r.best_net, dir.file("best.ckpt").string());
        save_checkpoint(r.final_net, dir.file("last.ckpt").string());
        const std::vector<ex::SummaryRow> rows{
            {a.mode, "test_rob", kNaN, kNaN, kNaN, summarize(r.logs, &EpochLog::test_rob)},
            {a.mode, "test_std", kNaN, kNaN, kNaN, summarize(r.logs, &EpochLog::test_std)}};
        dir.write("summary.csv", [&](std::ostream& os) { ex::write_summary_csv(os, rows); });
        ex::write_summary_csv(std::cout, rows);
    });
}

struct CalibrateArgs {
    std::string data, net, surrogate;
    std::string grid_t, grid_lambda, mode;
};

void cmd_calibrate(const Common& o, const CalibrateArgs& a) {
    const auto cfg = resolve(command_defaults(), o,
                             {{"calibrate.temperatures", a.grid_t},
                              {"calibrate.lambdas", a.grid_lambda},
                              {"calibrate.mode", a.mode}});
    const auto mode = cfg.str("calibrate.mode");
    if (mode != "surrogate" && mode != "onehot")
        throw ConfigError("unknown calibrate.mode '" + mode + "' (expected surrogate|onehot)");
    const auto net = load_net(a.net, "--net", "train adversarial", "best.ckpt");
    std::optional<Network> surrogate;
    if (mode == "surrogate") surrogate = load_net(a.surrogate, "--surrogate", "train adversarial", "last.ckpt");
    with_run(o, "calibrate", "calibrate", cfg, [&](ex::RunDir& dir) {
        const auto s = load_or_generate(cfg, a.data);
        const auto grid = ex::calib_grid(cfg);
        const auto adv_val =
            build_adv_validation(net, s.val, ex::attack_config(cfg, s.val).deterministic(), cfg.count("calibrate.seed"));
        const auto r = surrogate ? calibrate_surrogate(net, *surrogate, adv_val, grid) : calibrate_onehot(net, adv_val, grid);
        dir.write("nll_surface.csv", [&](std::ostream& os) { write_surface_csv(os, r, grid); });
        dir.write("nll_surface_long.csv", [&](std::ostream& os) { write_surface_long_csv(os, r, grid, "nll"); });
        auto choices = [&](std::ostream& os) {
            os << "criterion,T,lambda,objective\n";
            os << "nll," << advnoise::detail::fmt_value(r.t_star) << ',' << advnoise::detail::fmt_value(r.lambda_star)
               << ',' << advnoise::detail::fmt_value(r.minimum()) << '\n';
            if (adv_val.has_truth()) {
                const auto tv = tv_oracle_search(net, adv_val, grid);
                os << "tv_oracle," << advnoise::detail::fmt_value(tv.t_star) << ','
                   << advnoise::detail::fmt_value(tv.lambda_star) << ',' << advnoise::detail::fmt_value(tv.minimum())
                   << '\n';
            }
        };
        dir.write("calibration.csv", choices);
        choices(std::cout);
    });
}

void cmd_verify(const Common& o, const std::string& suite) {
    Config cfg;
    cfg.set("verify.suite", suite);
    cfg.set("verify.seed", std::to_string(o.seed.value_or(1)));
    bool ok = false;
    with_run(o, "verify", "verify --suite " + suite, cfg, [&](ex::RunDir& dir) {
        const auto reports = theory::run_suite(suite, cfg.count("verify.seed"));
        dir.write("verify.csv", [&](std::ostream& os) { theory::write_report_csv(os, reports); });
        for (const auto& r : reports)
            std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << " cases=" << r.cases << " failures=" << r.failures
                      << " min_margin=" << r.min_margin << '\n';
        ok = theory::all_passed(reports);
    });
    if (!ok) throw AssertionFailure("verify: at least one check failed");
}

void cmd_experiment(const Common& o, const std::string& preset) {
    const auto cfg = resolve(ex::preset_defaults(preset), o);
    with_run(o, "experiment-" + preset, "experiment " + preset, cfg, [&](ex::RunDir& dir) {
        ex::Context ctx{dir, o.jobs, &std::cerr};
        const auto r = ex::run_experiment(preset, cfg, ctx);
        ex::write_summary_csv(std::cout, r.summary);
    });
}

void cmd_diagnose(const Common& o, const std::string& data, const std::string& net_path) {
    if (data.empty()) throw ConfigError("diagnose needs --data <csv>; produce one with `advnoise gen`");
    require_file(data, "gen");
    Config cfg;
    cfg.set("diagnose.data", data);
    if (!net_path.empty()) cfg.set("diagnose.net", net_path);
    with_run(o, "diagnose", "diagnose", cfg, [&](ex::RunDir& dir) {
        const auto ds = load_csv(data);
        std::ostringstream report;
        report << kNoiseReportHeader << '\n';
        write_noise_rows(report, "assigned", ds);
        if (!net_path.empty()) {
            const auto net = load_checkpoint(net_path);
            std::vector<LabelDistribution> model;
            for (std::size_t i = 0; i < ds.size(); ++i) model.push_back(softmax_t(forward(net, ds.x(i)), 1.0));
            write_noise_report_row(report, "model", mismatch_report(model, *ds.true_dist, ds.assigned));
        }
        dir.write("noise_report.csv", [&](std::ostream& os) { os << report.str(); });
        std::cout << report.str();
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Label-noise diagnostics and adversarial training experiments"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Common o;
    app.add_option("--out", o.out, "Output root (default: $ADVNOISE_OUT or ./runs)");
    app.add_option("--name", o.name, "Run directory name under the output root");
    app.add_option("--config", o.config_files, "Config file(s) or manifests, merged in order");
    app.add_option("--set", o.sets, "Override one config key: section.key=value");
    app.add_option("--seed", o.seed, "Master seed; reseeds every seed key");
    app.add_option("--jobs", o.jobs, "Worker threads for attacks and evaluation")->check(CLI::PositiveNumber);
    app.add_option("--eps", o.eps, "Attack radius (accepts a/b, e.g. 8/255)");
    app.add_option("--steps", o.steps, "PGD steps");
    app.add_option("--step-size", o.step_size, "PGD step size");
    app.add_option("--norm", o.norm, "Attack norm")->check(CLI::IsMember({"linf", "l2"}));
    app.add_flag("--no-random-start", o.no_random_start, "Start PGD at the clean input");

    auto* gen = app.add_subcommand("gen", "Generate train/test/val splits from an oracle dataset");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train a classifier");
    train->add_option("mode", ta.mode, "standard | adversarial | kd")
        ->required()
        ->check(CLI::IsMember({"standard", "adversarial", "kd"}));
    train->add_option("--data", ta.data, "Directory written by `gen` (default: generate from config)");
    train->add_option("--teacher", ta.teacher, "Teacher checkpoint for kd");
    train->add_option("--temperature", ta.temperature, "kd rectifier temperature");
    train->add_option("--lambda", ta.lambda, "kd rectifier interpolation ratio");

    CalibrateArgs ca;
    auto* calibrate = app.add_subcommand("calibrate", "Grid-search (T, lambda) on an adversarial validation set");
    calibrate->add_option("--data", ca.data, "Directory written by `gen` (default: generate from config)");
    calibrate->add_option("--net", ca.net, "Classifier checkpoint to calibrate");
    calibrate->add_option("--surrogate", ca.surrogate, "Overfitted surrogate checkpoint (surrogate mode)");
    calibrate->add_option("--grid-t", ca.grid_t, "Comma-separated temperatures");
    calibrate->add_option("--grid-lambda", ca.grid_lambda, "Comma-separated interpolation ratios");
    calibrate->add_option("--mode", ca.mode, "surrogate | onehot")->check(CLI::IsMember({"surrogate", "onehot"}));

    std::string suite = "all";
    auto* verify = app.add_subcommand("verify", "Run the theory verification suites");
    std::vector<std::string> suites{"all"};
    suites.insert(suites.end(), theory::suite_names().begin(), theory::suite_names().end());
    verify->add_option("--suite", suite, "Suite to run")->check(CLI::IsMember(suites));

    std::string preset;
    auto* experiment = app.add_subcommand("experiment", "Run an experiment preset");
    experiment->add_option("preset", preset, "Preset name")->required()->check(CLI::IsMember(ex::preset_names()));

    std::string diag_data, diag_net;
    auto* diagnose = app.add_subcommand("diagnose", "Print the label-noise report of a dataset against its truth");
    diagnose->add_option("--data", diag_data, "Dataset CSV");
    diagnose->add_option("--net", diag_net, "Also report the checkpoint's predictions as labels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*gen) cmd_gen(o);
        if (*train) cmd_train(o, ta);
        if (*calibrate) cmd_calibrate(o, ca);
        if (*verify) cmd_verify(o, suite);
        if (*experiment) cmd_experiment(o, preset);
        if (*diagnose) cmd_diagnose(o, diag_data, diag_net);
    } catch (const AssertionFailure& e) {
        std::cerr << "assertion failure: " << e.what() << '\n';
        return kAssertionFailure;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumericFailure;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        // ParameterError and ShapeError: a value the config supplied is unusable.
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
