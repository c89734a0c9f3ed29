#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "advnoise/calibrator.hpp"
#include "advnoise/config.hpp"
#include "advnoise/datagen.hpp"
#include "advnoise/trainer.hpp"

namespace advnoise::experiments {

// ---------------------------------------------------------------------------
// Config -> library structs. Every key read here has a default in
// base_defaults() or in a preset's defaults.

inline Config base_defaults() {
    Config c;
    c.set("data.preset", "two_gaussians");
    c.set("data.classes", "2");
    c.set("data.dim", "20");
    c.set("data.separation", "3");
    c.set("data.sigma", "1");
    c.set("data.components_per_class", "3");
    c.set("data.n_per_class", "50");
    c.set("data.seed", "11");
    c.set("data.test_per_class", "1000");
    c.set("data.test_seed", "12");
    c.set("data.val_per_class", "500");
    c.set("data.val_seed", "13");

    c.set("model.hidden", "128,128");
    c.set("model.activation", "relu");
    c.set("model.seed", "5");

    c.set("train.epochs", "100");
    c.set("train.batch_size", "32");
    c.set("train.optimizer", "sgd");
    c.set("train.lr", "0.05");
    c.set("train.momentum", "0.9");
    c.set("train.milestones", "50,75");
    c.set("train.lr_factor", "0.1");
    c.set("train.weight_decay", "0");
    c.set("train.seed", "3");
    c.set("train.eval_train_robust", "false");

    c.set("attack.norm", "linf");
    c.set("attack.eps", "0.2");
    c.set("attack.steps", "10");
    c.set("attack.step_size", "0.05");
    c.set("attack.random_start", "true");
    return c;
}

inline Config calibration_defaults() {
    Config c;
    const auto g = CalibGrid::defaults();
    auto join = [](const Vector& v) {
        std::ostringstream os;
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
        return os.str();
    };
    c.set("calibrate.temperatures", join(g.temperatures));
    c.set("calibrate.lambdas", join(g.lambdas));
    c.set("calibrate.mode", "surrogate");
    c.set("calibrate.seed", "21");
    return c;
}

inline GeneratorConfig generator_config(const Config& c) {
    GeneratorConfig g;
    g.preset = c.str("data.preset");
    g.classes = c.count("data.classes");
    g.dim = c.count("data.dim");
    g.separation = c.real("data.separation");
    g.sigma = c.real("data.sigma");
    g.components_per_class = c.count("data.components_per_class");
    g.n_per_class = c.count("data.n_per_class");
    g.seed = c.count("data.seed");
    return g;
}

inline NetworkSpec network_spec(const Config& c, std::size_t input_dim, std::size_t classes) {
    return {input_dim, c.counts("model.hidden"), classes, parse_activation(c.str("model.activation"))};
}

/// The attack section, clamped to the dataset's input range.
inline AttackConfig attack_config(const Config& c, const OracleDataset& ds, std::optional<double> eps = std::nullopt) {
    AttackConfig a;
    a.norm = parse_norm(c.str("attack.norm"));
    a.epsilon = eps.value_or(c.real("attack.eps"));
    a.steps = c.count("attack.steps");
    a.step_size = c.real("attack.step_size");
    a.random_start = c.flag("attack.random_start");
    a.lo = ds.lo;
    a.hi = ds.hi;
    a.validate();
    return a;
}

inline OptimizerKind parse_optimizer(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected sgd|adam)");
}

/// Training settings from `section` (train, pretrain, ...). The evaluation
/// attack is the training attack without random start.
inline TrainConfig train_config(const Config& c, const std::string& section, const std::optional<AttackConfig>& attack,
                                unsigned threads) {
    TrainConfig t;
    t.epochs = c.count(section + ".epochs");
    t.batch_size = c.count(section + ".batch_size");
    t.optimizer.kind = parse_optimizer(c.str(section + ".optimizer"));
    t.optimizer.lr = c.real(section + ".lr");
    t.optimizer.momentum = c.real(section + ".momentum");
    t.schedule.milestones = c.counts(section + ".milestones");
    t.schedule.factor = c.real(section + ".lr_factor");
    t.weight_decay = c.real(section + ".weight_decay");
    t.seed = c.count(section + ".seed");
    t.eval_train_robust = c.flag(section + ".eval_train_robust");
    if (attack) {
        t.train_attack = attack;
        t.eval_attack = attack->deterministic();
    }
    t.threads = threads;
    t.validate();
    return t;
}

inline CalibGrid calib_grid(const Config& c) {
    CalibGrid g{c.reals("calibrate.temperatures"), c.reals("calibrate.lambdas")};
    g.validate();
    return g;
}

/// Train, test and validation splits drawn from one oracle.
struct Splits {
    OracleDataset train, test, val;
};

inline Splits make_splits(const Config& c) {
    Splits s;
    s.train = generate(generator_config(c));
    s.test = sample_from_oracle(s.train.oracle, c.count("data.test_per_class"), c.count("data.test_seed"),
                                {s.train.meta.generator + ":test", s.train.meta.params, 0});
    s.val = sample_from_oracle(s.train.oracle, c.count("data.val_per_class"), c.count("data.val_seed"),
                               {s.train.meta.generator + ":val", s.train.meta.params, 0});
    return s;
}

// ---------------------------------------------------------------------------
// Outputs

/// One best/last/diff line of the summary table.
struct SummaryRow {
    std::string method;
    /// test_rob | test_std (accuracies) or test_err (an error rate)
    std::string metric;
    double temperature = kNaN;
    double lambda = kNaN;
    double eps = kNaN;
    RunSummary summary;

    bool is_error() const { return metric == "test_err"; }
    /// How much worse the last epoch is than the best one, >= 0.
    double regression() const { return is_error() ? summary.last - summary.best : summary.diff(); }
};

inline constexpr const char* kSummaryHeader = "method,metric,eps,T,lambda,best_epoch,best,last,diff";

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
    os << kSummaryHeader << '\n';
    for (const auto& r : rows)
        os << r.method << ',' << r.metric << ',' << advnoise::detail::fmt_value(r.eps) << ',' << advnoise::detail::fmt_value(r.temperature)
           << ',' << advnoise::detail::fmt_value(r.lambda) << ',' << r.summary.best_epoch << ','
           << advnoise::detail::fmt_value(r.summary.best) << ',' << advnoise::detail::fmt_value(r.summary.last) << ','
           << advnoise::detail::fmt_value(r.regression()) << '\n';
}

/// Test error summary: best is the lowest error (earliest on ties).
inline RunSummary summarize_test_error(const std::vector<EpochLog>& logs) {
    const auto acc = summarize(logs, &EpochLog::test_std);
    return {acc.best_epoch, 1.0 - acc.best, 1.0 - acc.last};
}

/// Collects the files one experiment writes under its run directory.
class RunDir {
  public:
    explicit RunDir(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    const std::filesystem::path& path() const noexcept { return dir_; }
    const std::vector<std::string>& artifacts() const noexcept { return artifacts_; }

    std::filesystem::path file(const std::string& name) {
        if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
        return dir_ / name;
    }

    void write(const std::string& name, const std::function<void(std::ostream&)>& fn) {
        const auto p = file(name);
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        fn(os);
        if (!os) throw std::runtime_error("write failed for " + p.string());
    }

  private:
    std::filesystem::path dir_;
    std::vector<std::string> artifacts_;
};

/// Long-format curves "series,step,value", one series per (run, column).
class Curves {
  public:
    void add(const std::string& run, const std::vector<EpochLog>& logs) {
        auto put = [&](const std::string& col, std::size_t step, double v) {
            if (std::isnan(v)) return;
            os_ << run << '_' << col << ',' << step << ',' << advnoise::detail::fmt_value(v) << '\n';
        };
        for (const auto& l : logs) {
            put("train_std", l.epoch, l.train_std);
            put("train_rob", l.epoch, l.train_rob);
            put("test_std", l.epoch, l.test_std);
            put("test_rob", l.epoch, l.test_rob);
            put("test_err", l.epoch, std::isnan(l.test_std) ? kNaN : 1.0 - l.test_std);
            put("train_nll", l.epoch, l.train_nll);
            if (l.noise) {
                put("p_e", l.epoch, l.noise->p_e);
                put("mean_tv", l.epoch, l.noise->mean_tv);
            }
        }
    }

    void write(std::ostream& os) const { os << "series,step,value\n" << os_.str(); }

  private:
    std::ostringstream os_;
};

struct Context {
    RunDir& dir;
    unsigned threads = 1;
    /// Progress lines; not part of any artifact.
    std::ostream* log = nullptr;

    void note(const std::string& msg) const {
        if (log) *log << msg << std::endl;
    }
};

struct ExperimentResult {
    std::vector<SummaryRow> summary;
    std::optional<CalibResult> calibration;
    std::optional<CalibResult> tv_oracle;
};

namespace detail {

inline void save_run(Context& ctx, Curves& curves, const std::string& name, const TrainResult& r) {
    ctx.dir.write(name + "_epochs.csv", [&](std::ostream& os) { write_epoch_csv(os, r.logs); });
    curves.add(name, r.logs);
}

inline void write_calibration(Context& ctx, const std::string& name, const CalibResult& r, const CalibGrid& grid) {
    ctx.dir.write(name + "_surface.csv", [&](std::ostream& os) { write_surface_csv(os, r, grid); });
    ctx.dir.write(name + "_surface_long.csv", [&](std::ostream& os) { write_surface_long_csv(os, r, grid, name); });
}

inline void write_choice(std::ostream& os, const std::string& tag, const CalibResult& r) {
    os << tag << ',' << advnoise::detail::fmt_value(r.t_star) << ',' << advnoise::detail::fmt_value(r.lambda_star) << ',' << advnoise::detail::fmt_value(r.minimum()) << '\n';
}

/// Adversarial training baseline shared by mitigate and fig2_gridsearch.
struct Baseline {
    Splits data;
    Network init;
    AttackConfig attack;
    TrainConfig train;
    TrainResult at;
};

inline Baseline adversarial_baseline(const Config& c, Context& ctx, Curves& curves) {
    Baseline b;
    b.data = make_splits(c);
    b.init = Network::init(network_spec(c, b.data.train.dim(), b.data.train.classes), c.count("model.seed"));
    b.attack = attack_config(c, b.data.train);
    b.train = train_config(c, "train", b.attack, ctx.threads);
    ctx.note("adversarial training baseline");
    b.at = train_adversarial(b.init, b.data.train, b.data.test, b.train);
    save_run(ctx, curves, "at", b.at);
    save_checkpoint(b.at.best_net, ctx.dir.file("at_best.ckpt").string());
    save_checkpoint(b.at.final_net, ctx.dir.file("at_last.ckpt").string());
    return b;
}

/// Calibrates (T, lambda) for the baseline's best checkpoint as teacher.
inline std::pair<CalibResult, CalibResult> calibrate_teacher(const Config& c, Context& ctx, const Baseline& b) {
    const auto grid = calib_grid(c);
    ctx.note("calibrating on the adversarial validation set");
    const auto adv_val = build_adv_validation(b.at.best_net, b.data.val, b.attack.deterministic(), c.count("calibrate.seed"));
    const auto& mode = c.str("calibrate.mode");
    CalibResult nll;
    if (mode == "surrogate")
        nll = calibrate_surrogate(b.at.best_net, b.at.final_net, adv_val, grid);
    else if (mode == "onehot")
        nll = calibrate_onehot(b.at.best_net, adv_val, grid);
    else
        throw ConfigError("unknown calibrate.mode '" + mode + "' (expected surrogate|onehot)");
    const auto tv = tv_oracle_search(b.at.best_net, adv_val, grid);
    write_calibration(ctx, "nll", nll, grid);
    write_calibration(ctx, "tv", tv, grid);
    ctx.dir.write("calibration.csv", [&](std::ostream& os) {
        os << "criterion,T,lambda,objective\n";
        write_choice(os, "nll", nll);
        write_choice(os, "tv_oracle", tv);
    });
    return {nll, tv};
}

inline SummaryRow rob_row(const std::string& method, const TrainResult& r, double T = kNaN, double lambda = kNaN) {
    return {method, "test_rob", T, lambda, kNaN, summarize(r.logs, &EpochLog::test_rob)};
}

}  // namespace detail

/// Replaces every seed key (*.seed, *_seed) by master + its index in sorted
/// key order, so one number reseeds a whole run.
inline Config with_master_seed(Config c, std::uint64_t master) {
    std::uint64_t i = 0;
    for (const auto& k : c.keys()) {
        const bool is_seed = k.size() >= 5 && (k.ends_with(".seed") || k.ends_with("_seed"));
        if (is_seed) c.set(k, std::to_string(master + i++));
    }
    return c;
}

/// The record every run directory carries: manifest.ini. Its [run] section
/// describes the invocation; every other section is the resolved config, so
/// `--config manifest.ini` reproduces the run.
struct RunManifest {
    std::string command;
    Config config;
    /// The --seed master seed, or "config" when the config's own seeds ran.
    std::string seed = "config";
    std::vector<std::string> artifacts;
    std::string version;
    double wall_clock_seconds = 0.0;

    static constexpr const char* kFileName = "manifest.ini";

    void write(std::ostream& os) const {
        auto join = [](const std::vector<std::string>& v) {
            std::string out;
            for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
            return out;
        };
        Config c = config;
        c.set("run.command", command);
        c.set("run.seed", seed);
        c.set("run.artifacts", join(artifacts));
        c.set("run.version", version);
        std::ostringstream wall;
        wall << std::fixed << std::setprecision(3) << wall_clock_seconds;
        c.set("run.wall_clock_seconds", wall.str());
        c.write(os);
    }

    /// The config sections of a manifest (or of any config file) without the
    /// [run] record.
    static Config strip_run(const Config& c) {
        Config out;
        for (const auto& k : c.keys())
            if (k.rfind("run.", 0) != 0) out.set(k, c.str(k));
        return out;
    }
};

// ---------------------------------------------------------------------------
// Presets

/// Adversarial training, then KD-AT against the best checkpoint with the
/// calibrated rectifier (and optionally a fixed-parameter KD baseline).
inline Config mitigate_defaults() {
    auto c = base_defaults();
    c.merge(calibration_defaults());
    c.set("kd.attack_teacher", "false");
    c.set("kd.fixed_baseline", "true");
    c.set("kd.fixed_temperature", "2");
    c.set("kd.fixed_lambda", "0.5");
    return c;
}

inline ExperimentResult run_mitigate(const Config& c, Context& ctx) {
    Curves curves;
    ExperimentResult out;
    auto base = detail::adversarial_baseline(c, ctx, curves);
    out.summary.push_back(detail::rob_row("at", base.at));
    auto [nll, tv] = detail::calibrate_teacher(c, ctx, base);
    auto kd_cfg = base.train;
    kd_cfg.attack_teacher = c.flag("kd.attack_teacher");

    ctx.note("KD-AT with calibrated rectifier");
    const auto kd = train_kd(base.init, base.at.best_net, base.data.train, base.data.test, kd_cfg, nll.params());
    detail::save_run(ctx, curves, "kd_auto", kd);
    out.summary.push_back(detail::rob_row("kd_auto", kd, nll.t_star, nll.lambda_star));

    if (c.flag("kd.fixed_baseline")) {
        const RectifierParams fixed{c.real("kd.fixed_temperature"), c.real("kd.fixed_lambda")};
        ctx.note("KD-AT with fixed rectifier");
        const auto kdf = train_kd(base.init, base.at.best_net, base.data.train, base.data.test, kd_cfg, fixed);
        detail::save_run(ctx, curves, "kd_fixed", kdf);
        out.summary.push_back(detail::rob_row("kd_fixed", kdf, fixed.temperature, fixed.lambda));
    }
    ctx.dir.write("summary.csv", [&](std::ostream& os) { write_summary_csv(os, out.summary); });
    ctx.dir.write("curves.csv", [&](std::ostream& os) { curves.write(os); });
    out.calibration = nll;
    out.tv_oracle = tv;
    return out;
}

/// The validation NLL surface over (T, lambda), the TV surface against the
/// oracle, and KD-AT runs along one T slice and one lambda slice.
inline Config gridsearch_defaults() {
    auto c = base_defaults();
    c.merge(calibration_defaults());
    c.set("grid.slice_temperatures", "1,2,5");
    c.set("grid.slice_lambda", "0.8");
    c.set("grid.slice_lambdas", "0,0.5,1");
    c.set("grid.slice_temperature", "2");
    return c;
}

inline ExperimentResult run_gridsearch(const Config& c, Context& ctx) {
    Curves curves;
    ExperimentResult out;
    auto base = detail::adversarial_baseline(c, ctx, curves);
    out.summary.push_back(detail::rob_row("at", base.at));
    auto [nll, tv] = detail::calibrate_teacher(c, ctx, base);

    std::vector<RectifierParams> slice;
    for (double T : c.reals("grid.slice_temperatures")) slice.push_back({T, c.real("grid.slice_lambda")});
    for (double l : c.reals("grid.slice_lambdas")) slice.push_back({c.real("grid.slice_temperature"), l});
    for (const auto& p : slice) {
        std::ostringstream name;
        name << "kd_T" << p.temperature << "_l" << p.lambda;
        ctx.note("KD-AT slice run " + name.str());
        const auto r = train_kd(base.init, base.at.best_net, base.data.train, base.data.test, base.train, p);
        detail::save_run(ctx, curves, name.str(), r);
        out.summary.push_back(detail::rob_row(name.str(), r, p.temperature, p.lambda));
    }
    ctx.dir.write("summary.csv", [&](std::ostream& os) { write_summary_csv(os, out.summary); });
    ctx.dir.write("curves.csv", [&](std::ostream& os) { curves.write(os); });
    out.calibration = nll;
    out.tv_oracle = tv;
    return out;
}

/// Settings shared by the two augmentation presets: a small training set,
/// Adam at a constant rate, long standard training.
inline Config augmentation_defaults() {
    auto c = base_defaults();
    c.set("data.dim", "20");
    c.set("data.separation", "3");
    c.set("data.n_per_class", "100");
    c.set("train.optimizer", "adam");
    c.set("train.lr", "0.001");
    c.set("train.milestones", "");
    c.set("train.batch_size", "128");
    c.set("train.epochs", "300");
    c.set("augment.eps", "0,0.3");
    c.set("augment.seed", "31");
    c.set("augment.step_fraction", "0.25");
    return c;
}

inline Config fixed_adv_defaults() {
    auto c = augmentation_defaults();
    // The classifier that crafts the fixed perturbations.
    c.set("pretrain.epochs", "30");
    c.set("pretrain.batch_size", "32");
    c.set("pretrain.optimizer", "sgd");
    c.set("pretrain.lr", "0.05");
    c.set("pretrain.momentum", "0.9");
    c.set("pretrain.milestones", "");
    c.set("pretrain.lr_factor", "0.1");
    c.set("pretrain.weight_decay", "0");
    c.set("pretrain.seed", "7");
    c.set("pretrain.eval_train_robust", "false");
    return c;
}

inline Config gaussian_defaults() { return augmentation_defaults(); }

/// Standard training on a training set perturbed once, for every radius in
/// augment.eps. `adversarial` picks PGD against a pretrained adversarially
/// trained net; otherwise Gaussian noise of matched linf radius.
inline ExperimentResult run_augmentation(const Config& c, Context& ctx, bool adversarial) {
    Curves curves;
    ExperimentResult out;
    const auto data = make_splits(c);
    const auto spec = network_spec(c, data.train.dim(), data.train.classes);
    const auto init = Network::init(spec, c.count("model.seed"));
    const auto train = train_config(c, "train", std::nullopt, ctx.threads);

    std::optional<Network> crafter;
    if (adversarial) {
        ctx.note("pretraining the perturbing classifier");
        const auto pre_attack = attack_config(c, data.train);
        const auto pre_cfg = train_config(c, "pretrain", pre_attack, ctx.threads);
        auto pre = train_adversarial(init, data.train, data.test, pre_cfg);
        crafter = pre.final_net;
        save_checkpoint(*crafter, ctx.dir.file("crafter.ckpt").string());
    }

    std::ostringstream noise;
    noise << kNoiseReportHeader << '\n';
    for (double eps : c.reals("augment.eps")) {
        std::ostringstream name;
        name << (adversarial ? "adv" : "gauss") << "_eps" << eps;
        ctx.note("standard training on " + name.str());
        OracleDataset augmented;
        if (adversarial && eps > 0.0) {
            auto craft = attack_config(c, data.train, eps).deterministic();
            craft.step_size = eps * c.real("augment.step_fraction");
            augmented = build_fixed_adversarial(data.train, *crafter, craft, c.count("augment.seed"));
        } else if (adversarial) {
            augmented = data.train;
        } else {
            augmented = build_gaussian_augmented(data.train, eps, c.count("augment.seed"));
        }
        if (augmented.has_truth())
            write_noise_report_row(noise, name.str(),
                                   mismatch_report(one_hot_labels(augmented.assigned, augmented.classes),
                                                   *augmented.true_dist, augmented.assigned));
        const auto r = train_standard(init, augmented, data.test, train);
        detail::save_run(ctx, curves, name.str(), r);
        out.summary.push_back({name.str(), "test_err", kNaN, kNaN, eps, summarize_test_error(r.logs)});
    }
    ctx.dir.write("summary.csv", [&](std::ostream& os) { write_summary_csv(os, out.summary); });
    ctx.dir.write("label_noise.csv", [&](std::ostream& os) { os << noise.str(); });
    ctx.dir.write("curves.csv", [&](std::ostream& os) { curves.write(os); });
    return out;
}

/// Long adversarial training on a small subset with Adam at a constant rate;
/// the curves show whether robust test error rises and falls again.
inline Config double_descent_defaults() {
    auto c = base_defaults();
    c.set("data.n_per_class", "50");
    c.set("train.optimizer", "adam");
    c.set("train.lr", "0.001");
    c.set("train.milestones", "");
    c.set("train.batch_size", "32");
    c.set("train.epochs", "400");
    return c;
}

inline ExperimentResult run_double_descent(const Config& c, Context& ctx) {
    Curves curves;
    ExperimentResult out;
    const auto data = make_splits(c);
    const auto init = Network::init(network_spec(c, data.train.dim(), data.train.classes), c.count("model.seed"));
    const auto attack = attack_config(c, data.train);
    const auto cfg = train_config(c, "train", attack, ctx.threads);
    ctx.note("long adversarial training");
    const auto r = train_adversarial(init, data.train, data.test, cfg);
    detail::save_run(ctx, curves, "at", r);
    out.summary.push_back(detail::rob_row("at", r));
    out.summary.push_back({"at", "test_std", kNaN, kNaN, kNaN, summarize(r.logs, &EpochLog::test_std)});
    ctx.dir.write("summary.csv", [&](std::ostream& os) { write_summary_csv(os, out.summary); });
    ctx.dir.write("curves.csv", [&](std::ostream& os) { curves.write(os); });
    return out;
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"fig2_gridsearch", "fig3_fixed_adv", "fig4_gaussian", "mitigate",
                                                "double_descent"};
    return names;
}

inline Config preset_defaults(const std::string& preset) {
    if (preset == "mitigate") return mitigate_defaults();
    if (preset == "fig2_gridsearch") return gridsearch_defaults();
    if (preset == "fig3_fixed_adv") return fixed_adv_defaults();
    if (preset == "fig4_gaussian") return gaussian_defaults();
    if (preset == "double_descent") return double_descent_defaults();
    throw ConfigError("unknown experiment preset '" + preset + "'");
}

inline ExperimentResult run_experiment(const std::string& preset, const Config& c, Context& ctx) {
    c.require_known(preset_defaults(preset).keys());
    if (preset == "mitigate") return run_mitigate(c, ctx);
    if (preset == "fig2_gridsearch") return run_gridsearch(c, ctx);
    if (preset == "fig3_fixed_adv") return run_augmentation(c, ctx, true);
    if (preset == "fig4_gaussian") return run_augmentation(c, ctx, false);
    if (preset == "double_descent") return run_double_descent(c, ctx);
    throw ConfigError("unknown experiment preset '" + preset + "'");
}

}  // namespace advnoise::experiments
