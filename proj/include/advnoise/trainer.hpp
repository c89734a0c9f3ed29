#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "advnoise/attacks.hpp"
#include "advnoise/datagen.hpp"
#include "advnoise/labels.hpp"
#include "advnoise/net.hpp"

namespace advnoise {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.1;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

/// Constant, or multiplied by `factor` at every milestone epoch (1-based).
struct LrSchedule {
    std::vector<std::size_t> milestones;
    double factor = 0.1;

    double at(std::size_t epoch, double base) const {
        double lr = base;
        for (auto m : milestones)
            if (epoch > m) lr *= factor;
        return lr;
    }
};

enum class CheckpointPolicy { best_robust, last, every_k };

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    OptimizerConfig optimizer;
    LrSchedule schedule;
    double weight_decay = 0.0;
    std::uint64_t seed = 1;
    std::optional<AttackConfig> eval_attack;
    std::optional<AttackConfig> train_attack;
    CheckpointPolicy checkpoint = CheckpointPolicy::best_robust;
    std::size_t checkpoint_every = 10;
    /// Checkpoints are written here when non-empty.
    std::string run_dir;
    /// KD only: craft x' against the teacher instead of the student.
    bool attack_teacher = false;
    /// Also run the evaluation attack on the training set every epoch.
    bool eval_train_robust = true;
    /// Worker threads for per-example attacks and evaluation. Results are
    /// reduced in index order, so the output does not depend on this value.
    unsigned threads = 1;

    void validate() const {
        if (epochs < 1) throw ParameterError("epochs must be >= 1");
        if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
        if (!(optimizer.lr > 0.0)) throw ParameterError("learning rate must be > 0");
        if (!(weight_decay >= 0.0)) throw ParameterError("weight decay must be >= 0");
        if (eval_attack) eval_attack->validate();
        if (train_attack) train_attack->validate();
        if (checkpoint == CheckpointPolicy::every_k && checkpoint_every < 1)
            throw ParameterError("checkpoint_every must be >= 1");
    }
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct EpochLog {
    std::size_t epoch = 0;
    double train_std = kNaN;
    double train_rob = kNaN;
    double test_std = kNaN;
    double test_rob = kNaN;
    double train_nll = kNaN;
    double test_nll = kNaN;
    /// Noise of the labels actually trained on, measured at the training
    /// inputs (x' under attack) against the oracle truth.
    std::optional<NoiseReport> noise;
};

struct EvalResult {
    double std_acc = 0.0;
    double rob_acc = kNaN;
    double nll = 0.0;
};

struct TrainResult {
    Network final_net;
    Network best_net;
    std::size_t best_epoch = 0;
    std::vector<EpochLog> logs;
};

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
}

}  // namespace detail

/// Clean accuracy and NLL against the assigned labels and, with an attack,
/// the fraction of examples classified correctly both clean and under a
/// deterministic (no random start) PGD attack.
inline EvalResult evaluate(const Network& net, const OracleDataset& ds, const std::optional<AttackConfig>& attack,
                           unsigned threads = 1) {
    const std::size_t n = ds.size();
    if (n == 0) throw ParameterError("evaluate: empty dataset");
    std::vector<char> clean_ok(n), rob_ok(n);
    std::vector<double> nll(n);
    const auto cfg = attack ? std::optional<AttackConfig>(attack->deterministic()) : std::nullopt;
    detail::parallel_for(n, threads, [&](std::size_t i) {
        const auto probs = softmax_t(forward(net, ds.x(i)));
        clean_ok[i] = probs.argmax() == ds.assigned[i];
        nll[i] = -std::log(std::max(probs[ds.assigned[i]], kProbFloor));
        if (cfg) {
            if (!clean_ok[i] || cfg->epsilon == 0.0) {
                rob_ok[i] = clean_ok[i];
            } else {
                const auto adv = pgd(net, ds.x(i), ds.assigned[i], *cfg);
                rob_ok[i] = argmax(forward(net, adv.x_prime)) == ds.assigned[i];
            }
        }
    });
    EvalResult r;
    double c = 0.0, rb = 0.0, l = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c += clean_ok[i];
        rb += rob_ok[i];
        l += nll[i];
    }
    r.std_acc = c / static_cast<double>(n);
    r.nll = l / static_cast<double>(n);
    if (cfg) r.rob_acc = rb / static_cast<double>(n);
    return r;
}

namespace detail {

class Optimizer {
  public:
    Optimizer(const OptimizerConfig& cfg, const Network& net) : cfg_(cfg), m_(zero_like(net)), v_(zero_like(net)) {}

    void step(Network& net, const std::vector<Layer>& grads, double lr, double weight_decay) {
        ++t_;
        auto& layers = net.layers();
        for (std::size_t l = 0; l < layers.size(); ++l) {
            update(layers[l].weight.data(), grads[l].weight.data(), m_[l].weight.data(), v_[l].weight.data(), lr,
                   weight_decay);
            update(layers[l].bias, grads[l].bias, m_[l].bias, v_[l].bias, lr, 0.0);
        }
    }

  private:
    void update(std::span<double> w, std::span<const double> g, std::span<double> m, std::span<double> v, double lr,
                double wd) {
        if (cfg_.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double grad = g[i] + wd * w[i];
                m[i] = cfg_.momentum * m[i] + grad;
                w[i] -= lr * m[i];
            }
        } else {
            const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
            const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double grad = g[i] + wd * w[i];
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad * grad;
                w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_eps);
            }
        }
    }

    OptimizerConfig cfg_;
    std::vector<Layer> m_, v_;
    std::size_t t_ = 0;
};

/// Supplies the training target for example i at (possibly perturbed) x.
using TargetFn = std::function<LabelDistribution(std::size_t, std::span<const double>)>;
/// Produces the training input for example i; `lane` is that example's
/// private random stream for this epoch.
using InputFn = std::function<Vector(const Network&, std::size_t, Rng&)>;

inline double score_for_selection(const EpochLog& log) { return std::isnan(log.test_rob) ? log.test_std : log.test_rob; }

inline TrainResult train_loop(Network net, const OracleDataset& train, const OracleDataset& test, const TrainConfig& cfg,
                              const InputFn& make_input, const TargetFn& make_target) {
    cfg.validate();
    train.validate();
    test.validate();
    if (train.size() == 0) throw ParameterError("training set is empty");
    if (train.dim() != net.input_dim() || train.classes != net.classes())
        throw ShapeError("dataset does not match the network's input/class dimensions");

    if (!cfg.run_dir.empty()) std::filesystem::create_directories(cfg.run_dir);
    auto ckpt = [&](const std::string& name, const Network& n) {
        if (!cfg.run_dir.empty()) save_checkpoint(n, (std::filesystem::path(cfg.run_dir) / name).string());
    };

    const std::size_t N = train.size();
    Optimizer opt(cfg.optimizer, net);
    const Rng shuffle_root(cfg.seed, 0);
    const Rng attack_root(cfg.seed, 1);
    std::vector<std::size_t> order(N);

    TrainResult result;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < N; ++i) order[i] = i;
        Rng shuffler = shuffle_root.split(epoch);
        shuffler.shuffle(order);
        const Rng epoch_attack = attack_root.split(epoch);
        const double lr = cfg.schedule.at(epoch, cfg.optimizer.lr);

        double loss_sum = 0.0;
        NoiseReport noise;
        const bool track_noise = static_cast<bool>(train.oracle) || train.has_truth();
        double tv_sum = 0.0, q_sum = 0.0;

        for (std::size_t start = 0; start < N; start += cfg.batch_size) {
            const std::size_t end = std::min(N, start + cfg.batch_size);
            const std::size_t B = end - start;
            std::vector<Vector> inputs(B);
            std::vector<std::optional<LabelDistribution>> targets(B);
            parallel_for(B, cfg.threads, [&](std::size_t b) {
                const std::size_t i = order[start + b];
                Rng lane = epoch_attack.split(i);
                inputs[b] = make_input(net, i, lane);
                targets[b] = make_target(i, inputs[b]);
            });
            auto grads = zero_like(net);
            const double w = 1.0 / static_cast<double>(B);
            for (std::size_t b = 0; b < B; ++b) {
                const std::size_t i = order[start + b];
                const double loss = accumulate_gradients(net, inputs[b], targets[b]->probs(), grads, w);
                if (!std::isfinite(loss))
                    throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                                       ", example " + std::to_string(i));
                loss_sum += loss;
                if (track_noise) {
                    const LabelDistribution truth =
                        train.oracle ? train.oracle->posterior(inputs[b]) : (*train.true_dist)[i];
                    tv_sum += tv_distance(*targets[b], truth);
                    q_sum += truth[train.assigned[i]];
                }
            }
            opt.step(net, grads, lr, cfg.weight_decay);
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_nll = loss_sum / static_cast<double>(N);
        if (track_noise) {
            noise.n = N;
            noise.q = q_sum / static_cast<double>(N);
            noise.p_e = 1.0 - noise.q;
            noise.mean_tv = tv_sum / static_cast<double>(N);
            log.noise = noise;
        }
        const auto tr = evaluate(net, train, cfg.eval_train_robust ? cfg.eval_attack : std::nullopt, cfg.threads);
        log.train_std = tr.std_acc;
        log.train_rob = tr.rob_acc;
        if (test.size() > 0) {
            const auto te = evaluate(net, test, cfg.eval_attack, cfg.threads);
            log.test_std = te.std_acc;
            log.test_rob = te.rob_acc;
            log.test_nll = te.nll;
        }
        result.logs.push_back(log);

        const double score = score_for_selection(log);
        if (score > best_score || epoch == 1) {
            best_score = score;
            result.best_net = net;
            result.best_epoch = epoch;
            if (cfg.checkpoint == CheckpointPolicy::best_robust) ckpt("best.ckpt", net);
        }
        if (cfg.checkpoint == CheckpointPolicy::every_k && epoch % cfg.checkpoint_every == 0)
            ckpt("epoch_" + std::to_string(epoch) + ".ckpt", net);
    }
    ckpt("last.ckpt", net);
    result.final_net = std::move(net);
    return result;
}

}  // namespace detail

/// Empirical risk minimisation on the assigned one-hot labels.
inline TrainResult train_standard(Network net, const OracleDataset& train, const OracleDataset& test,
                                  const TrainConfig& cfg) {
    auto input = [&](const Network&, std::size_t i, Rng&) { return Vector(train.x(i).begin(), train.x(i).end()); };
    auto target = [&](std::size_t i, std::span<const double>) {
        return LabelDistribution::one_hot(train.assigned[i], train.classes);
    };
    return detail::train_loop(std::move(net), train, test, cfg, input, target);
}

/// Adversarial training: every step trains on PGD examples crafted against the
/// current network, labelled with the inherited one-hot label.
inline TrainResult train_adversarial(Network net, const OracleDataset& train, const OracleDataset& test,
                                     const TrainConfig& cfg) {
    if (!cfg.train_attack) throw ParameterError("train_adversarial requires a train_attack");
    const AttackConfig atk = *cfg.train_attack;
    auto input = [&](const Network& current, std::size_t i, Rng& lane) {
        return pgd(current, train.x(i), train.assigned[i], atk, &lane).x_prime;
    };
    auto target = [&](std::size_t i, std::span<const double>) {
        return LabelDistribution::one_hot(train.assigned[i], train.classes);
    };
    return detail::train_loop(std::move(net), train, test, cfg, input, target);
}

/// Adversarial training against a fixed teacher's rectified probabilities:
/// target = lambda * softmax(teacher(x') / T) + (1 - lambda) * one_hot(y).
/// x' is crafted against the student unless cfg.attack_teacher is set.
inline TrainResult train_kd(Network student, const Network& teacher, const OracleDataset& train,
                            const OracleDataset& test, const TrainConfig& cfg, const RectifierParams& params) {
    if (!cfg.train_attack) throw ParameterError("train_kd requires a train_attack");
    params.validate();
    if (teacher.input_dim() != student.input_dim() || teacher.classes() != student.classes())
        throw ShapeError("teacher and student shapes differ");
    const AttackConfig atk = *cfg.train_attack;
    auto input = [&](const Network& current, std::size_t i, Rng& lane) {
        const Network& victim = cfg.attack_teacher ? teacher : current;
        return pgd(victim, train.x(i), train.assigned[i], atk, &lane).x_prime;
    };
    auto target = [&](std::size_t i, std::span<const double> x) {
        return rectify(forward(teacher, x), train.assigned[i], params);
    };
    return detail::train_loop(std::move(student), train, test, cfg, input, target);
}

// ---------------------------------------------------------------------------

inline constexpr const char* kEpochCsvHeader = "epoch,train_std,train_rob,test_std,test_rob,train_nll,test_nll,p_e,q,mean_tv";

namespace detail {

inline std::string fmt_value(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

}  // namespace detail

inline void write_epoch_csv(std::ostream& os, const std::vector<EpochLog>& logs) {
    using detail::fmt_value;
    os << kEpochCsvHeader << '\n';
    for (const auto& l : logs) {
        os << l.epoch << ',' << fmt_value(l.train_std) << ',' << fmt_value(l.train_rob) << ',' << fmt_value(l.test_std)
           << ',' << fmt_value(l.test_rob) << ',' << fmt_value(l.train_nll) << ',' << fmt_value(l.test_nll) << ',';
        if (l.noise)
            os << fmt_value(l.noise->p_e) << ',' << fmt_value(l.noise->q) << ',' << fmt_value(l.noise->mean_tv);
        else
            os << ",,";
        os << '\n';
    }
}

/// Best-vs-last summary of one metric over a run.
struct RunSummary {
    std::size_t best_epoch = 0;
    double best = 0.0;
    double last = 0.0;
    double diff() const { return best - last; }
};

/// Summarises a metric column (e.g. test_rob) by its best epoch (earliest on
/// ties) and its final value.
inline RunSummary summarize(const std::vector<EpochLog>& logs, double EpochLog::*metric) {
    if (logs.empty()) throw ParameterError("summarize: no epochs");
    RunSummary s;
    s.best = -std::numeric_limits<double>::infinity();
    for (const auto& l : logs)
        if (l.*metric > s.best) {
            s.best = l.*metric;
            s.best_epoch = l.epoch;
        }
    s.last = logs.back().*metric;
    return s;
}

}  // namespace advnoise
