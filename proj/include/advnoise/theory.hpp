#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "advnoise/attacks.hpp"
#include "advnoise/labels.hpp"
#include "advnoise/linalg.hpp"
#include "advnoise/net.hpp"

namespace advnoise::theory {

/// Outcome of one verification suite. `min_margin` is the smallest observed
/// (lhs - rhs) of the checked inequality; negative means a violation.
struct CheckReport {
    std::string name;
    std::size_t cases = 0;
    std::size_t skipped = 0;
    std::size_t failures = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    /// Suite-specific scalar (violation rate, pass fraction, ...).
    double statistic = 0.0;
    /// Per-case margins, kept for the CSV dump.
    std::vector<double> margins;

    bool passed() const { return failures == 0 && cases > 0; }

    void record(double margin, bool ok, bool keep = true) {
        ++cases;
        if (!ok) ++failures;
        min_margin = std::min(min_margin, margin);
        if (keep) margins.push_back(margin);
    }
};

// ---------------------------------------------------------------------------
// Distribution mismatch under the perturbation x' = x - eps * g / |g|,
// g = grad f(x)_y, on a two-class quadratic bowl where everything is closed
// form.

/// f(x)_1 = 1 - (a/2)|x - center|^2 and f(x)_2 = 1 - f(x)_1, valid for
/// |x - center| <= radius <= sqrt(2/a). Its Hessian is -a I, so both
/// eigenvalue magnitudes (sigma_m, sigma_M) equal a.
struct AnalyticClassifier {
    Vector center;
    double curvature = 1.0;
    double radius = 1.0;

    void validate() const {
        if (center.empty()) throw ParameterError("bowl needs dimension >= 1");
        if (!(curvature > 0.0)) throw ParameterError("bowl curvature must be > 0");
        if (!(radius > 0.0 && radius <= std::sqrt(2.0 / curvature) + 1e-15))
            throw ParameterError("bowl radius must lie in (0, sqrt(2/a)]");
    }

    std::size_t dim() const { return center.size(); }

    double prob(std::span<const double> x) const {
        double sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - center[i]) * (x[i] - center[i]);
        return 1.0 - 0.5 * curvature * sq;
    }

    Vector grad(std::span<const double> x) const {
        Vector g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = -curvature * (x[i] - center[i]);
        return g;
    }

    double distance(std::span<const double> x) const {
        Vector d(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - center[i];
        return norm_l2(d);
    }
};

/// One evaluated (x, eps) case of the mismatch bound.
struct MismatchCase {
    double tv = 0.0;
    /// 0.5 * (eps |g| - (sigma_M / 2) eps^2 c), c = 1 (l2) or sqrt(d) (linf).
    double gradient_bound = 0.0;
    /// (eps/2)(1 - f(x)_y)(sigma_m / L) - (eps^2/4) sigma_M c.
    double lipschitz_bound = 0.0;
    double lipschitz = 0.0;
    bool admissible = true;
};

/// Evaluates both forms of the bound at x. L is the tight local Lipschitz
/// constant of f(.)_1 over the eps-ball around x in the attack norm (the dual
/// norm of the gradient, maximised over the ball).
inline MismatchCase mismatch_case(const AnalyticClassifier& clf, std::span<const double> x, double eps, Norm norm) {
    MismatchCase c;
    const Vector g = clf.grad(x);
    const double a = clf.curvature;
    const double d = static_cast<double>(clf.dim());
    const double gnorm = norm == Norm::l2 ? norm_l2(g) : norm_linf(g);
    if (eps == 0.0) {
        c.lipschitz = a * clf.distance(x);
        return c;
    }
    if (gnorm == 0.0) {
        c.admissible = false;
        return c;
    }
    Vector xp(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) xp[i] = x[i] - eps * g[i] / gnorm;
    if (clf.distance(xp) > clf.radius) {
        c.admissible = false;
        return c;
    }
    c.tv = std::abs(clf.prob(x) - clf.prob(xp));
    const double dim_factor = norm == Norm::l2 ? 1.0 : std::sqrt(d);
    if (norm == Norm::l2) {
        c.lipschitz = a * (clf.distance(x) + eps);
    } else {
        Vector u(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) u[i] = x[i] - clf.center[i];
        c.lipschitz = a * (norm_l1(u) + d * eps);
    }
    c.gradient_bound = 0.5 * (eps * gnorm - 0.5 * a * eps * eps * dim_factor);
    c.lipschitz_bound =
        0.5 * eps * (1.0 - clf.prob(x)) * (a / c.lipschitz) - 0.25 * eps * eps * a * dim_factor;
    return c;
}

/// Samples n_points inputs uniformly by radius inside the valid region and
/// checks TV >= bound - 1e-9 (both bound forms) for every eps in eps_list.
/// Cases whose x' leaves the region, or with a zero gradient, are skipped.
inline CheckReport check_mismatch_bound(const AnalyticClassifier& clf, std::span<const double> eps_list,
                                        std::size_t n_points, std::uint64_t seed, Norm norm) {
    clf.validate();
    CheckReport rep;
    rep.name = std::string("mismatch_") + to_string(norm);
    Rng rng(seed);
    for (std::size_t p = 0; p < n_points; ++p) {
        Vector dir(clf.dim());
        for (auto& v : dir) v = rng.normal();
        const double n = norm_l2(dir);
        const double r = clf.radius * rng.uniform();
        Vector x(clf.dim());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = clf.center[i] + r * dir[i] / n;
        for (double eps : eps_list) {
            const auto c = mismatch_case(clf, x, eps, norm);
            if (!c.admissible) {
                ++rep.skipped;
                continue;
            }
            const double margin = std::min(c.tv - c.gradient_bound, c.tv - c.lipschitz_bound);
            rep.record(margin, margin >= -1e-9);
        }
    }
    rep.statistic = rep.cases ? static_cast<double>(rep.cases - rep.failures) / static_cast<double>(rep.cases) : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// |ybar - E ybar|_1 <= sqrt((2K/N) log(2/delta)) with probability 1 - delta.

struct ConcentrationCheck {
    std::size_t classes = 2;
    std::size_t n = 10;
    double delta = 0.05;
    std::size_t trials = 10000;
    /// Use a one-hot truth instead of a random simplex point.
    bool degenerate = false;

    void validate() const {
        if (classes < 2 || n < 1) throw ParameterError("concentration check needs K >= 2, N >= 1");
        if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0,1)");
        if (trials < 1000) throw ParameterError("concentration check needs >= 1000 trials");
    }

    double bound() const {
        return std::sqrt(2.0 * static_cast<double>(classes) / static_cast<double>(n) * std::log(2.0 / delta));
    }
};

/// Fraction of trials whose sample-mean L1 deviation exceeds the bound
/// (report.statistic); the check passes when that rate is <= delta.
inline CheckReport check_sample_mean_concentration(const ConcentrationCheck& cfg, std::uint64_t seed) {
    cfg.validate();
    CheckReport rep;
    rep.name = "concentration_K" + std::to_string(cfg.classes) + "_N" + std::to_string(cfg.n);
    Rng rng(seed);
    const double bound = cfg.bound();
    std::size_t violations = 0;
    std::vector<double> counts(cfg.classes);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const LabelDistribution p = cfg.degenerate ? LabelDistribution::one_hot(rng.index(cfg.classes), cfg.classes)
                                                   : LabelDistribution(sample_simplex(rng, cfg.classes));
        std::fill(counts.begin(), counts.end(), 0.0);
        for (std::size_t s = 0; s < cfg.n; ++s) counts[sample_class(p, rng)] += 1.0;
        double dev = 0.0;
        for (std::size_t j = 0; j < cfg.classes; ++j) dev += std::abs(counts[j] / static_cast<double>(cfg.n) - p[j]);
        const double margin = bound - dev;
        if (margin < 0.0) ++violations;
        rep.min_margin = std::min(rep.min_margin, margin);
    }
    rep.cases = 1;
    rep.statistic = static_cast<double>(violations) / static_cast<double>(cfg.trials);
    rep.failures = rep.statistic <= cfg.delta ? 0 : 1;
    rep.margins.push_back(cfg.delta - rep.statistic);
    return rep;
}

// ---------------------------------------------------------------------------
// Partition cardinality: for any partition of N items into at most N_c
// blocks and kappa >= 1,
//   |{x : N(x) >= N / (kappa N_c)}| >= (1 - 1/kappa + 1/(kappa N_c)) N.

/// Number of items lying in blocks of size >= N / (kappa * n_cover).
inline std::size_t items_in_large_blocks(std::span<const std::size_t> block_sizes, std::size_t n, double kappa,
                                         std::size_t n_cover) {
    std::size_t count = 0;
    for (auto s : block_sizes)
        if (static_cast<double>(s) * kappa * static_cast<double>(n_cover) >= static_cast<double>(n)) count += s;
    return count;
}

/// The inequality scaled by kappa * n_cover to stay exact for integer kappa.
inline double partition_margin(std::size_t count, std::size_t n, double kappa, std::size_t n_cover) {
    const double kc = kappa * static_cast<double>(n_cover);
    return static_cast<double>(count) * kc - (kc - static_cast<double>(n_cover) + 1.0) * static_cast<double>(n);
}

inline double partition_bound(std::size_t n, double kappa, std::size_t n_cover) {
    return (1.0 - 1.0 / kappa + 1.0 / (kappa * static_cast<double>(n_cover))) * static_cast<double>(n);
}

/// Visits every set partition of {0..n-1} into at most max_blocks blocks
/// (restricted growth strings) and calls fn(block_sizes).
template <typename Fn>
void for_each_set_partition(std::size_t n, std::size_t max_blocks, Fn&& fn) {
    if (n == 0) return;
    std::vector<std::size_t> rgs(n, 0), sizes;
    sizes.reserve(max_blocks);
    std::vector<std::size_t> prefix_max(n, 0);
    while (true) {
        sizes.assign(max_blocks, 0);
        std::size_t used = 0;
        for (auto b : rgs) {
            ++sizes[b];
            used = std::max(used, b + 1);
        }
        fn(std::span<const std::size_t>(sizes.data(), used));
        // Next restricted growth string with values < max_blocks.
        std::size_t i = n;
        while (i-- > 1) {
            const std::size_t limit = std::min(prefix_max[i - 1] + 1, max_blocks - 1);
            if (rgs[i] < limit) {
                ++rgs[i];
                prefix_max[i] = std::max(prefix_max[i - 1], rgs[i]);
                for (std::size_t k = i + 1; k < n; ++k) {
                    rgs[k] = 0;
                    prefix_max[k] = prefix_max[i];
                }
                break;
            }
        }
        if (i == 0) return;
    }
}

/// Exhaustive check over all set partitions for every N <= max_n and
/// N_c <= max_cover, for each kappa.
inline CheckReport check_partition_exhaustive(std::size_t max_n, std::size_t max_cover, std::span<const double> kappas) {
    CheckReport rep;
    rep.name = "partition_exhaustive";
    for (double k : kappas)
        if (!(k >= 1.0)) throw ParameterError("kappa must be >= 1");
    double min_fraction = 1.0;
    for (std::size_t n = 1; n <= max_n; ++n)
        for (std::size_t nc = 1; nc <= max_cover; ++nc)
            for_each_set_partition(n, nc, [&](std::span<const std::size_t> sizes) {
                for (double kappa : kappas) {
                    const std::size_t count = items_in_large_blocks(sizes, n, kappa, nc);
                    const double margin = partition_margin(count, n, kappa, nc);
                    rep.record(margin, margin >= 0.0, false);
                    min_fraction = std::min(min_fraction, static_cast<double>(count) / static_cast<double>(n));
                }
            });
    rep.statistic = min_fraction;
    return rep;
}

/// Random partitions of n items into at most n_cover blocks, with skewed
/// block weights (including near-degenerate giant blocks).
/// report.statistic is the minimum observed fraction count / n.
inline CheckReport check_partition_count(std::size_t n, std::size_t n_cover, double kappa, std::size_t trials,
                                         std::uint64_t seed) {
    if (!(kappa >= 1.0)) throw ParameterError("kappa must be >= 1");
    if (n_cover < 1 || n < 1) throw ParameterError("partition check needs N >= 1 and N_cover >= 1");
    CheckReport rep;
    rep.name = "partition_random";
    Rng rng(seed);
    double min_fraction = 1.0;
    std::vector<std::size_t> sizes(n_cover);
    std::vector<double> weights(n_cover);
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t blocks = 1 + rng.index(n_cover);
        // Power-law weights: a high exponent concentrates mass on few blocks.
        const double power = 1.0 + 6.0 * rng.uniform();
        double total = 0.0;
        for (std::size_t b = 0; b < blocks; ++b) {
            weights[b] = std::pow(rng.uniform(), power);
            total += weights[b];
        }
        std::fill(sizes.begin(), sizes.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            double u = rng.uniform() * total;
            std::size_t b = 0;
            while (b + 1 < blocks && u >= weights[b]) u -= weights[b++];
            ++sizes[b];
        }
        const std::size_t count = items_in_large_blocks(sizes, n, kappa, n_cover);
        const double margin = partition_margin(count, n, kappa, n_cover);
        rep.record(margin, margin >= 0.0, false);
        min_fraction = std::min(min_fraction, static_cast<double>(count) / static_cast<double>(n));
    }
    rep.statistic = min_fraction;
    return rep;
}

// ---------------------------------------------------------------------------
// Existence of a temperature (correctly classified examples) or an
// interpolation ratio (misclassified, max truth >= 1/2) that does not
// increase the distribution mismatch.

struct RectifierSample {
    Vector logits;
    LabelDistribution truth;
    std::size_t assigned = 0;
};

enum class RectifierClause { temperature, interpolation, none };

/// Which existence clause a sample qualifies for. Temperature: the model's
/// argmax equals the truth's argmax. Interpolation: they differ, the truth's
/// top mass is >= 1/2 and the assigned label is the truth's argmax.
inline RectifierClause classify_sample(const RectifierSample& s) {
    const std::size_t top = s.truth.argmax();
    if (argmax(s.logits) == top) return RectifierClause::temperature;
    if (s.truth[top] >= 0.5 && s.assigned == top) return RectifierClause::interpolation;
    return RectifierClause::none;
}

inline Vector logspace(double lo_exp, double hi_exp, std::size_t n) {
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::pow(10.0, lo_exp + (hi_exp - lo_exp) * static_cast<double>(i) / static_cast<double>(n - 1));
    return out;
}

/// T with softmax(z/T)[top] == target, by bisection on log T; the top-class
/// mass decreases monotonically from 1 to 1/K as T grows.
inline double solve_temperature(std::span<const double> logits, std::size_t top, double target) {
    double lo = -12.0, hi = 12.0;  // log10 T
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (softmax_t(logits, std::pow(10.0, mid))[top] > target)
            lo = mid;
        else
            hi = mid;
    }
    return std::pow(10.0, 0.5 * (lo + hi));
}

struct ExistenceResult {
    double baseline = 0.0;
    double best = 0.0;
    double best_param = 0.0;
};

/// Temperature clause: min over T of TV(softmax(z/T), truth), compared with
/// TV(one_hot(assigned), truth). Candidates: the scan plus the root T* of the
/// intermediate-value argument.
inline ExistenceResult temperature_existence(const RectifierSample& s, std::span<const double> t_scan) {
    ExistenceResult r;
    r.baseline = tv_distance(LabelDistribution::one_hot(s.assigned, s.truth.size()), s.truth);
    r.best = std::numeric_limits<double>::infinity();
    Vector candidates(t_scan.begin(), t_scan.end());
    const std::size_t top = s.truth.argmax();
    candidates.push_back(solve_temperature(s.logits, top, s.truth[top]));
    for (double T : candidates) {
        const double tv = tv_distance(softmax_t(s.logits, T), s.truth);
        if (tv < r.best) {
            r.best = tv;
            r.best_param = T;
        }
    }
    return r;
}

/// Interpolation clause at temperature T: min over lambda < 1 (plus the root
/// lambda*, which may be 1) of TV(lambda p + (1-lambda) one_hot, truth),
/// compared with TV(p, truth) for p = softmax(z/T).
inline ExistenceResult interpolation_existence(const RectifierSample& s, std::span<const double> lambda_scan,
                                               double temperature = 1.0) {
    ExistenceResult r;
    const auto p = softmax_t(s.logits, temperature);
    r.baseline = tv_distance(p, s.truth);
    r.best = std::numeric_limits<double>::infinity();
    const std::size_t top = s.truth.argmax();
    Vector candidates;
    for (double l : lambda_scan)
        if (l < 1.0) candidates.push_back(l);
    // lambda* p_top + (1 - lambda*) = truth_top
    candidates.push_back(p[top] < 1.0 ? std::clamp((1.0 - s.truth[top]) / (1.0 - p[top]), 0.0, 1.0) : 1.0);
    for (double lam : candidates) {
        const double tv = tv_distance(rectify(s.logits, s.assigned, {temperature, lam}), s.truth);
        if (tv < r.best) {
            r.best = tv;
            r.best_param = lam;
        }
    }
    return r;
}

struct RectifierReport {
    CheckReport temperature;
    CheckReport interpolation;
    std::size_t unqualified = 0;
};

inline RectifierReport check_rectifier_existence(std::span<const RectifierSample> samples, std::span<const double> t_scan,
                                                 std::span<const double> lambda_scan, double tolerance = 1e-12) {
    RectifierReport rep;
    rep.temperature.name = "rectifier_temperature";
    rep.interpolation.name = "rectifier_interpolation";
    for (const auto& s : samples) {
        switch (classify_sample(s)) {
            case RectifierClause::temperature: {
                const auto r = temperature_existence(s, t_scan);
                const double margin = r.baseline - r.best;
                rep.temperature.record(margin, margin >= -tolerance);
                break;
            }
            case RectifierClause::interpolation: {
                const auto r = interpolation_existence(s, lambda_scan);
                const double margin = r.baseline - r.best;
                rep.interpolation.record(margin, margin >= -tolerance);
                break;
            }
            case RectifierClause::none:
                ++rep.unqualified;
                break;
        }
    }
    for (auto* c : {&rep.temperature, &rep.interpolation})
        c->statistic = c->cases ? static_cast<double>(c->cases - c->failures) / static_cast<double>(c->cases) : 0.0;
    return rep;
}

/// Random samples qualifying for `clause` with K classes.
inline std::vector<RectifierSample> qualifying_samples(RectifierClause clause, std::size_t classes, std::size_t count,
                                                       std::uint64_t seed) {
    Rng rng(seed);
    std::vector<RectifierSample> out;
    while (out.size() < count) {
        RectifierSample s;
        s.logits.resize(classes);
        const double scale = std::exp(rng.uniform(-1.0, 2.0));
        for (auto& z : s.logits) z = rng.normal(0.0, scale);
        if (clause == RectifierClause::interpolation) {
            const std::size_t top = rng.index(classes);
            const double mass = rng.uniform(0.5, 1.0);
            Vector rest = sample_simplex(rng, classes - 1);
            Vector t(classes);
            for (std::size_t j = 0, k = 0; j < classes; ++j) t[j] = j == top ? mass : (1.0 - mass) * rest[k++];
            s.truth = LabelDistribution(std::move(t));
            s.assigned = top;
        } else {
            s.truth = LabelDistribution(sample_simplex(rng, classes));
            s.assigned = rng.index(classes);
        }
        if (classify_sample(s) == clause) out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gibbs: CE(truth, q) >= H(truth), with equality iff q == truth.

inline CheckReport check_gibbs(const LabelDistribution& truth, std::size_t candidates, std::uint64_t seed) {
    CheckReport rep;
    rep.name = "gibbs";
    Rng rng(seed);
    const double h = entropy(truth.probs());
    for (std::size_t c = 0; c < candidates; ++c) {
        const Vector q = sample_simplex(rng, truth.size());
        const double gap = loss_soft_ce(q, truth.probs()) - h;
        rep.record(gap, gap >= -1e-12, false);
    }
    const double self_gap = loss_soft_ce(truth.probs(), truth.probs()) - h;
    rep.record(std::abs(self_gap), std::abs(self_gap) <= 1e-12, false);
    rep.statistic = h;
    return rep;
}

// ---------------------------------------------------------------------------
// Label noise lower bound: the sampled label error rate is at least the
// expected one minus sqrt(log(2/delta) / (2N)), with probability 1 - delta.

inline CheckReport check_label_noise_bound(std::size_t classes, std::size_t n, double delta, std::size_t trials,
                                           std::uint64_t seed) {
    CheckReport rep;
    rep.name = "label_noise_bound";
    Rng rng(seed);
    const double slack = std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
    std::size_t violations = 0;
    std::vector<LabelDistribution> truth(n);
    std::vector<std::size_t> assigned(n);
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = LabelDistribution(sample_simplex(rng, classes));
            assigned[i] = truth[i].argmax();
        }
        const auto onehots = one_hot_labels(assigned, classes);
        const double mean_tv = mismatch_report(onehots, truth, assigned).mean_tv;
        const double sampled = label_error_rate(assigned, truth, ErrorRateMode::sampled, rng.next_u64());
        const double margin = sampled - (mean_tv - slack);
        if (margin < 0.0) ++violations;
        rep.min_margin = std::min(rep.min_margin, margin);
    }
    rep.cases = 1;
    rep.statistic = static_cast<double>(violations) / static_cast<double>(trials);
    rep.failures = rep.statistic <= delta ? 0 : 1;
    rep.margins.push_back(delta - rep.statistic);
    return rep;
}

}  // namespace advnoise::theory
