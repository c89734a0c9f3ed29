#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "advnoise/linalg.hpp"
#include "advnoise/net.hpp"

namespace advnoise {

enum class Norm { linf, l2 };

inline std::string to_string(Norm n) { return n == Norm::linf ? "linf" : "l2"; }

inline Norm parse_norm(const std::string& s) {
    if (s == "linf") return Norm::linf;
    if (s == "l2") return Norm::l2;
    throw ParameterError("unknown norm '" + s + "' (expected linf|l2)");
}

/// The adversary: radius, iterations and step size in input units, plus the
/// valid input box every adversarial example is clamped to.
struct AttackConfig {
    Norm norm = Norm::linf;
    double epsilon = 8.0 / 255.0;
    std::size_t steps = 10;
    double step_size = 2.0 / 255.0;
    double lo = 0.0;
    double hi = 1.0;
    bool random_start = true;

    void validate() const {
        if (!(epsilon >= 0.0)) throw ParameterError("attack epsilon must be >= 0");
        if (steps < 1) throw ParameterError("attack steps must be >= 1");
        if (!(step_size > 0.0)) throw ParameterError("attack step size must be > 0");
        if (!(lo < hi)) throw ParameterError("attack input range requires lo < hi");
    }

    /// Same adversary without random start, as used for evaluation.
    AttackConfig deterministic() const {
        auto c = *this;
        c.random_start = false;
        return c;
    }

    static AttackConfig unbounded(double eps, std::size_t steps, double step_size, bool random_start) {
        return {Norm::linf, eps, steps, step_size, -std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), random_start};
    }
};

struct AdvExample {
    Vector x_prime;
    std::size_t origin_index = 0;
    double loss_before = 0.0;
    double loss_after = 0.0;
    /// PGD saw a zero input gradient at every step and returned the start.
    bool stalled = false;
};

/// Projects a perturbation onto the norm ball of radius eps.
inline Vector project(std::span<const double> delta, Norm norm, double eps) {
    if (!(eps >= 0.0)) throw ParameterError("project: eps must be >= 0");
    Vector out(delta.begin(), delta.end());
    if (norm == Norm::linf) {
        for (auto& v : out) v = std::clamp(v, -eps, eps);
    } else {
        const double n = norm_l2(out);
        // The slack keeps an already-projected vector fixed despite rounding.
        if (n > eps * (1.0 + 1e-12)) {
            const double scale = eps / n;
            for (auto& v : out) v *= scale;
        }
    }
    return out;
}

namespace detail {

inline void clamp_to_range(Vector& x, const AttackConfig& cfg) {
    for (auto& v : x) v = std::clamp(v, cfg.lo, cfg.hi);
}

/// Ascent direction scaled to length `alpha` in the attack norm: sign for
/// linf, unit-normalised gradient for l2. Zero gradient gives zero step.
inline Vector ascent_step(std::span<const double> grad, Norm norm, double alpha) {
    Vector step(grad.size(), 0.0);
    if (norm == Norm::linf) {
        for (std::size_t i = 0; i < grad.size(); ++i)
            step[i] = grad[i] > 0.0 ? alpha : (grad[i] < 0.0 ? -alpha : 0.0);
    } else {
        const double n = norm_l2(grad);
        if (n > 0.0)
            for (std::size_t i = 0; i < grad.size(); ++i) step[i] = alpha * grad[i] / n;
    }
    return step;
}

/// x + project(candidate - x), clamped to the input range.
inline Vector project_into_ball(std::span<const double> x, const Vector& candidate, const AttackConfig& cfg) {
    Vector delta(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) delta[i] = candidate[i] - x[i];
    delta = project(delta, cfg.norm, cfg.epsilon);
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + delta[i];
    clamp_to_range(out, cfg);
    return out;
}

inline Vector random_start_point(std::span<const double> x, const AttackConfig& cfg, Rng& rng) {
    Vector delta(x.size());
    if (cfg.norm == Norm::linf) {
        for (auto& v : delta) v = rng.uniform(-cfg.epsilon, cfg.epsilon);
    } else {
        for (auto& v : delta) v = rng.normal();
        const double n = norm_l2(delta);
        const double radius = cfg.epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(x.size()));
        for (auto& v : delta) v = n > 0.0 ? v * radius / n : 0.0;
    }
    Vector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + delta[i];
    clamp_to_range(out, cfg);
    return out;
}

inline double ce_loss_at(const Network& net, std::span<const double> x, std::span<const double> target) {
    return loss_soft_ce(softmax_t(forward(net, x)).probs(), target);
}

}  // namespace detail

/// Single-step attack on the cross-entropy loss against `target`:
/// x' = clamp(x + eps * sign(grad)) for linf, x + eps * grad / |grad|_2 for l2.
inline AdvExample fgsm(const Network& net, std::span<const double> x, const LabelDistribution& target,
                       const AttackConfig& cfg) {
    cfg.validate();
    AdvExample out;
    const Vector grad = input_gradient(net, x, target.probs(), 1.0, &out.loss_before);
    const Vector step = detail::ascent_step(grad, cfg.norm, cfg.epsilon);
    Vector cand(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) cand[i] = x[i] + step[i];
    out.x_prime = detail::project_into_ball(x, cand, cfg);
    out.loss_after = detail::ce_loss_at(net, out.x_prime, target.probs());
    out.stalled = norm_linf(grad) == 0.0;
    return out;
}

inline AdvExample fgsm(const Network& net, std::span<const double> x, std::size_t y, const AttackConfig& cfg) {
    return fgsm(net, x, LabelDistribution::one_hot(y, net.classes()), cfg);
}

/// Projected gradient ascent on the cross-entropy loss against `target`.
///
/// Each iterate is projected back onto the eps-ball around x and into the
/// input range. Returns the iterate with the highest loss seen (the start
/// point included), so loss_after >= loss_before always holds without a
/// random start. `rng` is required only when cfg.random_start is set.
inline AdvExample pgd(const Network& net, std::span<const double> x, const LabelDistribution& target,
                      const AttackConfig& cfg, Rng* rng = nullptr) {
    cfg.validate();
    AdvExample out;
    out.loss_before = detail::ce_loss_at(net, x, target.probs());
    if (cfg.epsilon == 0.0) {
        out.x_prime.assign(x.begin(), x.end());
        out.loss_after = out.loss_before;
        return out;
    }
    Vector cur;
    if (cfg.random_start) {
        if (!rng) throw ParameterError("pgd: random_start requires an Rng");
        cur = detail::random_start_point(x, cfg, *rng);
    } else {
        cur.assign(x.begin(), x.end());
        detail::clamp_to_range(cur, cfg);
    }

    Vector best = cur;
    double best_loss = -std::numeric_limits<double>::infinity();
    bool any_gradient = false;
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        double loss = 0.0;
        const Vector grad = input_gradient(net, cur, target.probs(), 1.0, &loss);
        if (loss > best_loss) {
            best_loss = loss;
            best = cur;
        }
        if (norm_linf(grad) == 0.0) continue;
        any_gradient = true;
        const Vector step = detail::ascent_step(grad, cfg.norm, cfg.step_size);
        for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += step[i];
        cur = detail::project_into_ball(x, cur, cfg);
    }
    const double final_loss = detail::ce_loss_at(net, cur, target.probs());
    if (final_loss >= best_loss) {
        best_loss = final_loss;
        best = cur;
    }
    if (!any_gradient) {
        out.x_prime.assign(x.begin(), x.end());
        out.loss_after = out.loss_before;
        out.stalled = true;
        return out;
    }
    out.x_prime = std::move(best);
    out.loss_after = best_loss;
    return out;
}

inline AdvExample pgd(const Network& net, std::span<const double> x, std::size_t y, const AttackConfig& cfg,
                      Rng* rng = nullptr) {
    return pgd(net, x, LabelDistribution::one_hot(y, net.classes()), cfg, rng);
}

}  // namespace advnoise
