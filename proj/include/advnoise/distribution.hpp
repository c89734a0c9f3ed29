#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "advnoise/linalg.hpp"

namespace advnoise {

/// A point on the probability simplex over K classes.
///
/// Construction validates the simplex invariant (entries in [0, 1], sum within
/// 1e-9 of one). Holds P(Y|x), assigned label distributions and model outputs
/// alike.
class LabelDistribution {
  public:
    static constexpr double kSumTolerance = 1e-9;

    LabelDistribution() = default;
    explicit LabelDistribution(Vector probs) : probs_(std::move(probs)) {
        if (probs_.size() < 1) throw ShapeError("label distribution needs at least one class");
        double total = 0.0;
        for (double p : probs_) {
            if (!(p >= -kSumTolerance && p <= 1.0 + kSumTolerance))
                throw ParameterError("label distribution entry out of [0,1]: " + std::to_string(p));
            total += p;
        }
        if (std::abs(total - 1.0) > kSumTolerance)
            throw ParameterError("label distribution does not sum to one: " + std::to_string(total));
    }

    static LabelDistribution one_hot(std::size_t cls, std::size_t classes) {
        if (cls >= classes) throw ShapeError("one_hot: class index out of range");
        Vector v(classes, 0.0);
        v[cls] = 1.0;
        return LabelDistribution(std::move(v));
    }

    static LabelDistribution uniform(std::size_t classes) {
        return LabelDistribution(Vector(classes, 1.0 / static_cast<double>(classes)));
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t j) const { return probs_[j]; }
    std::span<const double> probs() const noexcept { return probs_; }
    const Vector& vector() const noexcept { return probs_; }
    std::size_t argmax() const { return advnoise::argmax(probs_); }

    bool operator==(const LabelDistribution&) const = default;

  private:
    Vector probs_;
};

}  // namespace advnoise
