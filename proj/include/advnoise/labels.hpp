#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "advnoise/distribution.hpp"
#include "advnoise/net.hpp"

namespace advnoise {

/// Half the L1 distance between two categorical distributions.
inline double tv_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeError("tv_distance: class count mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) acc += std::abs(p[j] - q[j]);
    return 0.5 * acc;
}

inline double tv_distance(const LabelDistribution& p, const LabelDistribution& q) {
    return tv_distance(p.probs(), q.probs());
}

/// Temperature T and interpolation ratio lambda of the rectified label.
struct RectifierParams {
    double temperature = 1.0;
    double lambda = 1.0;

    void validate() const {
        if (!(temperature > 0.0)) throw ParameterError("rectifier temperature must be > 0");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("rectifier lambda must lie in [0,1]");
    }

    bool operator==(const RectifierParams&) const = default;
};

/// lambda * softmax(z / T) + (1 - lambda) * one_hot(assigned).
inline LabelDistribution rectify(std::span<const double> logits, std::size_t assigned, const RectifierParams& params) {
    params.validate();
    if (assigned >= logits.size()) throw ShapeError("rectify: assigned class out of range");
    const auto soft = softmax_t(logits, params.temperature);
    Vector out(logits.size());
    for (std::size_t j = 0; j < out.size(); ++j)
        out[j] = params.lambda * soft[j] + (j == assigned ? 1.0 - params.lambda : 0.0);
    return LabelDistribution(std::move(out));
}

/// Interpolation between two arbitrary label distributions.
inline LabelDistribution interpolate(const LabelDistribution& model, const LabelDistribution& other, double lambda) {
    if (model.size() != other.size()) throw ShapeError("interpolate: class count mismatch");
    Vector out(model.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = lambda * model[j] + (1.0 - lambda) * other[j];
    return LabelDistribution(std::move(out));
}

enum class ErrorRateMode { expected, sampled };

namespace detail {

inline void check_label_inputs(std::span<const std::size_t> assigned, std::span<const LabelDistribution> truth,
                               const char* who) {
    if (assigned.empty()) throw ParameterError(std::string(who) + ": empty input");
    if (assigned.size() != truth.size()) throw ShapeError(std::string(who) + ": length mismatch");
    for (std::size_t i = 0; i < assigned.size(); ++i)
        if (assigned[i] >= truth[i].size()) throw ShapeError(std::string(who) + ": assigned class out of range");
}

}  // namespace detail

/// Draws one class from a distribution by inverse CDF.
inline std::size_t sample_class(const LabelDistribution& p, Rng& rng) {
    const double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        cum += p[j];
        if (u < cum) return j;
    }
    // Rounding left u above the cumulative sum: take the last class with mass.
    for (std::size_t j = p.size(); j-- > 0;)
        if (p[j] > 0.0) return j;
    return p.size() - 1;
}

/// Fraction of examples whose assigned label differs from the true label.
///
/// `sampled` realises y_i ~ truth_i once per example from `seed` and counts
/// mismatches; `expected` returns the mean of 1 - truth_i[assigned_i].
inline double label_error_rate(std::span<const std::size_t> assigned, std::span<const LabelDistribution> truth,
                               ErrorRateMode mode = ErrorRateMode::expected, std::uint64_t seed = 0) {
    detail::check_label_inputs(assigned, truth, "label_error_rate");
    MeanAccumulator acc;
    if (mode == ErrorRateMode::expected) {
        for (std::size_t i = 0; i < assigned.size(); ++i) acc.add(1.0 - truth[i][assigned[i]]);
    } else {
        Rng rng(seed);
        for (std::size_t i = 0; i < assigned.size(); ++i) acc.add(sample_class(truth[i], rng) != assigned[i] ? 1.0 : 0.0);
    }
    return acc.mean();
}

/// Mean true-label probability of the assigned labels.
inline double data_quality(std::span<const std::size_t> assigned, std::span<const LabelDistribution> truth) {
    detail::check_label_inputs(assigned, truth, "data_quality");
    MeanAccumulator acc;
    for (std::size_t i = 0; i < assigned.size(); ++i) acc.add(truth[i][assigned[i]]);
    return acc.mean();
}

struct NoiseReport {
    double p_e = 0.0;
    double q = 0.0;
    double mean_tv = 0.0;
    std::size_t n = 0;
};

/// Label noise (expected), data quality, and mean TV between the labels a
/// dataset trains on and the true label distributions.
inline NoiseReport mismatch_report(std::span<const LabelDistribution> model_labels,
                                   std::span<const LabelDistribution> truth, std::span<const std::size_t> assigned) {
    detail::check_label_inputs(assigned, truth, "mismatch_report");
    if (model_labels.size() != truth.size()) throw ShapeError("mismatch_report: length mismatch");
    NoiseReport r;
    r.n = truth.size();
    r.p_e = label_error_rate(assigned, truth, ErrorRateMode::expected);
    r.q = data_quality(assigned, truth);
    MeanAccumulator tv;
    for (std::size_t i = 0; i < truth.size(); ++i) tv.add(tv_distance(model_labels[i], truth[i]));
    r.mean_tv = tv.mean();
    return r;
}

/// One-hot label distributions for every assigned class.
inline std::vector<LabelDistribution> one_hot_labels(std::span<const std::size_t> assigned, std::size_t classes) {
    std::vector<LabelDistribution> out;
    out.reserve(assigned.size());
    for (auto a : assigned) out.push_back(LabelDistribution::one_hot(a, classes));
    return out;
}

inline constexpr const char* kNoiseReportHeader = "tag,n,p_e,q,mean_tv";

inline void write_noise_report_row(std::ostream& os, const std::string& tag, const NoiseReport& r) {
    os << tag << ',' << r.n << ',' << std::setprecision(17) << r.p_e << ',' << r.q << ',' << r.mean_tv << '\n';
}

}  // namespace advnoise
