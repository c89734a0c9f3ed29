#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "advnoise/attacks.hpp"
#include "advnoise/datagen.hpp"
#include "advnoise/labels.hpp"
#include "advnoise/net.hpp"

namespace advnoise {

/// Candidate temperatures and interpolation ratios, both ascending.
struct CalibGrid {
    Vector temperatures;
    Vector lambdas;

    static CalibGrid defaults() {
        CalibGrid g;
        g.temperatures = {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0};
        for (int k = 0; k <= 20; ++k) g.lambdas.push_back(k / 20.0);
        return g;
    }

    void validate() const {
        if (temperatures.empty() || lambdas.empty()) throw ParameterError("calibration grid is empty");
        for (std::size_t i = 0; i < temperatures.size(); ++i) {
            if (!(temperatures[i] > 0.0)) throw ParameterError("grid temperatures must be > 0");
            if (i && !(temperatures[i] > temperatures[i - 1])) throw ParameterError("grid temperatures must ascend");
        }
        for (std::size_t i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas[i] >= 0.0 && lambdas[i] <= 1.0)) throw ParameterError("grid lambdas must lie in [0,1]");
            if (i && !(lambdas[i] > lambdas[i - 1])) throw ParameterError("grid lambdas must ascend");
        }
    }
};

struct CalibResult {
    double t_star = 1.0;
    double lambda_star = 1.0;
    /// Objective over the grid: rows follow temperatures, columns lambdas.
    Matrix surface;
    std::size_t t_index = 0;
    std::size_t lambda_index = 0;

    RectifierParams params() const { return {t_star, lambda_star}; }
    double minimum() const { return surface(t_index, lambda_index); }
};

namespace detail {

/// Lexicographic argmin: the first strict minimum scanning T then lambda, so
/// ties resolve to the smallest T, then the smallest lambda.
inline CalibResult finish(const CalibGrid& grid, Matrix surface) {
    CalibResult r;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < surface.rows(); ++a)
        for (std::size_t b = 0; b < surface.cols(); ++b)
            if (surface(a, b) < best) {
                best = surface(a, b);
                r.t_index = a;
                r.lambda_index = b;
            }
    r.t_star = grid.temperatures[r.t_index];
    r.lambda_star = grid.lambdas[r.lambda_index];
    r.surface = std::move(surface);
    return r;
}

/// Mean NLL of lambda * softmax(z/T)[y] + (1 - lambda) * component_T[y].
/// `component` returns the second mixture member's mass on the label for
/// example i at temperature T.
template <typename ComponentFn>
CalibResult nll_grid(std::span<const Vector> logits, std::span<const std::size_t> labels, const CalibGrid& grid,
                     ComponentFn&& component) {
    grid.validate();
    if (logits.empty()) throw ParameterError("calibration set is empty");
    if (logits.size() != labels.size()) throw ShapeError("calibration: logits/labels length mismatch");
    const std::size_t N = logits.size();
    Matrix surface(grid.temperatures.size(), grid.lambdas.size());
    std::vector<double> model(N), other(N);
    for (std::size_t a = 0; a < grid.temperatures.size(); ++a) {
        const double T = grid.temperatures[a];
        for (std::size_t i = 0; i < N; ++i) {
            model[i] = softmax_t(logits[i], T)[labels[i]];
            other[i] = component(i, T);
        }
        for (std::size_t b = 0; b < grid.lambdas.size(); ++b) {
            const double lam = grid.lambdas[b];
            double acc = 0.0;
            for (std::size_t i = 0; i < N; ++i)
                acc -= std::log(std::max(lam * model[i] + (1.0 - lam) * other[i], kProbFloor));
            surface(a, b) = acc / static_cast<double>(N);
        }
    }
    return finish(grid, std::move(surface));
}

inline std::vector<Vector> logits_of(const Network& net, const OracleDataset& ds) {
    if (ds.dim() != net.input_dim()) throw ShapeError("dataset does not match network input");
    std::vector<Vector> out;
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(forward(net, ds.x(i)));
    return out;
}

}  // namespace detail

/// The adversarial validation set: every clean validation input replaced by
/// its PGD example against `net`, labels inherited. Built once and reused for
/// every grid cell.
inline OracleDataset build_adv_validation(const Network& net, const OracleDataset& clean_val, const AttackConfig& cfg,
                                          std::uint64_t seed = 0) {
    return build_fixed_adversarial(clean_val, net, cfg, seed);
}

/// Grid search of (T, lambda) minimising the validation NLL of the rectified
/// label lambda * softmax(z/T) + (1 - lambda) * one_hot(assigned).
///
/// The one-hot member uses adv_val.assigned. The NLL is scored against
/// `observed` when given, else against adv_val.assigned too; in that case the
/// one-hot member always matches the scored label and lambda = 0 wins
/// trivially, which is why calibrate_surrogate exists.
inline CalibResult calibrate_onehot(const Network& net, const OracleDataset& adv_val, const CalibGrid& grid,
                                    std::optional<std::span<const std::size_t>> observed = std::nullopt) {
    const auto logits = detail::logits_of(net, adv_val);
    const std::span<const std::size_t> labels = observed ? *observed : std::span<const std::size_t>(adv_val.assigned);
    return detail::nll_grid(logits, labels, grid, [&](std::size_t i, double) {
        return adv_val.assigned[i] == labels[i] ? 1.0 : 0.0;
    });
}

/// As calibrate_onehot with the one-hot member replaced by the surrogate's
/// temperature-scaled prediction softmax(z_s/T). The surrogate stands in for
/// the inherited labels, which are undefined on validation data.
inline CalibResult calibrate_surrogate(const Network& net, const Network& surrogate, const OracleDataset& adv_val,
                                       const CalibGrid& grid,
                                       std::optional<std::span<const std::size_t>> observed = std::nullopt) {
    const auto logits = detail::logits_of(net, adv_val);
    const auto surrogate_logits = detail::logits_of(surrogate, adv_val);
    const std::span<const std::size_t> labels = observed ? *observed : std::span<const std::size_t>(adv_val.assigned);
    return detail::nll_grid(logits, labels, grid, [&](std::size_t i, double T) {
        return softmax_t(surrogate_logits[i], T)[labels[i]];
    });
}

/// Grid argmin of the mean TV between rectify(logits, assigned, (T, lambda))
/// and the oracle truth. Only available when the truth is known.
inline CalibResult tv_oracle_search(std::span<const Vector> logits, std::span<const LabelDistribution> truth,
                                    std::span<const std::size_t> assigned, const CalibGrid& grid) {
    grid.validate();
    if (logits.empty()) throw ParameterError("tv_oracle_search: empty input");
    if (logits.size() != truth.size() || logits.size() != assigned.size())
        throw ShapeError("tv_oracle_search: length mismatch");
    const std::size_t N = logits.size();
    Matrix surface(grid.temperatures.size(), grid.lambdas.size());
    std::vector<Vector> soft(N);
    for (std::size_t a = 0; a < grid.temperatures.size(); ++a) {
        for (std::size_t i = 0; i < N; ++i) soft[i] = softmax_t(logits[i], grid.temperatures[a]).vector();
        for (std::size_t b = 0; b < grid.lambdas.size(); ++b) {
            const double lam = grid.lambdas[b];
            double acc = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                double tv = 0.0;
                for (std::size_t j = 0; j < soft[i].size(); ++j) {
                    const double r = lam * soft[i][j] + (j == assigned[i] ? 1.0 - lam : 0.0);
                    tv += std::abs(r - truth[i][j]);
                }
                acc += 0.5 * tv;
            }
            surface(a, b) = acc / static_cast<double>(N);
        }
    }
    return detail::finish(grid, std::move(surface));
}

inline CalibResult tv_oracle_search(const Network& net, const OracleDataset& ds, const CalibGrid& grid) {
    if (!ds.true_dist) throw ParameterError("tv_oracle_search: dataset truth is unknown");
    const auto logits = detail::logits_of(net, ds);
    return tv_oracle_search(logits, *ds.true_dist, ds.assigned, grid);
}

/// Mean TV to the oracle truth of the rectified labels at fixed params.
inline double rectified_mean_tv(const Network& net, const OracleDataset& ds, const RectifierParams& params) {
    if (!ds.true_dist) throw ParameterError("rectified_mean_tv: dataset truth is unknown");
    double acc = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        acc += tv_distance(rectify(forward(net, ds.x(i)), ds.assigned[i], params), (*ds.true_dist)[i]);
    return acc / static_cast<double>(ds.size());
}

/// Surface as a matrix CSV: header "T,<lambda_0>,...", one row per T.
inline void write_surface_csv(std::ostream& os, const CalibResult& r, const CalibGrid& grid) {
    os << std::setprecision(17) << "T";
    for (double l : grid.lambdas) os << ',' << l;
    os << '\n';
    for (std::size_t a = 0; a < grid.temperatures.size(); ++a) {
        os << grid.temperatures[a];
        for (std::size_t b = 0; b < grid.lambdas.size(); ++b) os << ',' << r.surface(a, b);
        os << '\n';
    }
}

/// Long format "series,step,value" for direct plotting; one series per T.
inline void write_surface_long_csv(std::ostream& os, const CalibResult& r, const CalibGrid& grid,
                                   const std::string& prefix) {
    os << std::setprecision(17);
    for (std::size_t a = 0; a < grid.temperatures.size(); ++a)
        for (std::size_t b = 0; b < grid.lambdas.size(); ++b)
            os << prefix << "_T" << grid.temperatures[a] << ',' << grid.lambdas[b] << ',' << r.surface(a, b) << '\n';
}

}  // namespace advnoise
