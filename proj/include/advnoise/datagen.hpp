#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "advnoise/attacks.hpp"
#include "advnoise/distribution.hpp"
#include "advnoise/labels.hpp"
#include "advnoise/linalg.hpp"
#include "advnoise/net.hpp"

namespace advnoise {

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

struct MixtureComponent {
    Vector mean;
    std::size_t cls = 0;
    /// Mixing weight within its class; the weights of one class sum to one.
    double weight = 1.0;
};

/// Isotropic Gaussian mixture with equal class priors, optionally truncated to
/// the box [lo, hi]^d. posterior() is the exact Bayes rule P(Y|x).
class GaussianMixtureOracle {
  public:
    GaussianMixtureOracle(std::size_t classes, std::vector<MixtureComponent> components, double sigma,
                          double lo = -std::numeric_limits<double>::infinity(),
                          double hi = std::numeric_limits<double>::infinity())
        : classes_(classes), components_(std::move(components)), sigma_(sigma), lo_(lo), hi_(hi) {
        if (classes_ < 2) throw ParameterError("mixture needs K >= 2");
        if (!(sigma_ > 0.0)) throw ParameterError("mixture sigma must be > 0");
        if (!(lo_ < hi_)) throw ParameterError("mixture box requires lo < hi");
        if (components_.empty()) throw ParameterError("mixture has no components");
        dim_ = components_.front().mean.size();
        if (dim_ == 0) throw ParameterError("mixture dimension must be >= 1");
        std::vector<double> class_weight(classes_, 0.0);
        for (const auto& c : components_) {
            if (c.mean.size() != dim_) throw ShapeError("mixture component means differ in dimension");
            if (c.cls >= classes_) throw ParameterError("mixture component class out of range");
            if (!(c.weight > 0.0)) throw ParameterError("mixture component weight must be > 0");
            class_weight[c.cls] += c.weight;
        }
        for (std::size_t k = 0; k < classes_; ++k)
            if (class_weight[k] == 0.0) throw ParameterError("class " + std::to_string(k) + " has no component");
        for (auto& c : components_) {
            c.weight /= class_weight[c.cls];
            log_norm_.push_back(log_box_mass(c.mean));
        }
    }

    std::size_t classes() const noexcept { return classes_; }
    std::size_t dim() const noexcept { return dim_; }
    double sigma() const noexcept { return sigma_; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    bool truncated() const noexcept { return std::isfinite(lo_) || std::isfinite(hi_); }
    const std::vector<MixtureComponent>& components() const noexcept { return components_; }

    LabelDistribution posterior(std::span<const double> x) const {
        if (x.size() != dim_) throw ShapeError("oracle posterior: wrong input dimension");
        // Per-component log densities up to a shared constant, then log-sum-exp.
        std::vector<double> logs(components_.size());
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < components_.size(); ++m) {
            double sq = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) {
                const double d = x[i] - components_[m].mean[i];
                sq += d * d;
            }
            logs[m] = std::log(components_[m].weight) - sq / (2.0 * sigma_ * sigma_) - log_norm_[m];
            top = std::max(top, logs[m]);
        }
        Vector p(classes_, 0.0);
        double total = 0.0;
        for (std::size_t m = 0; m < components_.size(); ++m) {
            const double w = std::exp(logs[m] - top);
            p[components_[m].cls] += w;
            total += w;
        }
        for (auto& v : p) v /= total;
        return LabelDistribution(std::move(p));
    }

    /// One draw from class `cls` (rejection sampling inside the box).
    Vector sample(std::size_t cls, Rng& rng) const {
        double u = rng.uniform();
        const MixtureComponent* comp = nullptr;
        for (const auto& c : components_) {
            if (c.cls != cls) continue;
            comp = &c;
            if (u < c.weight) break;
            u -= c.weight;
        }
        Vector x(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            double v;
            do {
                v = rng.normal(comp->mean[i], sigma_);
            } while (v < lo_ || v > hi_);
            x[i] = v;
        }
        return x;
    }

  private:
    double log_box_mass(const Vector& mean) const {
        if (!truncated()) return 0.0;
        double acc = 0.0;
        const double s = sigma_ * std::numbers::sqrt2;
        for (double m : mean) {
            const double mass = 0.5 * (std::erfc((lo_ - m) / s) - std::erfc((hi_ - m) / s));
            acc += std::log(mass);
        }
        return acc;
    }

    std::size_t classes_;
    std::vector<MixtureComponent> components_;
    double sigma_;
    double lo_, hi_;
    std::size_t dim_ = 0;
    std::vector<double> log_norm_;
};

struct DatasetMeta {
    std::string generator = "unknown";
    std::string params;
    std::uint64_t seed = 0;
};

/// Inputs with assigned labels and, when known, the exact true label
/// distribution of every example.
struct OracleDataset {
    Matrix inputs;
    std::vector<std::size_t> assigned;
    /// Empty when the true label distribution is unknown.
    std::optional<std::vector<LabelDistribution>> true_dist;
    std::size_t classes = 2;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    DatasetMeta meta;
    /// Set while P(Y|x) can be recomputed at arbitrary x (Gaussian mixtures).
    std::shared_ptr<const GaussianMixtureOracle> oracle;

    std::size_t size() const noexcept { return assigned.size(); }
    std::size_t dim() const noexcept { return inputs.cols(); }
    bool has_truth() const noexcept { return true_dist.has_value(); }
    std::span<const double> x(std::size_t i) const { return inputs.row(i); }

    void validate() const {
        if (inputs.rows() != assigned.size()) throw ShapeError("dataset: inputs/labels length mismatch");
        for (auto a : assigned)
            if (a >= classes) throw ShapeError("dataset: assigned class out of range");
        if (true_dist) {
            if (true_dist->size() != assigned.size()) throw ShapeError("dataset: truth length mismatch");
            for (const auto& t : *true_dist)
                if (t.size() != classes) throw ShapeError("dataset: truth class count mismatch");
        }
    }
};

/// Samples n_per_class points per class from the oracle; the class of origin
/// becomes the assigned label and P(Y|x) is recorded exactly.
inline OracleDataset sample_from_oracle(std::shared_ptr<const GaussianMixtureOracle> oracle, std::size_t n_per_class,
                                        std::uint64_t seed, DatasetMeta meta = {}) {
    Rng rng(seed);
    const std::size_t K = oracle->classes();
    OracleDataset ds;
    ds.classes = K;
    ds.inputs = Matrix(K * n_per_class, oracle->dim());
    ds.true_dist.emplace();
    ds.lo = oracle->lo();
    ds.hi = oracle->hi();
    for (std::size_t c = 0; c < K; ++c) {
        for (std::size_t k = 0; k < n_per_class; ++k) {
            const std::size_t i = c * n_per_class + k;
            const Vector x = oracle->sample(c, rng);
            std::copy(x.begin(), x.end(), ds.inputs.row(i).begin());
            ds.assigned.push_back(c);
            ds.true_dist->push_back(oracle->posterior(x));
        }
    }
    meta.seed = seed;
    ds.meta = std::move(meta);
    ds.oracle = std::move(oracle);
    return ds;
}

/// K isotropic Gaussian classes N(mean_k, cov_scale^2 I) with equal priors.
/// Coincident means are allowed and give uniform posteriors.
inline OracleDataset gen_gaussian_mixture(std::size_t classes, std::size_t dim, std::size_t n_per_class,
                                          const std::vector<Vector>& class_means, double cov_scale,
                                          std::uint64_t seed) {
    if (classes < 2) throw ParameterError("gen_gaussian_mixture: K must be >= 2");
    if (class_means.size() != classes) throw ParameterError("gen_gaussian_mixture: need one mean per class");
    std::vector<MixtureComponent> comps;
    for (std::size_t k = 0; k < classes; ++k) {
        if (class_means[k].size() != dim) throw ShapeError("gen_gaussian_mixture: mean has wrong dimension");
        comps.push_back({class_means[k], k, 1.0});
    }
    auto oracle = std::make_shared<const GaussianMixtureOracle>(classes, std::move(comps), cov_scale);
    std::ostringstream params;
    params << "K=" << classes << ";d=" << dim << ";n_per_class=" << n_per_class << ";cov_scale=" << cov_scale;
    return sample_from_oracle(std::move(oracle), n_per_class, seed, {"gaussian_mixture", params.str(), seed});
}

// ---------------------------------------------------------------------------
// Presets

struct GeneratorConfig {
    /// two_gaussians | ring_mixture | toy_images
    std::string preset = "two_gaussians";
    std::size_t classes = 2;
    std::size_t dim = 10;
    /// Distance between the two class means (two_gaussians), ring radius
    /// (ring_mixture), or pattern amplitude (toy_images).
    double separation = 3.0;
    double sigma = 1.0;
    std::size_t components_per_class = 3;
    std::size_t n_per_class = 100;
    std::uint64_t seed = 1;
};

inline std::shared_ptr<const GaussianMixtureOracle> make_oracle(const GeneratorConfig& cfg) {
    std::vector<MixtureComponent> comps;
    if (cfg.preset == "two_gaussians") {
        // Means at +-separation/2 along the all-ones diagonal, so every input
        // coordinate carries signal (as pixels do).
        const double step = 0.5 * cfg.separation / std::sqrt(static_cast<double>(cfg.dim));
        comps.push_back({Vector(cfg.dim, -step), 0, 1.0});
        comps.push_back({Vector(cfg.dim, step), 1, 1.0});
        return std::make_shared<const GaussianMixtureOracle>(2, std::move(comps), cfg.sigma);
    }
    if (cfg.preset == "ring_mixture") {
        if (cfg.dim < 2) throw ParameterError("ring_mixture needs dim >= 2");
        const std::size_t total = cfg.classes * cfg.components_per_class;
        for (std::size_t m = 0; m < total; ++m) {
            Vector mean(cfg.dim, 0.0);
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(total);
            mean[0] = cfg.separation * std::cos(angle);
            mean[1] = cfg.separation * std::sin(angle);
            comps.push_back({std::move(mean), m % cfg.classes, 1.0});
        }
        return std::make_shared<const GaussianMixtureOracle>(cfg.classes, std::move(comps), cfg.sigma);
    }
    if (cfg.preset == "toy_images") {
        // dim pixels in [0,1]; class k brightens pixel i when (i + k) is even.
        for (std::size_t k = 0; k < cfg.classes; ++k) {
            Vector mean(cfg.dim);
            for (std::size_t i = 0; i < cfg.dim; ++i) {
                const double sign = ((i + k) % 2 == 0) ? 1.0 : -1.0;
                mean[i] = 0.5 + 0.5 * cfg.separation * sign / std::sqrt(static_cast<double>(cfg.dim));
            }
            if (cfg.classes > 2) mean[k % cfg.dim] += 0.5 * cfg.separation / std::sqrt(static_cast<double>(cfg.dim));
            comps.push_back({std::move(mean), k, 1.0});
        }
        return std::make_shared<const GaussianMixtureOracle>(cfg.classes, std::move(comps), cfg.sigma, 0.0, 1.0);
    }
    throw ParameterError("unknown generator preset '" + cfg.preset + "' (two_gaussians|ring_mixture|toy_images)");
}

inline OracleDataset generate(const GeneratorConfig& cfg) {
    std::ostringstream params;
    params << "K=" << cfg.classes << ";d=" << cfg.dim << ";separation=" << cfg.separation << ";sigma=" << cfg.sigma
           << ";components_per_class=" << cfg.components_per_class << ";n_per_class=" << cfg.n_per_class;
    return sample_from_oracle(make_oracle(cfg), cfg.n_per_class, cfg.seed, {cfg.preset, params.str(), cfg.seed});
}

// ---------------------------------------------------------------------------
// Augmentations

struct MixupConfig {
    double ratio = 0.8;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(ratio > 0.5 && ratio <= 1.0)) throw ParameterError("mixup ratio must lie in (0.5, 1]");
    }
};

/// One-time mixup: every input is blended with a partner drawn uniformly (with
/// replacement) among examples of a different assigned class. The truth
/// becomes ratio * 1(y) + (1 - ratio) * 1(y'), the assigned label stays y.
inline OracleDataset mixup_once(const OracleDataset& ds, const MixupConfig& cfg) {
    cfg.validate();
    ds.validate();
    std::vector<std::vector<std::size_t>> by_class(ds.classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.assigned[i]].push_back(i);
    std::size_t populated = 0;
    for (const auto& c : by_class) populated += c.empty() ? 0 : 1;
    if (populated < 2) throw ParameterError("mixup_once needs at least two populated classes");

    Rng rng(cfg.seed);
    OracleDataset out = ds;
    out.oracle.reset();
    out.true_dist.emplace();
    out.meta.generator = ds.meta.generator + "+mixup";
    out.meta.params = ds.meta.params + ";mixup_ratio=" + std::to_string(cfg.ratio);
    const double rho = cfg.ratio;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t y = ds.assigned[i];
        const std::size_t others = ds.size() - by_class[y].size();
        // Index into the concatenation of all other classes.
        std::size_t pick = rng.index(others);
        std::size_t partner = 0;
        for (std::size_t c = 0; c < ds.classes; ++c) {
            if (c == y) continue;
            if (pick < by_class[c].size()) {
                partner = by_class[c][pick];
                break;
            }
            pick -= by_class[c].size();
        }
        const std::size_t y2 = ds.assigned[partner];
        auto row = out.inputs.row(i);
        const auto src = ds.x(i);
        const auto mate = ds.x(partner);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] = rho * src[k] + (1.0 - rho) * mate[k];
        Vector t(ds.classes, 0.0);
        t[y] += rho;
        t[y2] += 1.0 - rho;
        out.true_dist->push_back(LabelDistribution(std::move(t)));
    }
    return out;
}

namespace detail {

inline void recompute_truth(OracleDataset& ds) {
    if (!ds.oracle) {
        ds.true_dist.reset();
        return;
    }
    ds.true_dist.emplace();
    for (std::size_t i = 0; i < ds.size(); ++i) ds.true_dist->push_back(ds.oracle->posterior(ds.x(i)));
}

}  // namespace detail

/// Replaces every input by its PGD adversarial example against `net` (attack
/// target: the assigned one-hot label). Labels are copied unchanged. With a
/// mixture oracle the truth is recomputed at x'; otherwise it becomes unknown.
inline OracleDataset build_fixed_adversarial(const OracleDataset& ds, const Network& net, const AttackConfig& cfg,
                                             std::uint64_t seed = 0) {
    cfg.validate();
    if (cfg.epsilon == 0.0) return ds;
    OracleDataset out = ds;
    const Rng base(seed);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Rng lane = base.split(i);
        auto adv = pgd(net, ds.x(i), ds.assigned[i], cfg, &lane);
        std::copy(adv.x_prime.begin(), adv.x_prime.end(), out.inputs.row(i).begin());
    }
    detail::recompute_truth(out);
    out.meta.params += ";fixed_adv_eps=" + std::to_string(cfg.epsilon);
    return out;
}

/// Adds Gaussian noise rescaled to linf norm eps (clamped to the dataset's
/// input range). Labels are copied; truth recomputed as above.
inline OracleDataset build_gaussian_augmented(const OracleDataset& ds, double eps, std::uint64_t seed) {
    if (!(eps >= 0.0)) throw ParameterError("build_gaussian_augmented: eps must be >= 0");
    if (eps == 0.0) return ds;
    OracleDataset out = ds;
    Rng rng(seed);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Vector g = sample_gaussian(rng, ds.dim(), 0.0, 1.0);
        const double n = norm_linf(g);
        auto row = out.inputs.row(i);
        for (std::size_t k = 0; k < row.size(); ++k)
            row[k] = std::clamp(row[k] + (n > 0.0 ? eps * g[k] / n : 0.0), ds.lo, ds.hi);
    }
    detail::recompute_truth(out);
    out.meta.params += ";gaussian_eps=" + std::to_string(eps);
    return out;
}

/// Replaces every assigned label by one realisation y_i ~ P(Y|x_i).
inline OracleDataset resample_assigned(const OracleDataset& ds, std::uint64_t seed) {
    if (!ds.true_dist) throw ParameterError("resample_assigned: dataset truth is unknown");
    OracleDataset out = ds;
    Rng rng(seed);
    for (std::size_t i = 0; i < ds.size(); ++i) out.assigned[i] = sample_class((*ds.true_dist)[i], rng);
    return out;
}

// ---------------------------------------------------------------------------
// Flat files: first line "d,K", then one row per example
// "x_1,...,x_d,assigned[,p_1,...,p_K]".

inline void save_csv(const OracleDataset& ds, std::ostream& os) {
    ds.validate();
    os << ds.dim() << ',' << ds.classes << '\n';
    os << std::setprecision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.x(i)) os << v << ',';
        os << ds.assigned[i];
        if (ds.true_dist)
            for (double p : (*ds.true_dist)[i].probs()) os << ',' << p;
        os << '\n';
    }
}

inline void save_csv(const OracleDataset& ds, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    save_csv(ds, os);
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, const std::string& path, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
        throw ParseError(path, line, "not a finite number: '" + s + "'");
    return v;
}

inline std::size_t parse_count(const std::string& s, const std::string& path, std::size_t line) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw ParseError(path, line, "not a non-negative integer: '" + s + "'");
    return static_cast<std::size_t>(std::stoull(s));
}

}  // namespace detail

inline OracleDataset load_csv(std::istream& is, const std::string& path = "<stream>") {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(is, line)) throw ParseError(path, lineno, "missing 'd,K' header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto head = detail::split_csv(line);
    if (head.size() != 2) throw ParseError(path, lineno, "header must be 'd,K'");
    const std::size_t d = detail::parse_count(head[0], path, lineno);
    const std::size_t K = detail::parse_count(head[1], path, lineno);
    if (d == 0 || K < 2) throw ParseError(path, lineno, "header needs d >= 1 and K >= 2");

    OracleDataset ds;
    ds.classes = K;
    Vector values;
    std::vector<LabelDistribution> truth;
    std::optional<bool> with_truth;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv(line);
        bool row_truth;
        if (cells.size() == d + 1)
            row_truth = false;
        else if (cells.size() == d + 1 + K)
            row_truth = true;
        else
            throw ParseError(path, lineno,
                             "expected " + std::to_string(d + 1) + " or " + std::to_string(d + 1 + K) + " columns, got " +
                                 std::to_string(cells.size()));
        if (with_truth && *with_truth != row_truth)
            throw ParseError(path, lineno, "truth columns present on some rows but not others");
        with_truth = row_truth;
        for (std::size_t k = 0; k < d; ++k) values.push_back(detail::parse_double(cells[k], path, lineno));
        const std::size_t a = detail::parse_count(cells[d], path, lineno);
        if (a >= K) throw ParseError(path, lineno, "assigned class out of range");
        ds.assigned.push_back(a);
        if (row_truth) {
            Vector p(K);
            for (std::size_t j = 0; j < K; ++j) p[j] = detail::parse_double(cells[d + 1 + j], path, lineno);
            try {
                truth.push_back(LabelDistribution(std::move(p)));
            } catch (const std::exception& e) {
                throw ParseError(path, lineno, e.what());
            }
        }
    }
    ds.inputs = Matrix(ds.assigned.size(), d, std::move(values));
    if (with_truth.value_or(false)) ds.true_dist = std::move(truth);
    ds.meta.generator = "csv";
    ds.meta.params = path;
    return ds;
}

inline OracleDataset load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return load_csv(is, path);
}

}  // namespace advnoise
