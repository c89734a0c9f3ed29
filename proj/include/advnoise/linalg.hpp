#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace advnoise {

using Vector = std::vector<double>;

/// Thrown when operand dimensions do not line up.
class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown for out-of-domain scalar parameters (negative radius, T <= 0, ...).
class ParameterError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation produces NaN/Inf.
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, Vector data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ShapeError("ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const Vector& values() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

/// Plain triple loop with a fixed left-to-right accumulation order over the
/// inner index, so results are bit-reproducible.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    }
    if (!all_finite(out.data())) throw NumericError("matmul produced a non-finite entry");
    return out;
}

/// y = A x
inline Vector matvec(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < r.size(); ++k) acc += r[k] * x[k];
        y[i] = acc;
    }
    return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm_l1(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += std::abs(x);
    return acc;
}

inline double norm_l2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

inline double norm_linf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Running sum kept as an unevaluated pair hi + lo (error-free TwoSum), so
/// the mean of n equal values comes back as that value exactly.
class MeanAccumulator {
  public:
    void add(double x) noexcept {
        const double s = hi_ + x;
        const double bp = s - hi_;
        lo_ += (hi_ - (s - bp)) + (x - bp);
        hi_ = s;
        ++n_;
    }

    std::size_t count() const noexcept { return n_; }

    double mean() const {
        if (n_ == 0) throw ParameterError("mean of zero values");
        const double n = static_cast<double>(n_);
        const double q = hi_ / n;
        return q + (std::fma(-q, n, hi_) + lo_) / n;
    }

  private:
    double hi_ = 0.0;
    double lo_ = 0.0;
    std::size_t n_ = 0;
};

inline std::size_t argmax(std::span<const double> v) {
    if (v.empty()) throw ShapeError("argmax of empty vector");
    return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seeded generator. The engine is mt19937_64, whose output sequence is fixed
/// by the standard; every distribution on top of it is implemented here
/// (std distributions are implementation-defined), so a seed produces the same
/// stream on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), engine_(splitmix64(seed ^ splitmix64(stream + 0x5851F42D4C957F2DULL))) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    /// Independent child generator for parallel lane / sub-task `index`.
    Rng split(std::uint64_t index) const { return Rng(splitmix64(seed_ ^ splitmix64(stream_)), index); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased integer in [0, n).
    std::size_t index(std::size_t n) {
        if (n == 0) throw ParameterError("Rng::index with n == 0");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return static_cast<std::size_t>(r % bound);
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline Vector sample_gaussian(Rng& rng, std::size_t n, double mean, double stddev) {
    if (!(stddev >= 0.0)) throw ParameterError("sample_gaussian: std must be >= 0");
    Vector out(n);
    for (auto& v : out) v = stddev == 0.0 ? mean : rng.normal(mean, stddev);
    return out;
}

/// Uniform point on the probability simplex (flat Dirichlet).
inline Vector sample_simplex(Rng& rng, std::size_t k) {
    Vector out(k);
    double total = 0.0;
    for (auto& v : out) {
        double u;
        do {
            u = rng.uniform();
        } while (u <= 0.0);
        v = -std::log(u);
        total += v;
    }
    for (auto& v : out) v /= total;
    return out;
}

}  // namespace advnoise
