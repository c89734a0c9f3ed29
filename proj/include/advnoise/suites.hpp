#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "advnoise/config.hpp"
#include "advnoise/theory.hpp"

namespace advnoise::theory {

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"mismatch", "concentration", "partition", "rectifier", "gibbs"};
    return names;
}

namespace detail {

inline CheckReport tagged(CheckReport r, const std::string& tag) {
    r.name += "_" + tag;
    return r;
}

inline std::string kappa_tag(double kappa) {
    std::ostringstream os;
    os << "kappa" << kappa;
    return os.str();
}

}  // namespace detail

/// 250 points x 4 radii = 1000 (x, eps) pairs per norm on a 3-d bowl.
inline std::vector<CheckReport> mismatch_suite(std::uint64_t seed) {
    const AnalyticClassifier clf{{0.1, -0.2, 0.3}, 1.5, 1.1};
    const Vector eps{0.01, 0.05, 0.1, 0.2};
    return {check_mismatch_bound(clf, eps, 250, seed, Norm::l2), check_mismatch_bound(clf, eps, 250, seed + 1, Norm::linf)};
}

/// (K, N, delta) in {2, 10} x {10, 100} x {0.05, 0.2}, 10^4 trials each, plus
/// the sampled-label-noise lower bound.
inline std::vector<CheckReport> concentration_suite(std::uint64_t seed) {
    std::vector<CheckReport> out;
    std::uint64_t s = seed;
    for (std::size_t K : {2u, 10u})
        for (std::size_t N : {10u, 100u})
            for (double delta : {0.05, 0.2}) {
                std::ostringstream tag;
                tag << "delta" << delta;
                out.push_back(detail::tagged(check_sample_mean_concentration({K, N, delta, 10000, false}, s++), tag.str()));
            }
    out.push_back(check_label_noise_bound(3, 200, 0.1, 2000, s));
    return out;
}

/// Every set partition for N <= 12 into at most 4 blocks, then 10^4 random
/// partitions of 1000 items into at most 20 blocks per kappa.
inline std::vector<CheckReport> partition_suite(std::uint64_t seed) {
    const Vector kappas{1.0, 2.0, 5.0};
    std::vector<CheckReport> out{check_partition_exhaustive(12, 4, kappas)};
    for (std::size_t k = 0; k < kappas.size(); ++k)
        out.push_back(detail::tagged(check_partition_count(1000, 20, kappas[k], 10000, seed + k),
                                     detail::kappa_tag(kappas[k])));
    return out;
}

/// 10^3 qualifying samples per clause for K in {2, 5, 10}.
inline std::vector<CheckReport> rectifier_suite(std::uint64_t seed) {
    const auto t_scan = logspace(-3, 3, 601);
    Vector l_scan;
    for (int k = 0; k <= 100; ++k) l_scan.push_back(k / 100.0);
    std::vector<CheckReport> out;
    for (std::size_t K : {2u, 5u, 10u})
        for (auto clause : {RectifierClause::temperature, RectifierClause::interpolation}) {
            const auto samples = qualifying_samples(clause, K, 1000, seed + K);
            auto rep = check_rectifier_existence(samples, t_scan, l_scan);
            auto& r = clause == RectifierClause::temperature ? rep.temperature : rep.interpolation;
            out.push_back(detail::tagged(std::move(r), "K" + std::to_string(K)));
        }
    return out;
}

inline std::vector<CheckReport> gibbs_suite(std::uint64_t seed) {
    return {detail::tagged(check_gibbs(LabelDistribution(Vector{0.6, 0.3, 0.1}), 10000, seed), "K3"),
            detail::tagged(check_gibbs(LabelDistribution(Vector{0.5, 0.5}), 10000, seed + 1), "K2"),
            detail::tagged(check_gibbs(LabelDistribution::uniform(10), 10000, seed + 2), "K10")};
}

/// Runs one suite by name, or every suite for "all".
inline std::vector<CheckReport> run_suite(const std::string& name, std::uint64_t seed = 1) {
    if (name == "all") {
        std::vector<CheckReport> out;
        for (const auto& s : suite_names()) {
            auto r = run_suite(s, seed);
            out.insert(out.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
        }
        return out;
    }
    if (name == "mismatch") return mismatch_suite(seed);
    if (name == "concentration") return concentration_suite(seed);
    if (name == "partition") return partition_suite(seed);
    if (name == "rectifier") return rectifier_suite(seed);
    if (name == "gibbs") return gibbs_suite(seed);
    throw ConfigError("unknown verify suite '" + name + "'");
}

inline bool all_passed(const std::vector<CheckReport>& reports) {
    for (const auto& r : reports)
        if (!r.passed()) return false;
    return !reports.empty();
}

inline void write_report_csv(std::ostream& os, const std::vector<CheckReport>& reports) {
    os << "check,cases,skipped,failures,min_margin,statistic,passed\n";
    os << std::setprecision(17);
    for (const auto& r : reports)
        os << r.name << ',' << r.cases << ',' << r.skipped << ',' << r.failures << ',' << r.min_margin << ','
           << r.statistic << ',' << (r.passed() ? "true" : "false") << '\n';
}

}  // namespace advnoise::theory
