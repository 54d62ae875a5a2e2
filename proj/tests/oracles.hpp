// Test-side reference implementations, independent of the library's
// computation paths. These stay deliberately naive.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "elu/corpus.hpp"

namespace oracles {

/// LCS length by exhaustive subsequence enumeration (lengths <= ~12).
inline std::size_t lcs_brute(const std::vector<std::string>& a,
                             const std::vector<std::string>& b) {
    // enumerate all subsequences of the shorter string, test against the other
    const auto& s = a.size() <= b.size() ? a : b;
    const auto& t = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    const std::size_t n = s.size();
    for (std::size_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<std::string> sub;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) sub.push_back(s[i]);
        if (sub.size() <= best) continue;
        // is sub a subsequence of t?
        std::size_t j = 0;
        for (const auto& w : t) {
            if (j < sub.size() && w == sub[j]) ++j;
        }
        if (j == sub.size()) best = sub.size();
    }
    return best;
}

/// Two-sample KS statistic by direct ECDF evaluation at every sample point.
inline double ks_stat_brute(std::vector<double> x, std::vector<double> y) {
    std::vector<double> all = x;
    all.insert(all.end(), y.begin(), y.end());
    double d = 0.0;
    for (double v : all) {
        const auto fx = static_cast<double>(std::count_if(x.begin(), x.end(),
                                                          [&](double a) { return a <= v; })) /
                        static_cast<double>(x.size());
        const auto fy = static_cast<double>(std::count_if(y.begin(), y.end(),
                                                          [&](double a) { return a <= v; })) /
                        static_cast<double>(y.size());
        d = std::max(d, std::abs(fx - fy));
    }
    return d;
}

/// Permutation-test p-value for the two-sample KS statistic.
inline double ks_permutation_p(const std::vector<double>& x, const std::vector<double>& y,
                               int shuffles, std::uint64_t seed) {
    const double observed = ks_stat_brute(x, y);
    std::vector<double> pool = x;
    pool.insert(pool.end(), y.begin(), y.end());
    std::mt19937_64 rng(seed);
    int at_least = 0;
    for (int s = 0; s < shuffles; ++s) {
        std::shuffle(pool.begin(), pool.end(), rng);
        std::vector<double> a(pool.begin(), pool.begin() + static_cast<long>(x.size()));
        std::vector<double> b(pool.begin() + static_cast<long>(x.size()), pool.end());
        if (ks_stat_brute(a, b) >= observed - 1e-12) ++at_least;
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(1 + shuffles);
}

/// Quadratic reference for knowledge coverage.
inline double knowledge_coverage_brute(
    const std::vector<elu::corpus::QAItem>& forget, const std::vector<elu::corpus::QAItem>& target,
    const std::function<double(const elu::corpus::QAItem&, const elu::corpus::QAItem&)>& score) {
    std::map<std::size_t, double> m;  // target index -> best similarity among mapped items
    for (const auto& f : forget) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t j = 0; j < target.size(); ++j) {
            const double s = score(f, target[j]);
            if (s > best) {
                best = s;
                arg = j;
            }
        }
        auto it = m.find(arg);
        if (it == m.end() || it->second < best) m[arg] = best;
    }
    double sum = 0.0;
    for (const auto& [k, v] : m) sum += v;
    return sum / static_cast<double>(target.size());
}

/// Central finite differences of a scalar loss over all parameters.
template <typename LossFn>
std::vector<double> finite_difference_gradient(std::vector<double>& params, LossFn&& loss,
                                               double h = 1e-6) {
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = params[i];
        params[i] = orig + h;
        const double lp = loss();
        params[i] = orig - h;
        const double lm = loss();
        params[i] = orig;
        g[i] = (lp - lm) / (2.0 * h);
    }
    return g;
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b,
                          double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({floor, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace oracles
