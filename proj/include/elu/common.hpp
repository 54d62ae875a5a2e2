#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace elu {

/// Thrown when a value pool cannot supply the requested number of items.
/// Carries the name of the exhausted pool.
class CapacityError : public std::runtime_error {
public:
    CapacityError(const std::string& pool, const std::string& what)
        : std::runtime_error("capacity exhausted in pool '" + pool + "': " + what), pool_(pool) {}
    const std::string& pool() const noexcept { return pool_; }

private:
    std::string pool_;
};

/// Thrown when a training loop produces a non-finite loss.
class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(long step, const std::string& what)
        : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
          step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Thrown when a gradient or loss term is non-finite. Names the offending term.
class NumericError : public std::runtime_error {
public:
    NumericError(const std::string& term, const std::string& what)
        : std::runtime_error("non-finite value in '" + term + "': " + what), term_(term) {}
    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

// Deterministic RNG wrapper. std::mt19937_64 has a fully specified output
// sequence; the helper draws below avoid the unspecified standard
// distributions so results are stable across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be > 0");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = eng_();
        while (v >= limit) v = eng_();
        return v % n;
    }

    /// Uniform double in [0, 1).
    double real() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double normal(double mean, double stddev) {
        // Box-Muller, one value per call; spare cached.
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = real();
        const double u2 = real();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices drawn from [0, n), in draw order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
        if (k > n) throw std::invalid_argument("Rng::sample_indices: k > n");
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Splits a master seed into a stream-specific sub-seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // SplitMix64 over the combined value.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace elu
