#ifndef ASDA_CORE_HPP
#define ASDA_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace asda {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Final image descriptor: unit Euclidean norm, or exactly zero in the
/// degenerate all-zero case.
template <typename Scalar>
using Descriptor = Vector<Scalar>;

inline void require(bool condition, const std::string& message) {
    if (!condition) throw std::invalid_argument(message);
}

/// Thrown when a forward pass produces non-finite values; names the first
/// offending stage.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& stage)
        : std::runtime_error("non-finite values in stage: " + stage) {}
};

inline void check_finite_stage(bool ok, const std::string& stage) {
    if (!ok) throw numeric_error(stage);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

/// l2 normalization with the zero-vector bypass: an all-zero input is
/// returned unchanged instead of producing NaN.
template <typename Scalar>
Vector<Scalar> l2_normalize(const Vector<Scalar>& v) {
    const Scalar n = v.norm();
    if (n == Scalar(0)) return Vector<Scalar>::Zero(v.size());
    return v / n;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    if (x >= Scalar(0)) {
        const Scalar e = std::exp(-x);
        return Scalar(1) / (Scalar(1) + e);
    }
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
}

/// 64-bit FNV-1a, used for config hashes and forward-pass signatures.
class Fnv1a {
public:
    void update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void update_u64(std::uint64_t v) { update(&v, sizeof(v)); }
    void update_string(const std::string& s) { update(s.data(), s.size()); }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    // splitmix64-style finalizer over the packed inputs
    std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL + c + 0x94d049bb133111ebULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic random stream. Distributions are implemented in-place
/// (instead of std::normal_distribution and friends) so that a fixed seed
/// yields the same sequence on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {
        // warm up so that small seeds decorrelate
        next_u64();
        next_u64();
    }

    std::uint64_t next_u64() {
        // xorshift64*
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    /// uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// uniform integer in [lo, hi], inclusive; unbiased via rejection
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        require(lo <= hi, "Rng::uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());  // full 64-bit range
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return lo + static_cast<std::int64_t>(x % span);
    }

    /// derived stream, independent of draws made on this one
    Rng fork(std::uint64_t stream) const { return Rng(mix_seed(state_, stream, 0x5eedu)); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace asda

#endif
