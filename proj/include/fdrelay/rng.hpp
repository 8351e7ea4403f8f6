#pragma once

#include <cstdint>

#include "fdrelay/common.hpp"

namespace fdrelay {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Deterministic xoshiro256** generator with a Box-Muller Gaussian source.
/// Identical seeds give identical sample streams on every platform, which is
/// what makes simulation outputs byte-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = detail::splitmix64(sm);
    }

    /// Derive the stream for one Monte-Carlo trial: the state is seeded from
    /// splitmix64 applied to (master ^ mix(stream_tag) ^ mix(trial)), so
    /// trials are independent and order-free.
    static Rng stream(std::uint64_t master, std::uint64_t stream_tag, std::uint64_t trial) {
        std::uint64_t a = stream_tag, b = trial;
        std::uint64_t seed = master ^ detail::splitmix64(a) ^ (detail::splitmix64(b) << 1);
        return Rng(seed);
    }

    std::uint64_t u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on (0, 1]; never returns 0 so log() below is safe.
    double uniform01() {
        return (static_cast<double>(u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Circularly-symmetric complex Gaussian with E|z|^2 = var (Box-Muller).
    cplx gaussian_c(double var = 1.0) {
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-var * std::log(u1));
        return cplx(r * std::cos(2.0 * pi * u2), r * std::sin(2.0 * pi * u2));
    }

    /// Real N(0, var).
    double gaussian(double var = 1.0) {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * var * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

    cvec gaussian_cvec(Eigen::Index n, double var = 1.0) {
        cvec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian_c(var);
        return v;
    }

    /// Uniform on the complex disk of the given radius (area-uniform).
    cplx uniform_disk(double radius) {
        const double r = radius * std::sqrt(uniform01());
        const double phi = 2.0 * pi * uniform01();
        return cplx(r * std::cos(phi), r * std::sin(phi));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

} // namespace fdrelay
