#pragma once

#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace degdiff {

/// SplitMix64 finaliser; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Stable 64-bit hash of a string (FNV-1a followed by mix64).
std::uint64_t hash_tag(std::string_view tag) noexcept;

/// Seed for a stream identified by a path of indices below a base seed,
/// e.g. derive_seed(base, {hash_tag("sweep"), c_index, replica}).
/// Stream identity depends only on the path, never on scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept;

template <class T>
concept NormalSource = requires(T& t) {
    { t() } -> std::convertible_to<double>;
};

/// Standard normal variates from a seeded 64-bit Mersenne twister.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}
    double operator()() { return dist_(engine_); }
    void fill(std::span<double> out, double scale) {
        for (double& v : out) v = scale * dist_(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

/// Noise source that always returns 0; turns any scheme into its drift ODE.
struct ZeroNoise {
    double operator()() const noexcept { return 0.0; }
};

}  // namespace degdiff
