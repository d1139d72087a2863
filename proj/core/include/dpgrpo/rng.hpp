#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace dpgrpo {

// Seedable random stream. Wraps mt19937_64 and derives uniforms and bounded
// integers from its raw output directly, so draws are identical across
// standard library implementations (std:: distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    bool coin() { return (next_u64() >> 63) != 0; }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Derive an independent stream seed from a base seed and a tuple of keys,
// e.g. (step, query id, rollout index).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) noexcept;

// 64-bit FNV-1a over a string, for keying streams by textual ids.
std::uint64_t fnv1a(std::string_view s) noexcept;

}  // namespace dpgrpo
