#pragma once

#include <cstdint>

#include "riscap/common.hpp"

namespace riscap {

// Named randomness streams so independent quantities never share draws.
namespace stream {
inline constexpr std::uint64_t kChannelH = 0x11;
inline constexpr std::uint64_t kChannelG = 0x12;
inline constexpr std::uint64_t kEstimate = 0x21;  // channel-estimate prior draws
inline constexpr std::uint64_t kNoise = 0x22;     // data-phase noise draws
inline constexpr std::uint64_t kTrainingNoise = 0x23;
inline constexpr std::uint64_t kLayerPhaseNoise = 0x31;
inline constexpr std::uint64_t kLayerSymbolNoise = 0x32;
inline constexpr std::uint64_t kLayerPhaseEstimate = 0x33;
inline constexpr std::uint64_t kLayerSymbolEstimate = 0x34;
}  // namespace stream

// Splittable counter-based generator. A value is a pure function of
// (key, counter), and keys are derived by hashing (seed, stream, index), so
// sample i is identical no matter which thread evaluates it or in what order.
class CounterRng {
   public:
    CounterRng() = default;
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static std::uint64_t mix64(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static CounterRng seeded(std::uint64_t seed, std::uint64_t stream_id) {
        return CounterRng(mix64(mix64(seed) ^ (stream_id * 0xD1B54A32D192ED03ull)));
    }

    // Derived generator for one sample index within a stream.
    CounterRng at(std::uint64_t index) const {
        return CounterRng(mix64(key_ ^ (index * 0x9E3779B97F4A7C15ull) ^ 0x5851F42D4C957F2Dull));
    }

    std::uint64_t word(std::uint64_t counter) const { return mix64(key_ + counter * 0x9E3779B97F4A7C15ull); }

    // Uniform on (0, 1]: never returns 0, so logs are safe.
    double uniform(std::uint64_t counter) const {
        return (static_cast<double>(word(counter) >> 11) + 1.0) * 0x1.0p-53;
    }

    // CN(0,1) via polar sampling: |v|^2 ~ Exp(1), phase uniform.
    // Consumes counters 2c and 2c+1.
    cplx complex_gaussian(std::uint64_t counter) const {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        const double r = std::sqrt(-std::log(u1));
        return {r * std::cos(2.0 * kPi * u2), r * std::sin(2.0 * kPi * u2)};
    }

    // N(0,1) real draw; consumes counters 2c and 2c+1.
    double real_gaussian(std::uint64_t counter) const {
        const double u1 = uniform(2 * counter);
        const double u2 = uniform(2 * counter + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    std::uint64_t key() const { return key_; }

   private:
    std::uint64_t key_ = 0;
};

}  // namespace riscap
