#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace dualref {

/// Seeded generator used for every random draw in the library.
///
/// Uniform and normal variates are derived from the raw 64-bit engine output
/// directly, so streams are identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller.
    double normal();

    /// Uniform integer in [0, n). `n` must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Seed for an independent child stream.
    std::uint64_t fork() { return splitmix(engine_()); }

    std::string state() const;
    void restore(const std::string& state);

    static std::uint64_t splitmix(std::uint64_t x);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dualref
