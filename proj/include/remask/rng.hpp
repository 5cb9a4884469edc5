#pragma once

#include <cstdint>
#include <random>

namespace remask {

// Seeded generator with a portable [0, 1) conversion; std::mt19937_64's
// output sequence is fixed by the standard, the distributions are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

private:
    std::mt19937_64 engine_;
};

} // namespace remask
