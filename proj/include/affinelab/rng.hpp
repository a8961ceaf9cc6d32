#pragma once

// Counter-based random streams. Every draw is a pure function of
// (seed, task, counter), so results do not depend on thread scheduling.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace affinelab {

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t task)
        : key_(mix64(seed ^ mix64(task + 0x632BE59BD9B4E019ULL))) {}

    std::uint64_t next_u64() {
        return mix64(key_ + (counter_++) * 0x9E3779B97F4A7C15ULL);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe for logarithms and reciprocals.
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one variate per call keeps the stream stateless.
    double normal() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Independent child stream, e.g. one per task of a scan.
    Stream child(std::uint64_t id) const { return Stream(key_, id, 0); }

    std::uint64_t counter() const { return counter_; }

private:
    Stream(std::uint64_t parent_key, std::uint64_t id, int)
        : key_(mix64(parent_key ^ mix64(id ^ 0xD1B54A32D192ED03ULL))) {}

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace affinelab
