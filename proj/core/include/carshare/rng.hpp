#ifndef CARSHARE_RNG_HPP
#define CARSHARE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace carshare {

// PCG32: tiny, fast, reproducible across platforms. The stream selector
// gives independent substreams from one seed, which is what the simulator
// leans on for common-random-number comparisons.
class Pcg32 {
public:
    Pcg32() : Pcg32(0x853c49e6748fea9bULL, 0xda3e39cb94b95bdbULL) {}
    Pcg32(std::uint64_t seed, std::uint64_t stream) { reseed(seed, stream); }

    void reseed(std::uint64_t seed, std::uint64_t stream) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe for log().
    double next_open_double() { return 1.0 - next_double(); }

    double exponential(double rate) { return -std::log(next_open_double()) / rate; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 1;
};

// splitmix64 finalizer; used to hash substream paths into stream selectors.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic substream: same (seed, path) always yields the same stream.
inline Pcg32 substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    for (std::uint64_t p : path) h = mix64(h ^ p);
    return Pcg32(seed, h);
}

} // namespace carshare

#endif
