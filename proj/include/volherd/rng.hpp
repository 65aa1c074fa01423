#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string_view>

namespace volherd {

// Identifier recorded in run metadata so trajectories can be matched to the
// generator that produced them.
inline constexpr std::string_view kRngAlgorithm = "xoshiro256++";

// splitmix64 step, used for seeding and for deriving child seeds.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic child seed for sweep rows / figure sub-runs.
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
    uint64_t s = base ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
    uint64_t first = splitmix64(s);
    return first ^ splitmix64(s);
}

// xoshiro256++ (Blackman & Vigna). 256-bit state, period 2^256 - 1.
// State is seeded through splitmix64 per the authors' recommendation.
class Xoshiro256pp {
public:
    Xoshiro256pp() : Xoshiro256pp(0) {}

    explicit Xoshiro256pp(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, bound). Lemire's multiply-shift with rejection;
    // exact and platform-stable. bound must be >= 1.
    uint64_t next_below(uint64_t bound) {
        uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto lo = static_cast<uint64_t>(m);
        if (lo < bound) {
            const uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    // Uniform trade sign: +1 or -1.
    int8_t next_sign() {
        return (next_u64() >> 63) ? int8_t{-1} : int8_t{1};
    }

    void save(std::ostream& os) const {
        os.write(reinterpret_cast<const char*>(s_), sizeof(s_));
    }

    void load(std::istream& is) {
        is.read(reinterpret_cast<char*>(s_), sizeof(s_));
    }

    bool operator==(const Xoshiro256pp&) const = default;

private:
    static uint64_t rotl(uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    uint64_t s_[4];
};

}  // namespace volherd
