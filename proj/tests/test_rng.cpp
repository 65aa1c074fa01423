#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <vector>

#include "volherd/rng.hpp"

using namespace volherd;

TEST_CASE("xoshiro256++ matches the published reference sequence") {
    // First outputs of the reference C implementation (rotl(s0+s3,23)+s0
    // scrambler, state seeded with four splitmix64 draws), computed with an
    // independent transcription of the authors' code.
    const uint64_t seed0[6] = {
        5987356902031041503ULL,  7051070477665621255ULL,
        6633766593972829180ULL,  211316841551650330ULL,
        9136120204379184874ULL,  379361710973160858ULL,
    };
    const uint64_t seed123[6] = {
        11089759438045651894ULL, 13995639861960445257ULL,
        7281758979491336257ULL,  8017807584436681155ULL,
        6565157352319072148ULL,  2938818120842716024ULL,
    };
    Xoshiro256pp a(0);
    for (uint64_t want : seed0) CHECK(a.next_u64() == want);
    Xoshiro256pp b(123456789);
    for (uint64_t want : seed123) CHECK(b.next_u64() == want);
}

TEST_CASE("next_double lands in [0,1) with 53-bit resolution") {
    Xoshiro256pp rng(17);
    double mn = 1.0, mx = -1.0, sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        mn = std::min(mn, u);
        mx = std::max(mx, u);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(mn < 1e-4);
    CHECK(mx > 1.0 - 1e-4);
}

TEST_CASE("next_below is exact for small bounds") {
    Xoshiro256pp rng(23);
    // chi-square-style sanity: bound 7, 7e5 draws, each cell ~1e5
    const uint64_t bound = 7;
    std::vector<uint64_t> counts(bound, 0);
    const int n = 700000;
    for (int i = 0; i < n; ++i) {
        const uint64_t k = rng.next_below(bound);
        REQUIRE(k < bound);
        ++counts[k];
    }
    for (uint64_t c : counts)
        CHECK(std::abs(static_cast<double>(c) - n / 7.0) < 5.0 * std::sqrt(n / 7.0));

    // bound 1 must always return 0 and still consume one draw
    Xoshiro256pp x(1), y(1);
    CHECK(x.next_below(1) == 0);
    y.next_u64();
    CHECK(x.next_u64() == y.next_u64());
}

TEST_CASE("next_sign is a fair coin") {
    Xoshiro256pp rng(31);
    int pos = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const int8_t s = rng.next_sign();
        REQUIRE((s == 1 || s == -1));
        if (s == 1) ++pos;
    }
    CHECK(std::abs(pos - n / 2) < 5 * std::sqrt(n / 4.0));
}

TEST_CASE("save/load restores the exact stream position") {
    Xoshiro256pp rng(555);
    for (int i = 0; i < 1000; ++i) rng.next_u64();
    std::stringstream ss;
    rng.save(ss);
    Xoshiro256pp copy;
    copy.load(ss);
    CHECK(copy == rng);
    for (int i = 0; i < 100; ++i) CHECK(copy.next_u64() == rng.next_u64());
}

TEST_CASE("derive_seed separates children and is stable") {
    std::set<uint64_t> seen;
    for (uint64_t base : {0ULL, 1ULL, 20202ULL, ~0ULL})
        for (uint64_t idx = 0; idx < 64; ++idx)
            seen.insert(derive_seed(base, idx));
    CHECK(seen.size() == 4 * 64);  // no collisions across bases/indices
    CHECK(derive_seed(20202, 3) == derive_seed(20202, 3));
    CHECK(derive_seed(20202, 3) != derive_seed(20202, 4));
    CHECK(derive_seed(20202, 3) != derive_seed(20203, 3));
}
