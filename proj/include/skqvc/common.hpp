#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace skqvc {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string & msg) : std::runtime_error(msg) {}
};

#define SKQVC_DEFINE_ERROR(name)                                    \
    struct name : Error {                                           \
        explicit name(const std::string & msg) : Error(msg) {}      \
    }

SKQVC_DEFINE_ERROR(UnreadableFile);
SKQVC_DEFINE_ERROR(UnsupportedFormat);
SKQVC_DEFINE_ERROR(EmptyAudio);
SKQVC_DEFINE_ERROR(InvalidConfig);
SKQVC_DEFINE_ERROR(BadMagic);
SKQVC_DEFINE_ERROR(DimMismatch);
SKQVC_DEFINE_ERROR(NonFiniteValue);
SKQVC_DEFINE_ERROR(AudioTooShort);
SKQVC_DEFINE_ERROR(TooFewFrames);
SKQVC_DEFINE_ERROR(ShapeMismatch);
SKQVC_DEFINE_ERROR(LengthMismatch);
SKQVC_DEFINE_ERROR(EmptySequence);
SKQVC_DEFINE_ERROR(MisalignedPair);
SKQVC_DEFINE_ERROR(NonFiniteLoss);
SKQVC_DEFINE_ERROR(EmptyDataset);
SKQVC_DEFINE_ERROR(InsufficientVoicedOverlap);
SKQVC_DEFINE_ERROR(ZeroVector);
SKQVC_DEFINE_ERROR(IncompatibleCheckpoint);

#undef SKQVC_DEFINE_ERROR

// ---------------------------------------------------------------------------
// RNG: xoshiro256** with splitmix64 seeding. Fully deterministic and
// serializable, unlike the <random> engines whose distributions are
// implementation defined.
// ---------------------------------------------------------------------------

struct Rng {
    uint64_t s[4];

    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        // splitmix64 expansion of the seed
        uint64_t x = seed;
        for (auto & si : s) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            si = z ^ (z >> 31);
        }
    }

    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    uint64_t next_u64() {
        const uint64_t result = rotl(s[1] * 5, 7) * 9;
        const uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double next_double() {
        return (next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // uniform integer in [0, n)
    uint64_t next_below(uint64_t n) {
        // modulo bias is irrelevant at these ranges but rejection is cheap
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do { v = next_u64(); } while (v >= limit);
        return v % n;
    }

    // standard normal via Box-Muller, no cached spare (keeps state minimal)
    double next_gaussian() {
        double u1, u2;
        do { u1 = next_double(); } while (u1 <= 0.0);
        u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }
};

// ---------------------------------------------------------------------------
// FNV-1a 64-bit checksum, used for the frozen-codebook guarantee.
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(const void * data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto * p = static_cast<const uint8_t *>(data);
    for (size_t i = 0; i < n; i++) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(const std::vector<double> & v, uint64_t h = 0xcbf29ce484222325ULL) {
    return v.empty() ? h : fnv1a64(v.data(), v.size() * sizeof(double), h);
}

} // namespace skqvc
