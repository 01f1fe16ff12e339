#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mfcn {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// A block is a pure function of (counter, key), so any (replica, particle,
// step) stream can be sampled in any order on any number of threads and the
// increments come out bit-identical.
struct Philox4x32 {
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    static constexpr std::uint32_t kKeyBumpA = 0x9E3779B9u;
    static constexpr std::uint32_t kKeyBumpB = 0xBB67AE85u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += kKeyBumpA;
            key[1] += kKeyBumpB;
        }
        return ctr;
    }
};

namespace rng_detail {

inline double to_open01(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
    // (0,1): never 0, never 1, so log() below is safe.
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

inline void box_muller(const std::array<std::uint32_t, 4>& r, double& z0, double& z1) {
    const double u1 = to_open01(r[0], r[1]);
    const double u2 = to_open01(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    z0 = rad * std::cos(ang);
    z1 = rad * std::sin(ang);
}

}  // namespace rng_detail

// Addressable Gaussian noise for the ensemble simulators.
//
// Stream layout: one stream per (replica, particle, step); the common-noise
// stream uses the reserved particle tag 0. Particle i of the system maps to
// tag i+1. Step tags 0xFFFFFFFF / 0xFFFFFFFE are reserved for initial-data
// draws.
struct NoisePlan {
    std::uint64_t seed = 0;

    static constexpr std::uint32_t kCommonTag = 0u;
    static constexpr std::uint32_t kInitStep = 0xFFFFFFFFu;
    static constexpr std::uint32_t kInitWeightStep = 0xFFFFFFFEu;

    static std::uint32_t particle_tag(std::int64_t particle) {
        return static_cast<std::uint32_t>(particle + 1);
    }

    void normals(std::uint32_t replica, std::uint32_t tag, std::uint32_t step, double* out,
                 int len) const {
        const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                                  static_cast<std::uint32_t>(seed >> 32)};
        int produced = 0;
        std::uint32_t slot = 0;
        while (produced < len) {
            const auto r = Philox4x32::block({slot, step, tag, replica}, key);
            double z0, z1;
            rng_detail::box_muller(r, z0, z1);
            out[produced++] = z0;
            if (produced < len) out[produced++] = z1;
            ++slot;
        }
    }

    double normal(std::uint32_t replica, std::uint32_t tag, std::uint32_t step) const {
        double z;
        normals(replica, tag, step, &z, 1);
        return z;
    }
};

// Sequential helper stream for everything that is not simulation noise
// (dictionary construction, probing, optimizer perturbations). Philox with a
// running counter; cheap to fork by seed.
struct Prng {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;
    double spare = 0.0;
    bool has_spare = false;

    explicit Prng(std::uint64_t s) : seed(s) {}

    std::array<std::uint32_t, 4> next_block() {
        const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                                  static_cast<std::uint32_t>(seed >> 32)};
        const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(counter),
                                                  static_cast<std::uint32_t>(counter >> 32),
                                                  0x5EEDu, 0u};
        ++counter;
        return Philox4x32::block(ctr, key);
    }

    std::uint64_t next_u64() {
        const auto r = next_block();
        return (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    }

    // uniform on (0,1)
    double uniform() {
        const auto r = next_block();
        return rng_detail::to_open01(r[0], r[1]);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare) {
            has_spare = false;
            return spare;
        }
        const auto r = next_block();
        double z0, z1;
        rng_detail::box_muller(r, z0, z1);
        spare = z1;
        has_spare = true;
        return z0;
    }

    // integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }
};

}  // namespace mfcn
