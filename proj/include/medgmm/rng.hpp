#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace medgmm {

// SplitMix64-based random stream keyed by (seed, replicate, tag). Streams are
// cheap to construct, independent of construction order, and reproducible
// across thread counts, so every replicate/resample owns its own generator.
class RngStream {
public:
    enum Tag : std::uint64_t {
        kCovariate = 1,
        kConfounder = 2,
        kExposure = 3,
        kMediator = 4,
        kOutcome = 5,
        kBootstrap = 6,
        kGeneric = 7,
    };

    RngStream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t tag)
        : state_(derive(derive(derive(0x9E3779B97F4A7C15ULL ^ seed), replicate), tag)) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second deviate is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_uniform();  // (0, 1]
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    double next_bernoulli(double p) { return next_uniform() < p ? 1.0 : 0.0; }

    // Uniform index in [0, n).
    Eigen::Index next_index(Eigen::Index n) {
        return static_cast<Eigen::Index>(next_uniform() * static_cast<double>(n));
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t derive(std::uint64_t s, std::uint64_t v = 0x632BE59BD9B4E019ULL) {
        return mix(s + 0x9E3779B97F4A7C15ULL * (v + 1));
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace medgmm
