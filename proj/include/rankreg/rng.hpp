#pragma once

#include <cstdint>
#include <random>

namespace rankreg {

// Stream seed for replication `index` under a master seed. The mixing keeps
// nearby indices decorrelated so replication-parallel runs can hand each
// worker its own engine and still match a serial run bit for bit.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t x = master ^ (0x9E3779B97F4A7C15ULL * (index + 1));
    x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27; x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

// Gaussian draws via Box-Muller on top of mt19937_64. The transform is
// spelled out (rather than std::normal_distribution) so the byte-identical
// reproducibility contract does not depend on the standard library's
// unspecified algorithm choice.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : eng_(seed) {}

    double uniform01() {
        // (0, 1]; never 0 so log() below is safe.
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Mean-zero uniform with unit variance, for the non-Gaussian noise option.
    double uniform_unit_var() {
        return (uniform01() - 0.5) * 3.4641016151377543863532718255983; // 2*sqrt(3)
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace rankreg
