#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hrcache {

// Samplers are hand-rolled inverse-CDF transforms on top of mt19937_64 so a
// given seed produces the same stream on every platform; std::*_distribution
// output is implementation-defined.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x51ed27f4a1b2c3d4ULL));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1], safe for log()
    double uniform_pos() {
        return 1.0 - uniform();
    }

    double exponential(double rate) {
        return -std::log(uniform_pos()) / rate;
    }

    // survival (1 + xi*x/sigma)^(-1/xi); xi = 0 degenerates to exponential(1/sigma)
    double generalized_pareto(double sigma, double xi) {
        double u = uniform_pos();
        if (xi == 0.0) return -sigma * std::log(u);
        return sigma * (std::pow(u, -xi) - 1.0) / xi;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    uint64_t next_u64() { return gen_(); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace hrcache
