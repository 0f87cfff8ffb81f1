#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dlsim {

// mt19937_64 with hand-rolled distribution transforms. The standard
// distributions are implementation-defined, which would break
// bit-reproducibility of datasets and splits across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; one variate per call.
    double normal() {
        const double u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    uint64_t uniform_below(uint64_t bound) { return bound == 0 ? 0 : gen_() % bound; }

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace dlsim
