#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace msmrf {

// Deterministic random source. The mt19937_64 engine is bit-exact across
// standard library implementations; the variate transforms below are written
// out explicitly instead of using std::*_distribution, whose output is
// implementation-defined. Every stream in the project derives from a single
// user seed so reruns reproduce byte-identical output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    std::uint64_t next_u64() { return eng_(); }

    // Standard normal via Box-Muller (one variate per call, no cached spare).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Gamma(shape, rate 1) via Marsaglia-Tsang; shape < 1 handled by boosting.
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Index in [0, k) given unnormalized nonnegative weights.
    int categorical(const double* w, int k) {
        double total = 0.0;
        for (int i = 0; i < k; ++i) total += w[i];
        double u = uniform() * total;
        for (int i = 0; i < k; ++i) {
            u -= w[i];
            if (u < 0.0) return i;
        }
        return k - 1;
    }

    int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }

private:
    std::mt19937_64 eng_;
};

// splitmix64, used to derive independent stream seeds from one master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace msmrf
