#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace td {

// Counter-based deterministic RNG.
//
// value(i) = mix(seed ^ rotate(mix(i+1))) where mix is the SplitMix64
// finalizer. Every draw is a pure function of (seed, counter), so streams can
// be split by deriving child seeds and replayed without shared state. The
// exact construction is part of the reproducibility contract; changing it
// invalidates recorded checkpoints/scenes.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    // Derive an independent child stream. Labels are hashed with FNV-1a so
    // textual stream names ("init.backbone", "noise") stay stable.
    CounterRng split(const std::string& label) const {
        uint64_t h = 1469598103934665603ull;
        for (unsigned char c : label) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return CounterRng(mix(seed_ ^ mix(h)));
    }

    CounterRng split(uint64_t label) const { return CounterRng(mix(seed_ ^ mix(label ^ 0x94d049bb133111ebull))); }

    uint64_t bits() { return at(counter_++); }

    // Uniform in [0,1), 53-bit mantissa.
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // i in [0, n)
    uint64_t index(uint64_t n) { return n == 0 ? 0 : bits() % n; }

    // Standard normal via Box-Muller; consumes two counters per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    uint64_t seed() const { return seed_; }

private:
    uint64_t at(uint64_t i) const {
        uint64_t v = mix(i + 1);
        v = (v << 23) | (v >> 41);
        return mix(seed_ ^ v);
    }

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t seed_;
    uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace td
