#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oosenc {

// Malformed input files or arguments. The CLI maps this to exit code 2.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite loss during training. The CLI maps this to exit code 3.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Portable seeded generator. std::uniform_real_distribution is
// implementation-defined, so doubles are built from raw 64-bit draws to keep
// results identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // splitmix64
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform index in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller.
    double normal();

private:
    std::uint64_t state_;
};

// Mixes a base seed with a stream index so derived streams do not overlap.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Shortest decimal that round-trips a double exactly.
std::string format_double(double v);

}  // namespace oosenc
