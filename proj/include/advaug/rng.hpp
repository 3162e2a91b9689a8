#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace advaug {

// Deterministic RNG. The engine is std::mt19937_64 (its output sequence is
// fixed by the standard); all distributions are implemented here because the
// std::*_distribution algorithms are implementation-defined and would break
// bitwise reproducibility of artifacts across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t u64() { return engine_(); }

    // Uniform in [0,1).
    double uniform();
    double uniform(double lo, double hi);
    // (0,1]; never zero, safe under log().
    double uniform_pos();
    // Standard normal via Box-Muller (two uniforms per draw).
    double normal();
    double normal(double mu, double sigma);
    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    // Knuth multiplication method; fine for the lambda <= ~60 used here.
    long poisson(double lambda);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent stream derived from this rng's seed and a stream id.
    // Derivation does not consume state, so streams can be handed to
    // parallel workers in any order.
    Rng child(std::uint64_t stream) const;
    Rng child(const std::string& label) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

} // namespace advaug
