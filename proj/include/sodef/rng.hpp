#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sodef {

/// Deterministic random source. Wraps std::mt19937_64 for raw bits but
/// derives uniform/normal variates itself, so identical seeds give identical
/// streams on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller (pairs cached).
    double normal();
    double normal(double mean, double stddev);

    /// Uniform over {0, ..., n-1}; n must be >= 1. Rejection sampling, no
    /// modulo bias.
    std::size_t index(std::size_t n);

    /// Independent deterministic generator keyed by (seed, name), e.g.
    /// substream("shuffle"). Used to keep data/init/shuffle/attack streams
    /// decoupled from one another.
    Rng substream(std::string_view name) const;

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
    std::uint64_t seed_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace sodef
