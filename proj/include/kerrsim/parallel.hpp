#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace kerrsim {

// Process-wide worker count used by parallel_for; 1 means serial. Outputs never
// depend on this value: every parallel loop writes to index-keyed slots and any
// reduction runs serially in index order afterwards.
void set_max_threads(unsigned threads);
unsigned max_threads();

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Counter-based seeding. Stream k of a run with seed s is a SplitMix64 hash of
// (s, k), so per-trajectory and per-grid-point randomness is fixed by the index
// alone.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

// Small deterministic generator (SplitMix64 sequence) with a portable
// uniform double; standard distributions are avoided because their output is
// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : state_(stream_seed(seed, stream)) {}

    std::uint64_t next_u64();
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Sum of `trials` Bernoulli(p) draws.
    int binomial(int trials, double p);

private:
    std::uint64_t state_;
};

}  // namespace kerrsim
