#pragma once

#include <cstdint>
#include <random>

#include "advkd/tensor.hpp"

namespace advkd {

/// Deterministic random source. Normal deviates use an explicit Box-Muller
/// transform (no cached spare) so the draw sequence is fixed by the seed
/// alone, independent of standard-library distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Integer in [0, n).
    uint64_t uniform_index(uint64_t n);

    /// Standard normal deviate.
    float normal();

    Tensor normal_tensor(std::vector<int> shape);
    Tensor uniform_tensor(std::vector<int> shape, float lo, float hi);

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<int> permutation(int n);

private:
    std::mt19937_64 gen_;
};

/// Stable seed derivation for independent substreams (splitmix64 step).
uint64_t derive_seed(uint64_t base, uint64_t stream);

}  // namespace advkd
