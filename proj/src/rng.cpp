#include "advkd/rng.hpp"

#include <cmath>
#include <numbers>

namespace advkd {

double Rng::uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

uint64_t Rng::uniform_index(uint64_t n) {
    // Rejection sampling keeps the draw unbiased for any n.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % n;
}

float Rng::normal() {
    double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    return static_cast<float>(r * std::cos(2.0 * std::numbers::pi * u2));
}

Tensor Rng::normal_tensor(std::vector<int> shape) {
    Tensor t(std::move(shape));
    float* p = t.data();
    for (size_t i = 0; i < t.numel(); ++i) p[i] = normal();
    return t;
}

Tensor Rng::uniform_tensor(std::vector<int> shape, float lo, float hi) {
    Tensor t(std::move(shape));
    float* p = t.data();
    for (size_t i = 0; i < t.numel(); ++i) p[i] = static_cast<float>(uniform(lo, hi));
    return t;
}

std::vector<int> Rng::permutation(int n) {
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        uint64_t j = uniform_index(static_cast<uint64_t>(i) + 1);
        std::swap(perm[static_cast<size_t>(i)], perm[j]);
    }
    return perm;
}

uint64_t derive_seed(uint64_t base, uint64_t stream) {
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace advkd
