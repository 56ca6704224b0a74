#pragma once

#include "otke/types.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace otke {

// Small deterministic generator (splitmix64 core) so that seeded results are
// identical across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    Scalar uniform() { return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53; }

    Scalar uniform(Scalar lo, Scalar hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection sampled.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    Scalar normal() {
        Scalar u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const Scalar u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

    // Derive an independent stream, e.g. one per epoch or per worker.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        Rng r(seed ^ (0x632be59bd9b4e019ULL + stream * 0x9e3779b97f4a7c15ULL));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

inline Mat random_matrix(Rng& rng, Index rows, Index cols, Scalar lo = 0.0, Scalar hi = 1.0) {
    Mat out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = rng.uniform(lo, hi);
    return out;
}

inline Mat random_gaussian_matrix(Rng& rng, Index rows, Index cols, Scalar stddev = 1.0) {
    Mat out(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) out(i, j) = stddev * rng.normal();
    return out;
}

}  // namespace otke
