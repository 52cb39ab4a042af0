#pragma once

#include <cstdint>

namespace fairalloc {

// Deterministic 64-bit generator (splitmix64). Hand-rolled so that streams
// are reproducible bit-for-bit regardless of standard-library internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // Derives an independent stream for subtask `index` of a seeded run.
    static Rng derive(std::uint64_t seed, std::uint64_t index) {
        Rng mix(seed ^ (0x510e527fade682d1ULL + index * 0x428a2f98d728ae22ULL));
        return Rng(mix.next_u64());
    }

private:
    std::uint64_t state_;
};

// FNV-1a over bytes; used for canonical instance digests.
inline std::uint64_t fnv1a(const void* data, std::size_t size) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace fairalloc
