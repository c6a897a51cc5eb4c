#pragma once

#include <cstdint>
#include <vector>

namespace metatune {

// splitmix64: tiny, fast, and bit-exact across platforms. Used everywhere a
// reproducible stream is needed (shuffles, test-data generators).
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound). bound must be nonzero.
    uint64_t next_below(uint64_t bound) { return next() % bound; }

private:
    uint64_t state_;
};

// In-place Fisher-Yates shuffle driven by a splitmix64 stream.
template <typename T>
void seeded_shuffle(std::vector<T>& items, uint64_t seed) {
    SplitMix64 rng(seed);
    for (size_t i = items.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace metatune
