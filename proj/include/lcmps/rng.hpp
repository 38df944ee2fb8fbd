#pragma once
// Splittable random streams. Stream k of a run is a SplitMix64 sequence whose
// starting state is a hash of (master_seed, k), so every sample draws the same
// numbers no matter which worker executes it.

#include <cstdint>
#include <limits>

namespace lcmps {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RandomStream {
  public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t seed) : state_(seed) {}
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : state_(splitmix64_mix(master_seed ^ splitmix64_mix(stream_id + 0x9e3779b97f4a7c15ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(state_);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

} // namespace lcmps
