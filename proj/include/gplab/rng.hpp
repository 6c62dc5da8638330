#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace gplab {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// A keyed bijection of a 128-bit counter; every output block is a pure
// function of (key, counter).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

std::uint64_t splitmix64(std::uint64_t x);

enum class Substream : std::uint32_t {
    Noise = 1,
    Tdelta = 2,
    Gaussian = 3,
    Reweighted = 4,
    Synthetic = 5,
};

// Where a random stream comes from: master seed, replica index and the
// purpose-specific substream (with an optional tag, e.g. the truncation range).
struct StreamKey {
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
    Substream substream = Substream::Noise;
    std::uint64_t tag = 0;
};

// Sequential view over a counter-based stream. Two streams with equal keys
// produce identical sequences; different keys are statistically independent.
class CounterRng {
  public:
    using result_type = std::uint64_t;

    explicit CounterRng(const StreamKey& key);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();
    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    double normal();
    void fill_normal(std::span<double> out);

  private:
    void refill();

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t stream_word_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int used_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace gplab
