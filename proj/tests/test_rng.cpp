#include <doctest.h>

#include <cmath>
#include <vector>

#include "gplab/rng.hpp"

using gplab::CounterRng;
using gplab::Substream;

// Known-answer vectors published with the Random123 reference implementation.
TEST_CASE("philox4x32-10 known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(gplab::philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(gplab::philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(gplab::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and keyed") {
    CounterRng a({7, 3, Substream::Noise, 0});
    CounterRng b({7, 3, Substream::Noise, 0});
    CounterRng c({7, 4, Substream::Noise, 0});
    CounterRng e({7, 3, Substream::Tdelta, 0});
    int same_c = 0, same_e = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a();
        CHECK(x == b());
        same_c += x == c();
        same_e += x == e();
    }
    CHECK(same_c == 0);
    CHECK(same_e == 0);
}

TEST_CASE("uniform and normal moments") {
    CounterRng rng({11, 0, Substream::Synthetic, 0});
    const int n = 400000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        su += u;
    }
    std::vector<double> z(n);
    rng.fill_normal(z);
    for (double v : z) {
        sn += v;
        sn2 += v * v;
    }
    CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
    CHECK(std::abs(sn / n) < 5 / std::sqrt(double(n)));
    CHECK(std::abs(sn2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
}
