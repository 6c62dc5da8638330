#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gplab/error.hpp"
#include "gplab/perc.hpp"
#include "gplab/rng.hpp"
#include "oracles.hpp"

using namespace gplab;
using namespace gplab::perc;

namespace {

OccupancyGrid random_grid(const GridBox& box, double p, CounterRng& rng, double eps = 1.0) {
    OccupancyGrid g{eps, box, std::vector<std::uint8_t>(box.size()), 0.0, ModelTag::Truncated};
    for (auto& v : g.open) v = rng.uniform() < p;
    return g;
}

std::vector<bool> as_bools(const OccupancyGrid& g) { return {g.open.begin(), g.open.end()}; }

// FullSpace(r, R) with unit cells, by flood fill.
bool full_space_oracle(const OccupancyGrid& g, double r, double R) {
    const int x0 = static_cast<int>(g.box.lo()[0]), y0 = static_cast<int>(g.box.lo()[1]);
    auto src = [&](int x, int y) { return std::max(std::abs(x), std::abs(y)) - 0.5 <= r; };
    auto tgt = [&](int x, int y) { return std::max(std::abs(x), std::abs(y)) + 0.5 > R; };
    return oracle::path_exists(as_bools(g), x0, y0, static_cast<int>(g.box.extent(0)), static_cast<int>(g.box.extent(1)),
                               src, tgt, [](int, int) { return true; });
}

}  // namespace

TEST_CASE("labeling matches breadth-first search") {
    CounterRng rng({21, 0, Substream::Synthetic, 0});
    const GridBox box({0, 0}, {15, 15});
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto g = random_grid(box, 0.3 + 0.4 * rng.uniform(), rng);
        const auto lab = label(g);
        const auto ref = oracle::bfs_components(as_bools(g), 16, 16);
        mismatches += !oracle::same_partition(ref, lab.id);
        const int ncomp = *std::max_element(ref.begin(), ref.end()) + 1;
        mismatches += static_cast<int>(lab.count()) != ncomp;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("labeling basics") {
    const GridBox box({0, 0}, {9, 9});
    OccupancyGrid g{1.0, box, std::vector<std::uint8_t>(box.size(), 0), 0.0, ModelTag::Truncated};
    CHECK(label(g).count() == 0);
    for (Index k = 2; k < 9; ++k) g.open[box.linear({4, k})] = 1;
    const auto lab = label(g);
    REQUIRE(lab.count() == 1);
    CHECK(lab.sizes[0] == 7);
    CHECK(lab.faces[0] == 0);
    g.open[box.linear({4, 9})] = 1;
    CHECK(label(g).faces[0] == 8u);  // high face of the second axis
}

TEST_CASE("occurs matches exhaustive search on FullSpace(1,4)") {
    CounterRng rng({22, 0, Substream::Synthetic, 0});
    const GridBox box({-6, -6}, {5, 5});
    const auto ev = AdmissibleEvent::full_space(1, 4);
    const EventGeometry geo(ev, box, 1.0);
    int mismatches = 0, hits = 0;
    for (int t = 0; t < 100; ++t) {
        const auto g = random_grid(box, 0.5 + 0.2 * rng.uniform(), rng);
        const bool got = occurs(g, geo);
        hits += got;
        mismatches += got != full_space_oracle(g, 1, 4);
    }
    CHECK(mismatches == 0);
    CHECK(hits > 5);
    CHECK(hits < 95);
}

TEST_CASE("event text and validation") {
    CHECK(parse_event("full:1,4").R == 4);
    CHECK(parse_event("slab:1,4,2").M == 2);
    CHECK(parse_event("cross:32").aspect == 1);
    CHECK(parse_event("cross:16,1.25").text() == "cross:16,1.25");
    try {
        parse_event("full:4,1");
        FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigInvalid);
        CHECK(e.field() == "event.R");
    }
    CHECK_THROWS_AS(parse_event("ring:1,2"), Error);
    CHECK_THROWS_AS(parse_event("full:1,x"), Error);
    try {
        EventGeometry(AdmissibleEvent::full_space(1, 8), GridBox::symmetric(2, 8), 1.0);
        FAIL("expected WindowTooSmall");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::WindowTooSmall);
    }
    CHECK_NOTHROW(EventGeometry(AdmissibleEvent::full_space(1, 8), required_box(AdmissibleEvent::full_space(1, 8), 2, 1.0), 1.0));
}

TEST_CASE("trivial occurrences") {
    const GridBox box = GridBox::symmetric(2, 6);
    OccupancyGrid g{1.0, box, std::vector<std::uint8_t>(box.size(), 0), 0.0, ModelTag::Truncated};
    const auto ev = AdmissibleEvent::full_space(0, 5);
    CHECK(!occurs(g, ev));
    for (Index k = 0; k <= 6; ++k) g.open[box.linear({0, k})] = 1;
    CHECK(occurs(g, ev));
    const auto cross = AdmissibleEvent::crossing(8);
    CHECK(!occurs(g, cross));
    for (Index k = -4; k <= 4; ++k) g.open[box.linear({k, 2})] = 1;
    CHECK(occurs(g, cross));
}

TEST_CASE("slab domain restricts paths") {
    // d = 3, path leaves the slab |x3| <= 1 and must not count.
    const GridBox box = GridBox::symmetric(3, 4);
    OccupancyGrid g{1.0, box, std::vector<std::uint8_t>(box.size(), 0), 0.0, ModelTag::Truncated};
    const auto ev = AdmissibleEvent::slab(0, 3, 0.4);
    for (Index k = 0; k <= 2; ++k) g.open[box.linear({k, 0, 0})] = 1;
    g.open[box.linear({2, 0, 1})] = 1;
    g.open[box.linear({3, 0, 1})] = 1;
    g.open[box.linear({4, 0, 1})] = 1;
    CHECK(!occurs(g, ev));
    CHECK(occurs(g, AdmissibleEvent::slab(0, 3, 1.0)));
    CHECK(occurs(g, AdmissibleEvent::full_space(0, 3)));
}

TEST_CASE("occurs is monotone under promotions") {
    CounterRng rng({23, 0, Substream::Synthetic, 0});
    const GridBox box = GridBox::symmetric(2, 8);
    const EventGeometry geo(AdmissibleEvent::full_space(1, 6), box, 1.0);
    int violations = 0;
    for (int t = 0; t < 200; ++t) {
        auto g = random_grid(box, 0.55, rng);
        bool before = occurs(g, geo);
        for (int k = 0; k < 30; ++k) {
            const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(box.size()));
            g.open[i] = 1;
            const bool after = occurs(g, geo);
            violations += before && !after;
            before = after;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("pivotality matches its definition") {
    CounterRng rng({24, 0, Substream::Synthetic, 0});
    const GridBox box({-6, -6}, {5, 5});
    const EventGeometry geo(AdmissibleEvent::full_space(1, 4), box, 1.0);
    int mismatches = 0, coarse_hits = 0;
    for (int t = 0; t < 200; ++t) {
        const auto g = random_grid(box, 0.5, rng);
        const Point y{std::floor(8 * rng.uniform()) - 4, std::floor(8 * rng.uniform()) - 4};
        const double L = 1 + std::floor(2 * rng.uniform());
        auto up = g, down = g;
        for (std::size_t i = 0; i < box.size(); ++i) {
            const auto j = box.point(i);
            if (std::abs(double(j[0]) - y[0]) <= L && std::abs(double(j[1]) - y[1]) <= L) up.open[i] = 1, down.open[i] = 0;
        }
        const bool with = full_space_oracle(up, 1, 4);
        const bool coarse = with && !full_space_oracle(down, 1, 4);
        const bool closed = with && !full_space_oracle(g, 1, 4);
        coarse_hits += coarse;
        mismatches += coarse != coarse_pivotal(g, geo, y, L);
        mismatches += closed != closed_pivotal(g, geo, y, L);
        if (occurs(g, geo)) mismatches += closed_pivotal(g, geo, y, L);
    }
    CHECK(mismatches == 0);
    CHECK(coarse_hits > 0);

    // A closed grid where the box alone bridges S1 to the outside of S2.
    const GridBox big = GridBox::symmetric(2, 5);
    OccupancyGrid empty{1.0, big, std::vector<std::uint8_t>(big.size(), 0), 0.0, ModelTag::Truncated};
    const EventGeometry g2(AdmissibleEvent::full_space(0, 2), big, 1.0);
    CHECK(coarse_pivotal(empty, g2, {0, 0}, 3));
    CHECK(closed_pivotal(empty, g2, {0, 0}, 3));
}

TEST_CASE("critical level is the first level where the event occurs") {
    CounterRng rng({25, 0, Substream::Synthetic, 0});
    const GridBox box = GridBox::symmetric(2, 10);
    for (auto ev : {AdmissibleEvent::full_space(1, 7), AdmissibleEvent::crossing(16, 1.25)}) {
        const EventGeometry geo(ev, box, 1.0);
        for (int t = 0; t < 50; ++t) {
            std::vector<double> v(box.size());
            std::vector<field::NoiseFlag> flags(box.size(), field::NoiseFlag::Neutral);
            for (std::size_t i = 0; i < v.size(); ++i) {
                v[i] = rng.normal();
                const double u = rng.uniform();
                if (u < 0.05) flags[i] = field::NoiseFlag::ForcedClosed;
                else if (u < 0.1) flags[i] = field::NoiseFlag::ForcedOpen;
            }
            const double lc = critical_level(geo, v, flags);
            REQUIRE(std::isfinite(lc));
            CHECK(occurs(threshold_values(box, 1.0, v, flags, lc, ModelTag::Truncated), geo));
            CHECK(!occurs(threshold_values(box, 1.0, v, flags, std::nextafter(lc, -1e300), ModelTag::Truncated), geo));
        }
    }
    // Everything forced closed: never occurs.
    const EventGeometry geo(AdmissibleEvent::full_space(1, 7), box, 1.0);
    std::vector<double> v(box.size(), 0.0);
    std::vector<field::NoiseFlag> closed(box.size(), field::NoiseFlag::ForcedClosed);
    CHECK(critical_level(geo, v, closed) == kNever);
}

TEST_CASE("thresholding is nested in the level and respects flags") {
    CounterRng rng({26, 0, Substream::Synthetic, 0});
    const GridBox box = GridBox::symmetric(2, 12);
    std::vector<double> v(box.size());
    std::vector<field::NoiseFlag> flags(box.size(), field::NoiseFlag::Neutral);
    for (auto& x : v) x = rng.normal();
    flags[3] = field::NoiseFlag::ForcedClosed;
    flags[4] = field::NoiseFlag::ForcedOpen;
    const auto hi = threshold_values(box, 1.0, v, flags, 1e9, ModelTag::Truncated);
    CHECK(hi.open[3] == 0);
    CHECK(hi.open_count() == box.size() - 1);
    CHECK(threshold_values(box, 1.0, v, flags, -1e9, ModelTag::Truncated).open_count() == 1);
    for (double l1 = -2; l1 < 2; l1 += 0.25) {
        const auto a = threshold_values(box, 1.0, v, flags, l1, ModelTag::Truncated);
        const auto b = threshold_values(box, 1.0, v, flags, l1 + 0.1, ModelTag::Truncated);
        for (std::size_t i = 0; i < box.size(); ++i) CHECK(a.open[i] <= b.open[i]);
    }
    // Tie f = -level is open.
    v[0] = -0.5;
    CHECK(threshold_values(box, 1.0, v, {}, 0.5, ModelTag::Truncated).open[0] == 1);
}

TEST_CASE("arm reach agrees with occurs") {
    CounterRng rng({27, 0, Substream::Synthetic, 0});
    const GridBox box = GridBox::symmetric(2, 12);
    for (int t = 0; t < 100; ++t) {
        const auto g = random_grid(box, 0.58, rng);
        const double reach = arm_reach(g, label(g), 1.0);
        for (double R : {2.0, 4.0, 7.5, 11.0}) CHECK((reach > R) == occurs(g, AdmissibleEvent::full_space(1, R)));
    }
}

TEST_CASE("bitmap round trip") {
    CounterRng rng({28, 0, Substream::Synthetic, 0});
    const GridBox box({-3, 0}, {4, 6});
    auto g = random_grid(box, 0.5, rng, 0.5);
    g.level = 0.25;
    std::stringstream pbm;
    write_pbm(pbm, g);
    const auto back = read_grid(pbm, grid_metadata_json(g));
    CHECK(back.open == g.open);
    CHECK(back.box == g.box);
    CHECK(back.epsilon == 0.5);
    CHECK(back.level == 0.25);
}
