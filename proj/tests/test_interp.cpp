#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gplab/error.hpp"
#include "gplab/interp.hpp"
#include "gplab/interp_estimators.hpp"
#include "gplab/kernel.hpp"

using namespace gplab;
using namespace gplab::interp;

namespace {

// Brute-force lattice sum of (1 + |x|∞^{d+1})^{-1} over |x|∞ <= K, point by point.
double brute_sum(int d, Index K) {
    double s = 0;
    for_each_point(GridBox::symmetric(d, K), [&](std::size_t, const LatticePoint& x) {
        Index m = 0;
        for (Index v : x) m = std::max(m, std::abs(v));
        s += 1.0 / (1.0 + std::pow(double(m), d + 1));
    });
    return s;
}

struct Coupled {
    HybridInputs in;
    field::FieldBundle fine, coarse;
};

Coupled coupled(std::uint64_t seed, std::uint64_t replica, const GridBox& target, double delta_fine, double delta_coarse) {
    field::SamplerConfig cfg;
    cfg.kernel = kernel::KernelSpec::bargmann_fock(2);
    cfg.spacing = 0.25;
    cfg.eval_box = padded_box(target, 2, 1);
    cfg.models = {field::ModelRequest{8.0, 0.25, delta_coarse, false, true},
                  field::ModelRequest{4.0, 0.5, delta_fine, false, true}};
    field::FieldSampler sampler(cfg);
    auto b = sampler.sample(seed, replica);
    Coupled c{hybrid_inputs(b[1], b[0], target), b[1], b[0]};
    return c;
}

}  // namespace

TEST_CASE("tau normalisation") {
    for (int d : {2, 3}) {
        const auto t = tau_base(d);
        // Independent bracket: brute sum to K plus integral tails of the
        // shell terms, bounded by a(t) <= 2d(2t+1)^{d-1}/t^{d+1}.
        const Index K = d == 2 ? 400 : 60;
        const double part = brute_sum(d, K);
        double tail_hi = 0, tail_lo = 0;
        for (Index k = K + 1; k < 2000000; ++k) {
            const double a = (std::pow(2.0 * k + 1, d) - std::pow(2.0 * k - 1, d)) / (1 + std::pow(double(k), d + 1));
            tail_hi += a;
        }
        tail_lo = tail_hi;
        // Beyond 2e6 shells the terms are below 2d 2^d / k^2.
        tail_hi += 2.0 * d * std::pow(2.0, d) / 2e6;
        CHECK(t.c * (part + tail_lo) <= 0.5 + 1e-8);
        CHECK(t.c * (part + tail_hi) >= 0.5 - 1e-8);
        CHECK(t.c * (t.partial_sum + t.tail_lo) <= 0.5);
        CHECK(t.c * (t.partial_sum + t.tail_hi) >= 0.5);
        CHECK(t.tail_hi - t.tail_lo < 1e-8);
        CHECK(t(Point(d, 0.0)) == t.c);
    }
    const auto t = tau_base(2);
    // Constant on x + [-1/2, 1/2)^d.
    CHECK(t({1.5, 0.2}) == t({2.49, -0.5}));
    CHECK(t({1.49, 0.2}) == t({0.5, 0.0}));
    CHECK(t({1.49, 0.2}) == doctest::Approx(t.c / 2));
    CHECK(t({-0.5, 0.0}) == t.c);  // cells are half-open: -1/2 belongs to the cell of 0
    CHECK(t({0.5, 0.0}) == t.c / 2);
}

TEST_CASE("centre enumeration order and rank") {
    for (int d : {1, 2, 3}) {
        CentreEnumerator e(d);
        LatticePoint prev;
        std::set<LatticePoint> seen;
        for (std::uint64_t n = 0; n < 3000; ++n) {
            const LatticePoint z = e.next();
            CHECK(centre_rank(z) == n);
            CHECK(seen.insert(z).second);
            if (n > 0) {
                auto key = [](const LatticePoint& p) {
                    Index m = 0;
                    for (Index v : p) m = std::max(m, std::abs(v));
                    return std::make_pair(m, p);
                };
                CHECK(key(prev) < key(z));
            }
            prev = z;
        }
    }
    CHECK(SprinklingField::centre(2, 0) == LatticePoint{0, 0});
    CHECK(SprinklingField::centre(2, 1) == LatticePoint{-1, -1});
}

TEST_CASE("sprinkling steps") {
    const auto base = tau_base(2);
    const double N = 2.0, s = 0.1, h = 0.25;
    const GridBox window = GridBox::symmetric(2, 40);  // 10 length units
    SprinklingField tau(base, N, s, h, window);
    // Boxes are half-open, so the box lattice is not symmetric.
    CHECK(tau.boxes() == GridBox({-2, -2}, {3, 3}));
    tau.step();
    CHECK(tau.k() == 0.5);
    for_each_point(tau.boxes(), [&](std::size_t i, const LatticePoint& z) {
        CHECK(tau.box_values()[i] == (z == LatticePoint{0, 0} ? s / 2 : 0.0));
    });
    // A full step adds τ((y - x_0)/2N)·s at every h-point y.
    const auto before = tau.box_values();
    tau.step();
    for_each_point(window, [&](std::size_t, const LatticePoint& i) {
        const Point y{i[0] * h, i[1] * h};
        const double want = base({y[0] / (2 * N), y[1] / (2 * N)}) * s;
        const std::size_t b = tau.boxes().linear(tau.box_of(i));
        CHECK(tau.box_values()[b] - before[b] == doctest::Approx(want).epsilon(1e-12));
    });
    CHECK(tau.processed({0, 0}));
    CHECK(!tau.processed({-1, -1}));

    double last = tau.max_deficit();
    auto prev = tau.box_values();
    for (int n = 0; n < 400; ++n) {
        tau.step();
        tau.step();
        for (std::size_t i = 0; i < prev.size(); ++i) CHECK(tau.box_values()[i] >= prev[i]);
        prev = tau.box_values();
        CHECK(tau.max_deficit() <= last);
        last = tau.max_deficit();
    }
    CHECK(tau.advance_until_converged(1e-3));
    CHECK(tau.max_deficit() < 1e-3 * s);
    for (double v : tau.box_values()) CHECK(v <= s * (1 + 1e-12));
}

TEST_CASE("hybrid endpoints and inclusions") {
    const GridBox target = GridBox::symmetric(2, 24);
    const auto base = tau_base(2);
    const double level = 0.1, s = 0.2;
    for (auto dir : {Direction::Up, Direction::Down}) {
        for (std::uint64_t rep = 0; rep < 5; ++rep) {
            const auto c = coupled(3, rep, target, 0.05, 0.05);
            SprinklingField tau(base, 4.0, s, 0.25, target);
            const auto start = hybrid(c.in, level, dir, tau);
            const auto want = dir == Direction::Up
                                  ? perc::threshold_values(target, 0.25, c.in.coarse_values, c.in.coarse_flags, level,
                                                           perc::ModelTag::Interpolation)
                                  : perc::threshold_values(target, 0.25, c.in.fine_values, c.in.fine_flags, level - s,
                                                           perc::ModelTag::Interpolation);
            CHECK(start.open == want.open);
            auto half = start;
            for (int n = 0; n < 12; ++n) {
                tau.step();
                half = hybrid(c.in, level, dir, tau);
                tau.step();
                const auto whole = hybrid(c.in, level, dir, tau);
                CHECK(is_subset(half, whole));
            }
            REQUIRE(tau.advance_until_converged(1e-3));
            const auto end = hybrid(c.in, level, dir, tau);
            const auto limit = hybrid_limit(c.in, level, dir, s);
            // Only cells within the residual deficit of their threshold may differ.
            const auto& v = dir == Direction::Up ? c.in.fine_values : c.in.coarse_values;
            const double final_level = dir == Direction::Up ? level + s : level;
            for (std::size_t i = 0; i < end.open.size(); ++i)
                if (end.open[i] != limit.open[i]) CHECK(std::abs(v[i] + final_level) < 1e-3 * s);
        }
    }
}

TEST_CASE("inclusion with identical models is certain") {
    const GridBox target = GridBox::symmetric(2, 16);
    const auto base = tau_base(2);
    const auto c = coupled(4, 0, target, 0.0, 0.0);
    HybridInputs same = c.in;
    same.coarse_values = same.fine_values;
    same.coarse_flags = same.fine_flags;
    SprinklingField tau(base, 4.0, 0.05, 0.25, target);
    for (std::uint64_t n = 0; n < 9; ++n) {
        const auto a = hybrid(same, 0.0, Direction::Up, tau);
        CHECK(sufficient_event(same, tau, n));
        tau.step();
        CHECK(is_subset(a, hybrid(same, 0.0, Direction::Up, tau)));
        tau.step();
    }
}

TEST_CASE("hybrid inputs read the ε-cell representative") {
    const GridBox target = GridBox::symmetric(2, 8);
    const auto c = coupled(5, 0, target, 0.3, 0.3);
    for_each_point(target, [&](std::size_t k, const LatticePoint& i) {
        const auto j = c.fine.representative(i);
        CHECK(c.in.fine_values[k] == c.fine.truncated[c.fine.eval_box.linear(c.fine.eps_to_eval(j))]);
        CHECK(c.in.fine_flags[k] == c.fine.flags[c.fine.eps_box.linear(j)]);
        CHECK(c.in.coarse_values[k] == c.coarse.truncated[c.coarse.eval_box.linear(i)]);
    });
    CHECK_THROWS_AS(hybrid_inputs(c.fine, c.coarse, target.expanded(2)), Error);
}

TEST_CASE("step trace") {
    const GridBox target = GridBox::symmetric(2, 24);
    const auto c = coupled(6, 0, target, 0.0, 0.0);
    const perc::EventGeometry geo(perc::AdmissibleEvent::full_space(1, 5), target, 0.25);
    SprinklingField tau(tau_base(2), 4.0, 0.2, 0.25, target);
    const auto trace = trace_steps(c.in, 0.0, Direction::Up, tau, geo, 10);
    REQUIRE(trace.size() == 11);
    for (std::size_t i = 2; i < trace.size(); i += 2) CHECK(trace[i].included);
    std::ostringstream out;
    write_trace_jsonl(out, trace);
    const std::string text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 11);
    CHECK(text.rfind("{\"k\":0.0,", 0) == 0);
}

TEST_CASE("inclusion rate of identical models is one") {
    InterpSetup s;
    s.spacing = 0.5;
    s.fine_epsilon = s.coarse_epsilon = 0.5;
    s.range = 20.0;  // χ_N ≡ 1 on the kernel's numeric support for N and 2N
    s.sprinkle = 1e-6;
    const auto r = inclusion_rate(s, 0, {100, 3, 2});
    CHECK(r.inclusion.hits == 100);
    CHECK(r.sufficient.hits == 100);
}

TEST_CASE("inclusion rate dominates the sufficient event") {
    InterpSetup s;
    s.range = 2.0;
    s.sprinkle = 0.3;
    s.fine_delta = 0.001;
    s.coarse_delta = 0.0005;
    for (std::uint64_t n : {0, 1}) {
        const auto r = inclusion_rate(s, n, {200, 5, 2});
        CHECK(r.inclusion.estimate >= r.sufficient.estimate);
        CHECK(r.inclusion.estimate < 1.0);
    }
    // The sufficient event implies inclusion replica by replica.
    const auto r = inclusion_rate(s, 0, {200, 5, 1});
    CHECK(r.inclusion.hits >= r.sufficient.hits);
}

TEST_CASE("pivotality profile") {
    InterpSetup s;
    s.range = 1.0;
    s.sprinkle = 0.2;
    const auto ev = perc::AdmissibleEvent::crossing(2, 1);
    const auto p = pivotality_profile(s, 0, ev, {300, 8, 2});
    CHECK(p.q_nonnegative);
    CHECK(p.q_ways_agree);
    CHECK(p.decoupling_holds);
    CHECK(p.q_coupled.estimate >= 0.0);
    // I_{n+1/2} ⊂ I_{n+1}, so the event can only switch on.
    CHECK(p.at_next.hits >= p.at_half.hits);
    CHECK(p.q_difference == doctest::Approx(p.q_coupled.estimate));
    CHECK_FALSE(p.centres.empty());

    s.level = 1e9;
    const auto t = pivotality_profile(s, 0, ev, {100, 8, 2});
    CHECK(t.p_difference == 0.0);
    CHECK(t.q_difference == 0.0);
}
