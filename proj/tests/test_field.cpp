#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gplab/error.hpp"
#include "gplab/field.hpp"
#include "oracles.hpp"

using namespace gplab;
using namespace gplab::field;

namespace {

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double scale = 0, diff = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        scale = std::max(scale, std::abs(b[i]));
        diff = std::max(diff, std::abs(a[i] - b[i]));
    }
    return diff / scale;
}

}  // namespace

TEST_CASE("white noise is reproducible with unit moments") {
    const GridBox box = GridBox::symmetric(2, 499);  // 999² ≈ 10^6 cells
    const auto a = sample_noise(box, 0.25, 42, 0);
    const auto b = sample_noise(box, 0.25, 42, 0);
    CHECK(a.values == b.values);
    double s = 0, s2 = 0;
    for (double v : a.values) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(a.values.size());
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.01);
    CHECK(sample_noise(box, 0.25, 42, 1).values != a.values);
    CHECK_THROWS_AS(sample_noise(box, 0.25, 42, 0, 1000), Error);
}

TEST_CASE("transform convolution equals the direct sum") {
    const auto bf = kernel::KernelSpec::bargmann_fock(2);
    const double h = 0.25;
    const GridBox eval = GridBox::symmetric(2, 16).expanded(0);
    const GridBox eval32({-16, -16}, {15, 15});
    const auto st = make_stencil(bf, h, 2.0);
    const auto st_cut = make_stencil(bf, h, 4.6, 6.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto noise = sample_noise(eval32.expanded(st.radius), h, seed, 0);
        CHECK(max_rel_diff(convolve(noise, st, eval32), oracle::direct_convolve(noise, st, eval32)) < 1e-10);
    }
    const auto noise = sample_noise(eval.expanded(st_cut.radius), h, 99, 0);
    CHECK(max_rel_diff(convolve(noise, st_cut, eval), oracle::direct_convolve(noise, st_cut, eval)) < 1e-10);
    CHECK_THROWS_AS(convolve(noise, st_cut, eval.expanded(1)), Error);

    WhiteNoiseGrid zero{h, noise.cells, std::vector<double>(noise.cells.size(), 0.0), {}};
    const auto out = convolve(zero, st, eval);
    CHECK(std::all_of(out.begin(), out.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("f and f_N are coupled through the same noise") {
    const auto bf = kernel::KernelSpec::bargmann_fock(2);
    const double h = 0.25;
    const GridBox eval = GridBox::symmetric(2, 8);
    const auto b = make_bundle(bf, {3.0}, 0.25, 0.0, eval, h, 5, 2);
    // f - f_N must be the convolution with q(1 - χ_N); build that stencil directly.
    const auto full = make_stencil(bf, h, bf.numeric_radius());
    const auto cut = make_stencil(bf, h, bf.numeric_radius(), 3.0);
    KernelStencil rest = full;
    const GridBox inner = cut.box(2);
    for_each_point(full.box(2), [&](std::size_t i, const LatticePoint& k) {
        if (inner.contains(k)) rest.weights[i] -= cut.weights[inner.linear(k)];
    });
    const GridBox noise_box = eval.expanded(full.radius);
    const auto noise = sample_noise(noise_box, h, 5, 2);
    const auto diff = oracle::direct_convolve(noise, rest, eval);
    double worst = 0;
    for (std::size_t i = 0; i < diff.size(); ++i) worst = std::max(worst, std::abs(b.full[i] - b.truncated[i] - diff[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("large cutoff reproduces the full field") {
    const auto bf = kernel::KernelSpec::bargmann_fock(2);
    // χ_N ≡ 1 on |x| <= N/4, and q < 1e-9 beyond ~4.6.
    const auto b = make_bundle(bf, {20.0}, 0.25, 0.0, GridBox::symmetric(2, 8), 0.25, 1, 0);
    const auto gap = local_gap(b);
    CHECK(gap.truncation < 1e-8);
    CHECK(gap.discretisation == 0.0);
}

TEST_CASE("discretised field is a literal subsample") {
    const auto bf = kernel::KernelSpec::bargmann_fock(2);
    const auto b = make_bundle(bf, {6.0}, 1.0, 0.0, GridBox::symmetric(2, 12), 0.25, 3, 0);
    CHECK(b.eps_ratio == 4);
    const auto sub = b.truncated_on_eps();
    for_each_point(b.eps_box, [&](std::size_t j, const LatticePoint& p) {
        CHECK(sub[j] == b.truncated[b.eval_box.linear(b.eps_to_eval(p))]);
    });
    // Representative cell [εj - ε/2, εj + ε/2).
    CHECK(b.representative({-2, 1}) == LatticePoint{0, 0});
    CHECK(b.representative({-3, 2}) == LatticePoint{-1, 1});
    CHECK(b.representative({5, 6}) == LatticePoint{1, 2});
    CHECK(local_gap(b).discretisation > 0.0);
    CHECK_THROWS_AS(make_bundle(bf, {6.0}, 0.3, 0.0, GridBox::symmetric(2, 12), 0.25, 3, 0), Error);
}

TEST_CASE("noise flags") {
    const GridBox box = GridBox::symmetric(2, 158);  // ≈ 10^5 cells
    const auto none = sample_flags(box, 0.0, 8, 1, 0);
    CHECK(std::all_of(none.begin(), none.end(), [](NoiseFlag f) { return f == NoiseFlag::Neutral; }));
    const auto all = sample_flags(box, 1.0, 8, 1, 0);
    const double n = static_cast<double>(all.size());
    const double open = static_cast<double>(std::count(all.begin(), all.end(), NoiseFlag::ForcedOpen));
    CHECK(std::count(all.begin(), all.end(), NoiseFlag::Neutral) == 0);
    CHECK(std::abs(open / n - 0.5) < 0.01);

    const double delta = 0.2;
    const auto some = sample_flags(box, delta, 8, 2, 0);
    const double p[3] = {1 - delta, delta / 2, delta / 2};
    for (int k = 0; k < 3; ++k) {
        const double c = static_cast<double>(std::count(some.begin(), some.end(), static_cast<NoiseFlag>(k)));
        CHECK(std::abs(c / n - p[k]) < 3 * std::sqrt(p[k] * (1 - p[k]) / n));
    }
    // Different ranges draw independent flags.
    CHECK(sample_flags(box, delta, 8, 2, 0) != sample_flags(box, delta, 16, 2, 0));
}

TEST_CASE("field law at h = 0.25") {
    const auto bf = kernel::KernelSpec::bargmann_fock(2);
    SamplerConfig cfg;
    cfg.kernel = bf;
    cfg.eval_box = GridBox({0, 0}, {63, 63});
    cfg.models = {ModelRequest{kNoCutoff, 0.25, 0.0, true, false}};
    FieldSampler sampler(cfg);
    double s2 = 0, s11 = 0, n = 0, n1 = 0;
    for (std::uint64_t r = 0; r < 100; ++r) {
        const auto b = sampler.sample(77, r).front();
        for_each_point(b.eval_box, [&](std::size_t i, const LatticePoint& p) {
            s2 += b.full[i] * b.full[i];
            n += 1;
            if (p[0] + 4 <= 63) {
                s11 += b.full[i] * b.full[i + 4 * b.eval_box.stride(0)];
                n1 += 1;
            }
        });
    }
    CHECK(std::abs(s2 / n - 1.0) < 0.03);
    CHECK(std::abs(s11 / n1 - std::exp(-0.5)) < 0.03);
}

TEST_CASE("sampler shares noise across models") {
    const auto bf = kernel::KernelSpec::bargmann_fock(2);
    SamplerConfig cfg;
    cfg.kernel = bf;
    cfg.eval_box = GridBox::symmetric(2, 10);
    cfg.models = {ModelRequest{4.0, 0.5, 0.1, true, true}, ModelRequest{8.0, 0.25, 0.0, false, true}};
    FieldSampler sampler(cfg);
    const auto bs = sampler.sample(9, 4);
    REQUIRE(bs.size() == 2);
    const auto one = make_bundle(bf, {4.0}, 0.5, 0.1, cfg.eval_box, 0.25, 9, 4);
    CHECK(max_rel_diff(bs[0].truncated, one.truncated) < 1e-12);
    CHECK(max_rel_diff(bs[0].full, one.full) < 1e-12);
    CHECK(bs[0].flags == one.flags);
    CHECK(!bs[1].has_full());
    CHECK(bs[1].eps_ratio == 1);
}

TEST_CASE("bundle round trip") {
    const auto bf = kernel::KernelSpec::bargmann_fock(2);
    const auto b = make_bundle(bf, {4.0}, 0.5, 0.3, GridBox::symmetric(2, 6), 0.25, 12, 1);
    std::stringstream ss;
    write_bundle(ss, b);
    const auto c = read_bundle(ss);
    CHECK(c.full == b.full);
    CHECK(c.truncated == b.truncated);
    CHECK(c.flags == b.flags);
    CHECK(c.eval_box == b.eval_box);
    CHECK(c.eps_box == b.eps_box);
    CHECK(c.lineage == b.lineage);
    CHECK(c.delta == b.delta);
    CHECK(bundle_metadata_json(b).find("\"eps_ratio\": 2") != std::string::npos);
}

TEST_CASE("stationarity and lag symmetry") {
    // 56 sites four units apart, where correlations are below e^{-8}.
    SamplerConfig cfg;
    cfg.kernel = kernel::KernelSpec::bargmann_fock(2);
    cfg.eval_box = GridBox({-4, -4}, {116, 100});
    cfg.models = {ModelRequest{kNoCutoff, 0.25, 0.0, true, false}};
    FieldSampler sampler(cfg);
    const int reps = 400;
    std::vector<LatticePoint> sites;
    for (Index x = 0; x < 8; ++x)
        for (Index y = 0; y < 7; ++y) sites.push_back({16 * x, 16 * y});
    std::vector<double> sum2(sites.size(), 0.0);
    std::vector<double> lag_diff;
    for (int r = 0; r < reps; ++r) {
        const auto b = sampler.sample(404, static_cast<std::uint64_t>(r)).front();
        auto f = [&](Index x, Index y) { return b.full[b.eval_box.linear({x, y})]; };
        double d = 0;
        for (std::size_t k = 0; k < sites.size(); ++k) {
            const Index x = sites[k][0], y = sites[k][1];
            sum2[k] += f(x, y) * f(x, y);
            d += f(x, y) * (f(x + 4, y + 2) - f(x - 4, y - 2));
        }
        lag_diff.push_back(d / static_cast<double>(sites.size()));
    }
    // Homogeneity of the site variances: each is a mean of reps squares of
    // a centred normal, so its variance is 2σ⁴/reps.
    double pooled = 0;
    for (double s : sum2) pooled += s / reps;
    pooled /= static_cast<double>(sites.size());
    double chi2 = 0;
    for (double s : sum2) chi2 += std::pow(s / reps - pooled, 2) / (2 * pooled * pooled / reps);
    CHECK(chi2 < 82.29);  // 99% quantile of χ² with 55 degrees of freedom

    double m = 0, m2 = 0;
    for (double v : lag_diff) {
        m += v;
        m2 += v * v;
    }
    m /= reps;
    const double se = std::sqrt((m2 / reps - m * m) / reps);
    CHECK(std::abs(m) < 3 * se);
}
