#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "gplab/error.hpp"
#include "gplab/rng.hpp"
#include "gplab/stats.hpp"

using namespace gplab;
using namespace gplab::stats;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

ModelParams small_model(perc::ModelTag tag = perc::ModelTag::ContinuumApprox) {
    ModelParams m;
    m.spacing = 0.25;
    m.epsilon = 0.5;
    m.tag = tag;
    if (tag == perc::ModelTag::Truncated) m.range = 3.0;
    return m;
}

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("wilson interval") {
    // Textbook value: 8 of 10, z = 1.96 gives [0.4902, 0.9433].
    const auto w = wilson(8, 10, 1.96);
    CHECK(w.lo == doctest::Approx(0.4902).epsilon(1e-3));
    CHECK(w.hi == doctest::Approx(0.9433).epsilon(1e-3));
    CHECK(wilson(0, 100).lo == 0.0);
    CHECK(wilson(100, 100).hi == 1.0);
    CHECK(wilson(0, 100).hi > 0.0);
    CHECK(adjusted_sigma(0, 100) > 0.0);
}

TEST_CASE("report csv columns") {
    auto a = EstimateReport::from_counts(3, 10, 1, {{"level", 0.5}, {"event", "crossing(4,1)"}});
    auto b = EstimateReport::from_counts(5, 10, 1, {{"level", 0.25}, {"N", 4}});
    std::ostringstream out;
    write_reports_csv(out, {a, b});
    const std::string s = out.str();
    CHECK(s.substr(0, s.find('\n')) == "level,event,N,estimate,ci_lo,ci_hi,n");
    CHECK(s.find("\"crossing(4,1)\"") != std::string::npos);
    CHECK(a.to_json()["estimate"] == 0.3);
}

TEST_CASE("decay fit recovers a known slope") {
    std::vector<double> x, y;
    CounterRng rng({5, 0, Substream::Synthetic, 0});
    for (double R = 4; R <= 32; R += 4) {
        x.push_back(R);
        y.push_back(2.0 * R + 0.7 + 0.01 * rng.normal());
    }
    const auto f = fit_points(x, y);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(0.005));
    CHECK(f.intercept == doctest::Approx(0.7).epsilon(0.05));
    CHECK(f.r_squared > 0.9999);
    CHECK(kind_of([] { fit_points({1, 2, 3}, {1, 2, 3}); }) == ErrorKind::ConfigInvalid);
    CHECK(kind_of([] { fit_points({1, 3, 2, 4}, {1, 2, 3, 4}); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("cameron-martin shift in one dimension") {
    Eigen::MatrixXd K(1, 1);
    K << 1.0;
    Eigen::VectorXd w(1);
    w << 1.0;
    // g + Kw ~ N(1, 1), so P[g + Kw >= 0] = Φ(1).
    const auto r = cameron_martin_check(K, w, {{0.0}, {1e300}}, 100000, 3);
    const double exact = normal_cdf(1.0);
    CHECK(r.direct.ci.lo <= exact);
    CHECK(r.direct.ci.hi >= exact);
    CHECK(std::abs(r.reweighted - exact) < 3 * r.reweighted_sigma);
    CHECK(std::abs(r.weight_mean - 1.0) < 4 * r.weight_sigma);

    Eigen::MatrixXd bad(2, 2);
    bad << 1, 2, 2, 1;
    CHECK(kind_of([&] { cameron_martin_check(bad, Eigen::VectorXd::Zero(2), {{0, 0}, {1, 1}}, 10, 0); }) ==
          ErrorKind::NotPSD);
}

TEST_CASE("estimates are coupled across levels") {
    const auto ev = perc::AdmissibleEvent::crossing(4, 1);
    const auto m = small_model();
    RunOptions run{200, 9, 2};
    const auto crit = critical_levels(ev, m, run);
    std::size_t prev = 0;
    for (double l : {-0.6, -0.2, 0.0, 0.2, 0.6}) {
        const auto r = estimate(ev, m, l, run);
        const auto expect = static_cast<std::size_t>(std::count_if(crit.begin(), crit.end(), [&](double c) { return c <= l; }));
        CHECK(r.hits == expect);
        CHECK(r.hits >= prev);
        prev = r.hits;
    }
    CHECK(estimate(ev, m, 1e9, run).estimate == 1.0);
    CHECK(estimate(ev, m, -1e9, run).estimate == 0.0);
    // Thread count does not change results.
    CHECK(estimate(ev, m, 0.1, {200, 9, 1}).hits == estimate(ev, m, 0.1, {200, 9, 3}).hits);
    CHECK(kind_of([&] { estimate(ev, m, 0.0, {50, 9, 1}); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("bisection") {
    const auto fam = perc::AdmissibleEvent::crossing(4, 1);
    RunOptions run{200, 4, 2};
    const auto res = bisect_lc(fam, small_model(), {4, 8}, {}, run);
    REQUIRE(res.scales.size() == 2);
    for (const auto& s : res.scales) {
        CHECK(std::abs(s.level) < 0.5);
        CHECK(s.level_lo <= s.level_hi);
        CHECK(std::abs(s.at_level.estimate - 0.5) < 0.1);
    }
    auto all_flagged = small_model(perc::ModelTag::Truncated);
    all_flagged.delta = 1.0;
    CHECK(kind_of([&] { bisect_lc(fam, all_flagged, {4}, {}, run); }) == ErrorKind::BisectionNonBracketed);
    BisectionOptions narrow;
    narrow.level_lo = 2.0;
    narrow.level_hi = 3.0;
    CHECK(kind_of([&] { bisect_lc(fam, small_model(), {4}, narrow, run); }) == ErrorKind::BisectionNonBracketed);
}

TEST_CASE("decay estimation needs hits") {
    auto m = small_model();
    CHECK(kind_of([&] { fit_decay(DecayKind::OneArm, 0.5, {2, 3, 4, 5}, m, -1e9, {100, 1, 2}); }) ==
          ErrorKind::InsufficientHits);
    const auto f = fit_decay(DecayKind::OneArm, 0.5, {1, 2, 3, 4}, m, 1e9, {100, 1, 2});
    CHECK(f.slope == 0.0);
    CHECK_FALSE(f.accepted);
}

TEST_CASE("comparison ordering with a wide sprinkle") {
    ComparisonSetup setup;
    setup.continuum = small_model();
    setup.fine = small_model(perc::ModelTag::Truncated);
    setup.coarse = setup.fine;
    setup.coarse.range = 6.0;
    setup.sprinkle = 0.5;
    const auto res = compare(setup, {perc::AdmissibleEvent::crossing(4, 1)}, {300, 2, 2});
    REQUIRE(res.size() == 1);
    CHECK(res[0].holds());
    CHECK(res[0].lower.estimate < res[0].upper.estimate);
    CHECK(res[0].lower.seed != res[0].middle.seed);
}
