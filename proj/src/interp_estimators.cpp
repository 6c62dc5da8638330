#include "gplab/interp_estimators.hpp"

#include <cmath>

#include "gplab/error.hpp"
#include "gplab/parallel.hpp"

namespace gplab::interp {

using stats::EstimateReport;

nlohmann::ordered_json InterpSetup::to_json() const {
    nlohmann::ordered_json j;
    j["kernel"] = kernel::to_string(kernel.family());
    j["d"] = kernel.dim();
    j["N"] = range;
    j["s"] = sprinkle;
    j["epsilon_N"] = fine_epsilon;
    j["delta_N"] = fine_delta;
    j["epsilon_2N"] = coarse_epsilon;
    j["delta_2N"] = coarse_delta;
    j["h"] = spacing;
    j["level"] = level;
    j["direction"] = direction == Direction::Up ? "up" : "down";
    return j;
}

GridBox box_window(const InterpSetup& setup, const LatticePoint& z) {
    const Index half = static_cast<Index>(std::llround(setup.range / setup.spacing));
    std::vector<Index> lo(z.size()), hi(z.size());
    for (std::size_t a = 0; a < z.size(); ++a) {
        lo[a] = 2 * half * z[a] - half;
        hi[a] = 2 * half * z[a] + half - 1;
    }
    return GridBox(std::move(lo), std::move(hi));
}

void for_each_hybrid(const InterpSetup& setup, const GridBox& window, const stats::RunOptions& run,
                     const std::function<void(std::size_t, const HybridInputs&)>& fn) {
    const Index rf = field::epsilon_ratio(setup.fine_epsilon, setup.spacing);
    const Index rc = field::epsilon_ratio(setup.coarse_epsilon, setup.spacing);
    field::SamplerConfig cfg;
    cfg.kernel = setup.kernel;
    cfg.spacing = setup.spacing;
    cfg.eval_box = padded_box(window, rf, rc);
    cfg.models = {field::ModelRequest{setup.range, setup.fine_epsilon, setup.fine_delta, false, true},
                  field::ModelRequest{2 * setup.range, setup.coarse_epsilon, setup.coarse_delta, false, true}};
    cfg.max_cells = setup.max_cells;
    parallel_for(
        run.replicas, run.threads, [&] { return field::FieldSampler(cfg); },
        [&](field::FieldSampler& sampler, std::size_t rep) {
            const auto bundles = sampler.sample(run.seed, rep);
            fn(rep, hybrid_inputs(bundles[0], bundles[1], window));
        });
}

namespace {

SprinklingField tau_at(const InterpSetup& setup, const GridBox& window, std::uint64_t half_steps) {
    SprinklingField tau(tau_base(setup.kernel.dim()), setup.range, setup.sprinkle, setup.spacing, window);
    tau.advance_to(half_steps);
    return tau;
}

std::size_t count(const std::vector<std::uint8_t>& v) {
    std::size_t c = 0;
    for (auto x : v) c += x;
    return c;
}

// Mean and standard error of a per-replica difference of indicators.
std::pair<double, double> paired_difference(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    const double n = static_cast<double>(a.size());
    double s = 0, s2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d;
        s2 += d * d;
    }
    const double mean = s / n;
    return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean) / n)};
}

}  // namespace

InclusionResult inclusion_rate(const InterpSetup& setup, std::uint64_t n, const stats::RunOptions& run) {
    if (run.replicas < 1) throw Error(ErrorKind::ConfigInvalid, "replicas must be positive", "replicas");
    const int d = setup.kernel.dim();
    const GridBox window = box_window(setup, SprinklingField::centre(d, n));
    const SprinklingField tau_n = tau_at(setup, window, 2 * n);
    SprinklingField tau_half = tau_n;
    tau_half.step();

    std::vector<std::uint8_t> included(run.replicas), sufficient(run.replicas);
    for_each_hybrid(setup, window, run, [&](std::size_t rep, const HybridInputs& in) {
        included[rep] = is_subset(hybrid(in, setup.level, setup.direction, tau_n),
                                  hybrid(in, setup.level, setup.direction, tau_half));
        sufficient[rep] = sufficient_event(in, tau_n, n);
    });
    auto params = setup.to_json();
    params["n"] = n;
    params["window"] = {{"lo", window.lo()}, {"hi", window.hi()}};
    InclusionResult r;
    r.step = n;
    params["statistic"] = "inclusion";
    r.inclusion = EstimateReport::from_counts(count(included), run.replicas, run.seed, params);
    params["statistic"] = "sufficient";
    r.sufficient = EstimateReport::from_counts(count(sufficient), run.replicas, run.seed, params);
    return r;
}

PivotalityProfile pivotality_profile(const InterpSetup& setup, std::uint64_t n, const perc::AdmissibleEvent& event,
                                     const stats::RunOptions& run) {
    if (run.replicas < 1) throw Error(ErrorKind::ConfigInvalid, "replicas must be positive", "replicas");
    const int d = setup.kernel.dim();
    const double h = setup.spacing;
    const Index margin = 2 * static_cast<Index>(std::llround(setup.range / h));
    const GridBox window = perc::required_box(event, d, h).expanded(margin);
    const perc::EventGeometry geo(event, window, h);

    const SprinklingField tau_n = tau_at(setup, window, 2 * n);
    SprinklingField tau_half = tau_n, tau_next = tau_n;
    tau_half.step();
    tau_next.advance_to(2 * n + 2);

    const GridBox& boxes = tau_n.boxes();
    const LatticePoint zn = SprinklingField::centre(d, n);
    const double L = 4 * setup.range;
    const std::size_t reps = run.replicas;
    std::vector<std::uint8_t> a_n(reps), a_half(reps), a_next(reps), incl(reps);
    std::vector<std::vector<std::uint8_t>> piv(boxes.size(), std::vector<std::uint8_t>(reps));

    for_each_hybrid(setup, window, run, [&](std::size_t rep, const HybridInputs& in) {
        const auto g_n = hybrid(in, setup.level, setup.direction, tau_n);
        const auto g_half = hybrid(in, setup.level, setup.direction, tau_half);
        const auto g_next = hybrid(in, setup.level, setup.direction, tau_next);
        a_n[rep] = perc::occurs(g_n, geo);
        a_half[rep] = perc::occurs(g_half, geo);
        a_next[rep] = perc::occurs(g_next, geo);
        incl[rep] = is_subset(g_n, g_half);
        for_each_point(boxes, [&](std::size_t b, const LatticePoint& z) {
            Point y(z.size());
            for (std::size_t a = 0; a < z.size(); ++a) y[a] = 2 * setup.range * static_cast<double>(z[a]);
            piv[b][rep] = perc::coarse_pivotal(g_half, geo, y, L);
        });
    });

    auto params = setup.to_json();
    params["n"] = n;
    params["event"] = event.text();
    params["window"] = {{"lo", window.lo()}, {"hi", window.hi()}};
    auto report = [&](const std::string& what, std::size_t hits) {
        auto p = params;
        p["statistic"] = what;
        return EstimateReport::from_counts(hits, reps, run.seed, std::move(p));
    };

    PivotalityProfile out;
    out.step = n;
    out.event = event.text();
    out.at_n = report("P[I_n in A]", count(a_n));
    out.at_half = report("P[I_n+1/2 in A]", count(a_half));
    out.at_next = report("P[I_n+1 in A]", count(a_next));
    std::tie(out.p_difference, out.p_difference_sigma) = paired_difference(a_n, a_half);
    std::tie(out.q_difference, out.q_difference_sigma) = paired_difference(a_next, a_half);
    std::size_t pc = 0, qc = 0;
    for (std::size_t i = 0; i < reps; ++i) {
        pc += a_n[i] && !a_half[i];
        qc += a_next[i] && !a_half[i];
    }
    out.p_coupled = report("P[I_n in A, I_n+1/2 not in A]", pc);
    out.q_coupled = report("P[I_n+1 in A, I_n+1/2 not in A]", qc);
    out.inclusion = report("P[I_n subset I_n+1/2]", count(incl));

    EstimateReport at_centre;
    for_each_point(boxes, [&](std::size_t b, const LatticePoint& z) {
        auto p = params;
        p["statistic"] = "P[Piv(4N)]";
        p["z"] = z;
        auto r = EstimateReport::from_counts(count(piv[b]), reps, run.seed, std::move(p));
        if (z == zn) at_centre = r;
        out.centres.push_back({z, std::move(r)});
    });

    out.q_nonnegative = out.q_difference >= -3 * out.q_difference_sigma;
    const double q_sigma = std::hypot(out.q_difference_sigma, out.q_coupled.sigma());
    out.q_ways_agree = std::abs(out.q_difference - out.q_coupled.estimate) <= 3 * q_sigma;
    // x_n may lie outside the window, in which case nothing there is pivotal.
    const double piv_n = at_centre.replicas ? at_centre.estimate : 0.0;
    const double piv_sigma = at_centre.replicas ? at_centre.sigma() : 0.0;
    const double fail = 1.0 - out.inclusion.estimate;
    out.decoupling_bound = fail * piv_n;
    const double sigma = std::sqrt(out.p_difference_sigma * out.p_difference_sigma + fail * fail * piv_sigma * piv_sigma +
                                   piv_n * piv_n * out.inclusion.sigma() * out.inclusion.sigma());
    out.decoupling_holds = out.p_difference <= out.decoupling_bound + 3 * sigma;
    return out;
}

nlohmann::ordered_json to_json(const InclusionResult& r) {
    nlohmann::ordered_json j;
    j["n"] = r.step;
    j["inclusion"] = r.inclusion.to_json();
    j["sufficient"] = r.sufficient.to_json();
    j["inclusion_ge_sufficient"] = r.inclusion.estimate >= r.sufficient.estimate -
                                                             3 * std::hypot(r.inclusion.sigma(), r.sufficient.sigma());
    return j;
}

nlohmann::ordered_json to_json(const PivotalityProfile& p) {
    nlohmann::ordered_json j;
    j["n"] = p.step;
    j["event"] = p.event;
    j["at_n"] = p.at_n.to_json();
    j["at_half"] = p.at_half.to_json();
    j["at_next"] = p.at_next.to_json();
    j["p_difference"] = {{"estimate", p.p_difference}, {"sigma", p.p_difference_sigma}};
    j["q_difference"] = {{"estimate", p.q_difference}, {"sigma", p.q_difference_sigma}};
    j["p_coupled"] = p.p_coupled.to_json();
    j["q_coupled"] = p.q_coupled.to_json();
    j["inclusion"] = p.inclusion.to_json();
    j["centres"] = nlohmann::ordered_json::array();
    for (const auto& c : p.centres)
        j["centres"].push_back({{"z", c.z}, {"estimate", c.report.estimate}, {"ci_lo", c.report.ci.lo},
                                {"ci_hi", c.report.ci.hi}, {"hits", c.report.hits}});
    j["q_nonnegative"] = p.q_nonnegative;
    j["q_ways_agree"] = p.q_ways_agree;
    j["decoupling_bound"] = p.decoupling_bound;
    j["decoupling_holds"] = p.decoupling_holds;
    return j;
}

}  // namespace gplab::interp
