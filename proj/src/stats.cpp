#include "gplab/stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "gplab/error.hpp"
#include "gplab/parallel.hpp"
#include "gplab/rng.hpp"

namespace gplab::stats {

using field::NoiseFlag;

nlohmann::ordered_json ModelParams::to_json() const {
    nlohmann::ordered_json j;
    j["kernel"] = kernel::to_string(kernel.family());
    j["d"] = kernel.dim();
    j["beta"] = kernel.super_polynomial() ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(kernel.decay_exponent());
    j["model"] = perc::to_string(tag);
    j["N"] = std::isfinite(range) ? nlohmann::ordered_json(range) : nlohmann::ordered_json("inf");
    j["epsilon"] = epsilon;
    j["delta"] = delta;
    j["h"] = spacing;
    return j;
}

namespace {

GridBox eval_box_for(const GridBox& eps_box, Index ratio) {
    std::vector<Index> lo(eps_box.lo()), hi(eps_box.hi());
    for (auto& v : lo) v *= ratio;
    for (auto& v : hi) v *= ratio;
    return GridBox(std::move(lo), std::move(hi));
}

nlohmann::ordered_json window_json(const GridBox& eps_box) {
    return {{"lo", eps_box.lo()}, {"hi", eps_box.hi()}};
}

void require_replicas(std::size_t n) {
    if (n < kMinReplicas)
        throw Error(ErrorKind::ConfigInvalid, "at least " + std::to_string(kMinReplicas) + " replicas are required", "replicas");
}

}  // namespace

void for_each_replica(const ModelParams& model, const GridBox& eps_box, const RunOptions& run,
                      const std::function<void(std::size_t, std::span<const double>, std::span<const NoiseFlag>)>& fn) {
    const Index ratio = field::epsilon_ratio(model.epsilon, model.spacing);
    const bool continuum = model.tag == perc::ModelTag::ContinuumApprox;
    field::SamplerConfig cfg;
    cfg.kernel = model.kernel;
    cfg.spacing = model.spacing;
    cfg.eval_box = eval_box_for(eps_box, ratio);
    cfg.models = {field::ModelRequest{continuum ? field::kNoCutoff : model.range, model.epsilon,
                                      continuum ? 0.0 : model.delta, continuum, !continuum}};
    cfg.max_cells = model.max_cells;
    parallel_for(
        run.replicas, run.threads, [&] { return field::FieldSampler(cfg); },
        [&](field::FieldSampler& sampler, std::size_t rep) {
            const auto bundle = std::move(sampler.sample(run.seed, rep).front());
            if (continuum) {
                const auto v = bundle.full_on_eps();
                fn(rep, v, {});
            } else {
                const auto v = bundle.truncated_on_eps();
                fn(rep, v, bundle.flags);
            }
        });
}

EstimateReport estimate(const perc::AdmissibleEvent& event, const ModelParams& model, double level, const RunOptions& run) {
    require_replicas(run.replicas);
    const GridBox eps_box = perc::required_box(event, model.dim(), model.epsilon);
    const perc::EventGeometry geo(event, eps_box, model.epsilon);
    std::vector<std::uint8_t> hit(run.replicas, 0);
    for_each_replica(model, eps_box, run, [&](std::size_t rep, std::span<const double> v, std::span<const NoiseFlag> f) {
        hit[rep] = perc::occurs(perc::threshold_values(eps_box, model.epsilon, v, f, level, model.tag), geo);
    });
    auto params = model.to_json();
    params["level"] = level;
    params["event"] = event.text();
    params["window"] = window_json(eps_box);
    return EstimateReport::from_counts(std::accumulate(hit.begin(), hit.end(), std::size_t{0}), run.replicas, run.seed,
                                       std::move(params));
}

std::vector<double> critical_levels(const perc::AdmissibleEvent& event, const ModelParams& model, const RunOptions& run) {
    const GridBox eps_box = perc::required_box(event, model.dim(), model.epsilon);
    const perc::EventGeometry geo(event, eps_box, model.epsilon);
    std::vector<double> levels(run.replicas);
    for_each_replica(model, eps_box, run, [&](std::size_t rep, std::span<const double> v, std::span<const NoiseFlag> f) {
        levels[rep] = perc::critical_level(geo, v, f);
    });
    return levels;
}

BisectionResult bisect_lc(const perc::AdmissibleEvent& family, const ModelParams& model, const std::vector<double>& scales,
                          const BisectionOptions& opt, const RunOptions& run) {
    require_replicas(run.replicas);
    if (!(opt.target > 0.0 && opt.target <= 1.0))
        throw Error(ErrorKind::ConfigInvalid, "target probability must lie in (0, 1]", "bisect.target");
    if (!(opt.level_lo < opt.level_hi)) throw Error(ErrorKind::ConfigInvalid, "empty level bracket", "bisect.level_lo");
    BisectionResult out;
    out.target = opt.target;
    for (double R : scales) {
        const auto event = family.with_scale(R);
        auto levels = critical_levels(event, model, run);
        std::sort(levels.begin(), levels.end());
        const std::size_t n = levels.size();
        auto hits_at = [&](double l) {
            return static_cast<std::size_t>(std::upper_bound(levels.begin(), levels.end(), l) - levels.begin());
        };
        auto freq = [&](double l) { return static_cast<double>(hits_at(l)) / static_cast<double>(n); };
        const double f_lo = freq(opt.level_lo), f_hi = freq(opt.level_hi);
        if (f_lo > opt.target || f_hi < opt.target || f_lo == f_hi)
            throw Error(ErrorKind::BisectionNonBracketed,
                        "crossing frequency " + std::to_string(f_lo) + " at level " + std::to_string(opt.level_lo) + " and " +
                            std::to_string(f_hi) + " at level " + std::to_string(opt.level_hi) + " does not bracket " +
                            std::to_string(opt.target) + " for " + event.text());

        // Resolution of the empirical quantile: order statistics at n p* ± z sqrt(n p*(1-p*)).
        const double nn = static_cast<double>(n);
        const double spread = kZ95 * std::sqrt(nn * opt.target * (1 - opt.target));
        auto order_stat = [&](double k) {
            const auto idx = static_cast<std::ptrdiff_t>(std::clamp(std::ceil(k) - 1.0, 0.0, nn - 1.0));
            return std::clamp(levels[static_cast<std::size_t>(idx)], opt.level_lo, opt.level_hi);
        };
        BisectionScale s;
        s.scale = R;
        s.replicas = n;
        s.level_lo = order_stat(nn * opt.target - spread);
        s.level_hi = order_stat(nn * opt.target + spread);
        // Narrowing the bracket far below the Monte Carlo band adds nothing.
        const double stop_width = std::max(opt.min_width, 0.05 * (s.level_hi - s.level_lo));
        double lo = opt.level_lo, hi = opt.level_hi;
        while (hi - lo > stop_width && s.iterations < opt.max_iterations) {
            const double mid = 0.5 * (lo + hi);
            (freq(mid) < opt.target ? lo : hi) = mid;
            ++s.iterations;
        }
        s.bracket_lo = lo;
        s.bracket_hi = hi;
        s.level = 0.5 * (lo + hi);
        auto params = model.to_json();
        params["level"] = s.level;
        params["event"] = event.text();
        params["window"] = window_json(perc::required_box(event, model.dim(), model.epsilon));
        s.at_level = EstimateReport::from_counts(hits_at(s.level), n, run.seed, std::move(params));
        out.scales.push_back(std::move(s));
    }

    const auto& sc = out.scales;
    out.abs_decreasing = sc.size() >= 2;
    for (std::size_t i = 1; i < sc.size(); ++i)
        out.abs_decreasing = out.abs_decreasing && std::abs(sc[i].level) < std::abs(sc[i - 1].level);
    if (sc.size() >= 2) {
        const auto& a = sc[sc.size() - 2];
        const auto& b = sc.back();
        out.extrapolated = (b.scale * b.level - a.scale * a.level) / (b.scale - a.scale);
        std::vector<double> x, y;
        for (const auto& s : sc) {
            if (s.level == 0.0) continue;
            x.push_back(std::log(s.scale));
            y.push_back(std::log(std::abs(s.level)));
        }
        if (x.size() >= 2) {
            const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
            const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
            double sxy = 0, sxx = 0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                sxy += (x[i] - mx) * (y[i] - my);
                sxx += (x[i] - mx) * (x[i] - mx);
            }
            out.log_log_slope = sxy / sxx;
        }
    }
    return out;
}

DecayFit fit_points(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 4)
        throw Error(ErrorKind::ConfigInvalid, "a decay fit needs at least 4 points", "fit.radii");
    for (std::size_t i = 1; i < x.size(); ++i)
        if (!(x[i] > x[i - 1])) throw Error(ErrorKind::ConfigInvalid, "radii must be strictly increasing", "fit.radii");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    DecayFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        ss_res += e * e;
    }
    f.r_squared = syy > 0 ? 1.0 - ss_res / syy : (ss_res == 0 ? 1.0 : 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        DecayPoint p;
        p.radius = x[i];
        p.neg_log_p = y[i];
        p.p = std::exp(-y[i]);
        f.points.push_back(p);
    }
    return f;
}

namespace {

// Decay counts only when the slope is 3σ-significant and the fitted
// probability at least halves across the fitted range.
void judge(DecayFit& f, const std::vector<double>& x) {
    const double drop = f.slope * (x.back() - x.front());
    const bool significant = f.slope > 3.0 * f.slope_sigma;
    const bool substantial = drop >= std::log(2.0);
    f.accepted = significant && substantial;
    if (f.accepted)
        f.verdict = "decay";
    else if (!significant)
        f.verdict = "rejected: slope not significantly positive";
    else
        f.verdict = "rejected: fitted probability drops by less than a factor 2 over the range";
}

}  // namespace

DecayFit fit_decay(DecayKind kind, double r, const std::vector<double>& radii, const ModelParams& model, double level,
                   const RunOptions& run, double outer_margin) {
    require_replicas(run.replicas);
    if (radii.empty()) throw Error(ErrorKind::ConfigInvalid, "no radii given", "fit.radii");
    const int d = model.dim();
    const double r_max = *std::max_element(radii.begin(), radii.end());
    const double outer = r_max + (kind == DecayKind::Disconnection ? std::max(outer_margin, model.epsilon) : 0.0);
    const GridBox eps_box = perc::required_box(perc::AdmissibleEvent::full_space(r, outer), d, model.epsilon);
    const double eps = model.epsilon;

    // Per replica: how far the relevant cluster reaches.
    std::vector<double> reach(run.replicas);
    for_each_replica(model, eps_box, run, [&](std::size_t rep, std::span<const double> v, std::span<const NoiseFlag> f) {
        const auto grid = perc::threshold_values(eps_box, eps, v, f, level, model.tag);
        const auto lab = perc::label(grid);
        if (kind == DecayKind::OneArm) {
            reach[rep] = perc::arm_reach(grid, lab, r);
            return;
        }
        // Closest approach to the origin of any cluster touching the window boundary.
        double nearest = std::numeric_limits<double>::infinity();
        for_each_point(eps_box, [&](std::size_t i, const LatticePoint& j) {
            if (lab.id[i] < 0 || lab.faces[static_cast<std::size_t>(lab.id[i])] == 0) return;
            double m = 0;
            for (Index c : j) m = std::max(m, std::abs(eps * static_cast<double>(c)));
            nearest = std::min(nearest, m - 0.5 * eps);
        });
        reach[rep] = nearest;
    });

    std::vector<double> x, y;
    std::vector<DecayPoint> pts;
    for (double R : radii) {
        std::size_t hits = 0;
        for (double v : reach) hits += v > R + 1e-9;
        if (hits < 10)
            throw Error(ErrorKind::InsufficientHits,
                        std::to_string(hits) + " hits at R = " + std::to_string(R) + " (at least 10 needed)");
        DecayPoint p;
        p.radius = R;
        p.hits = hits;
        p.replicas = run.replicas;
        p.p = static_cast<double>(hits) / static_cast<double>(run.replicas);
        p.neg_log_p = -std::log(p.p);
        p.sigma = std::sqrt((1 - p.p) / (static_cast<double>(run.replicas) * p.p));
        pts.push_back(p);
        x.push_back(kind == DecayKind::OneArm ? R : std::pow(R, d - 1));
        y.push_back(p.neg_log_p);
    }
    DecayFit fit = fit_points(x, y);
    fit.kind = kind;
    fit.points = pts;
    // Error of the slope from the per-point binomial errors (treated as independent).
    double sxx = 0;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (double v : x) sxx += (v - mx) * (v - mx);
    double var = 0;
    for (std::size_t i = 0; i < x.size(); ++i) var += std::pow((x[i] - mx) / sxx * pts[i].sigma, 2);
    fit.slope_sigma = std::sqrt(var);
    judge(fit, x);
    return fit;
}

OrderingCheck ordering(const std::string& relation, const EstimateReport& left, const EstimateReport& right) {
    OrderingCheck c;
    c.relation = relation;
    c.gap = left.estimate - right.estimate;
    c.sigma = std::hypot(left.sigma(), right.sigma());
    c.holds = c.gap <= kZ95OneSided * c.sigma;
    return c;
}

bool ComparisonResult::holds() const {
    auto ok = [](const std::vector<OrderingCheck>& v) {
        return std::all_of(v.begin(), v.end(), [](const OrderingCheck& c) { return c.holds; });
    };
    return ok(checks) && ok(coarse_checks);
}

std::vector<ComparisonResult> compare(const ComparisonSetup& setup, const std::vector<perc::AdmissibleEvent>& events,
                                      const RunOptions& run) {
    std::vector<ComparisonResult> out;
    // Each estimate gets its own replica set, derived from the master seed.
    auto derived = [&](std::size_t event_index, std::uint64_t role) {
        RunOptions r = run;
        r.seed = splitmix64(run.seed ^ splitmix64((event_index << 8) | role));
        return r;
    };
    const double l = setup.level, s = setup.sprinkle;
    for (std::size_t e = 0; e < events.size(); ++e) {
        ComparisonResult c;
        c.event = events[e];
        c.lower = estimate(events[e], setup.fine, l - s, derived(e, 1));
        c.middle = estimate(events[e], setup.continuum, l, derived(e, 2));
        c.upper = estimate(events[e], setup.fine, l + s, derived(e, 3));
        c.checks = {ordering("P[E_N(l-s)] <= P[E(l)]", c.lower, c.middle),
                    ordering("P[E(l)] <= P[E_N(l+s)]", c.middle, c.upper)};
        if (setup.with_coarse) {
            c.coarse_lower = estimate(events[e], setup.fine, l - s, derived(e, 4));
            c.coarse_middle = estimate(events[e], setup.coarse, l, derived(e, 5));
            c.coarse_upper = estimate(events[e], setup.fine, l + s, derived(e, 6));
            c.coarse_checks = {ordering("P[E_N(l-s)] <= P[E_2N(l)]", c.coarse_lower, c.coarse_middle),
                               ordering("P[E_2N(l)] <= P[E_N(l+s)]", c.coarse_middle, c.coarse_upper)};
        }
        out.push_back(std::move(c));
    }
    return out;
}

bool BoxEvent::contains(const Eigen::VectorXd& g) const {
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (g[i] < lo[k] || g[i] > hi[k]) return false;
    }
    return true;
}

CameronMartinResult cameron_martin_check(const Eigen::MatrixXd& K, const Eigen::VectorXd& w, const BoxEvent& event,
                                         std::size_t samples, std::uint64_t seed) {
    const Eigen::Index m = K.rows();
    if (m < 1 || m > 64 || K.cols() != m) throw Error(ErrorKind::ConfigInvalid, "K must be square with 1 <= m <= 64", "K");
    if (w.size() != m || event.lo.size() != static_cast<std::size_t>(m) || event.hi.size() != static_cast<std::size_t>(m))
        throw Error(ErrorKind::ConfigInvalid, "w and the event bounds must have m entries", "w");
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, K.cwiseAbs().maxCoeff()))
        throw Error(ErrorKind::NotPSD, "K is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(K);
    const Eigen::VectorXd lambda = eig.eigenvalues();
    const double scale = lambda.cwiseAbs().maxCoeff();
    if (lambda.minCoeff() < -1e-10 * scale)
        throw Error(ErrorKind::NotPSD, "K has eigenvalue " + std::to_string(lambda.minCoeff()));
    const Eigen::MatrixXd A = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    const Eigen::VectorXd h = K * w;
    const double half_norm = 0.5 * w.dot(h);

    CameronMartinResult res;
    res.samples = samples;
    res.min_eigenvalue = lambda.minCoeff();
    Eigen::VectorXd z(m);
    auto draw = [&](CounterRng& rng) {
        for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
        return Eigen::VectorXd(A * z);
    };

    CounterRng direct({seed, 0, Substream::Gaussian, 0});
    std::size_t hits = 0;
    for (std::size_t k = 0; k < samples; ++k) hits += event.contains(draw(direct) + h);
    nlohmann::ordered_json params;
    params["m"] = m;
    params["samples"] = samples;
    res.direct = EstimateReport::from_counts(hits, samples, seed, params);

    CounterRng shifted({seed, 0, Substream::Reweighted, 0});
    double sum = 0, sum2 = 0, wsum = 0, wsum2 = 0;
    for (std::size_t k = 0; k < samples; ++k) {
        const Eigen::VectorXd g = draw(shifted);
        const double weight = std::exp(w.dot(g) - half_norm);
        const double v = event.contains(g) ? weight : 0.0;
        sum += v;
        sum2 += v * v;
        wsum += weight;
        wsum2 += weight * weight;
    }
    const double n = static_cast<double>(samples);
    res.reweighted = sum / n;
    res.reweighted_sigma = std::sqrt(std::max(0.0, sum2 / n - res.reweighted * res.reweighted) / n);
    res.reweighted_ci = {res.reweighted - kZ95 * res.reweighted_sigma, res.reweighted + kZ95 * res.reweighted_sigma};
    res.weight_mean = wsum / n;
    res.weight_sigma = std::sqrt(std::max(0.0, wsum2 / n - res.weight_mean * res.weight_mean) / n);
    return res;
}

LocalGapTail local_gap_tail(const kernel::KernelSpec& kernel, double spacing, double range, double epsilon,
                            double threshold, const RunOptions& run, std::size_t max_cells) {
    require_replicas(run.replicas);
    const Index ratio = field::epsilon_ratio(epsilon, spacing);
    const auto unit = static_cast<Index>(std::floor(1.0 / spacing + 1e-9));
    field::SamplerConfig cfg;
    cfg.kernel = kernel;
    cfg.spacing = spacing;
    cfg.eval_box = GridBox::symmetric(kernel.dim(), unit + ratio);
    cfg.models = {field::ModelRequest{range, epsilon, 0.0, true, true}};
    cfg.max_cells = max_cells;
    std::vector<std::uint8_t> over_t(run.replicas), over_d(run.replicas);
    parallel_for(
        run.replicas, run.threads, [&] { return field::FieldSampler(cfg); },
        [&](field::FieldSampler& sampler, std::size_t rep) {
            const auto gap = field::local_gap(sampler.sample(run.seed, rep).front());
            over_t[rep] = gap.truncation >= threshold;
            over_d[rep] = gap.discretisation >= threshold;
        });
    nlohmann::ordered_json params;
    params["kernel"] = kernel::to_string(kernel.family());
    params["d"] = kernel.dim();
    params["N"] = range;
    params["epsilon"] = epsilon;
    params["h"] = spacing;
    params["threshold"] = threshold;
    LocalGapTail out;
    out.range = range;
    out.threshold = threshold;
    auto hits = [](const std::vector<std::uint8_t>& v) { return std::accumulate(v.begin(), v.end(), std::size_t{0}); };
    params["gap"] = "sup|f - f_N|";
    out.truncation = EstimateReport::from_counts(hits(over_t), run.replicas, run.seed, params);
    params["gap"] = "sup|f_N - f_N^eps|";
    out.discretisation = EstimateReport::from_counts(hits(over_d), run.replicas, run.seed, params);
    return out;
}

namespace {

nlohmann::ordered_json check_json(const OrderingCheck& c) {
    return {{"relation", c.relation}, {"gap", c.gap}, {"sigma", c.sigma}, {"holds", c.holds}};
}

}  // namespace

nlohmann::ordered_json to_json(const BisectionResult& r) {
    nlohmann::ordered_json j;
    j["target"] = r.target;
    j["scales"] = nlohmann::ordered_json::array();
    for (const auto& s : r.scales)
        j["scales"].push_back({{"R", s.scale},
                               {"level", s.level},
                               {"level_band", {s.level_lo, s.level_hi}},
                               {"bracket", {s.bracket_lo, s.bracket_hi}},
                               {"iterations", s.iterations},
                               {"n", s.replicas},
                               {"at_level", s.at_level.to_json()}});
    j["abs_decreasing"] = r.abs_decreasing;
    j["extrapolated"] = r.extrapolated;
    j["log_log_slope"] = r.log_log_slope;
    return j;
}

nlohmann::ordered_json to_json(const DecayFit& f) {
    nlohmann::ordered_json j;
    j["kind"] = f.kind == DecayKind::OneArm ? "one-arm" : "disconnection";
    j["points"] = nlohmann::ordered_json::array();
    for (const auto& p : f.points)
        j["points"].push_back({{"R", p.radius},
                               {"hits", p.hits},
                               {"n", p.replicas},
                               {"p", p.p},
                               {"neg_log_p", p.neg_log_p},
                               {"sigma", p.sigma}});
    j["slope"] = f.slope;
    j["intercept"] = f.intercept;
    j["r_squared"] = f.r_squared;
    j["slope_sigma"] = f.slope_sigma;
    j["accepted"] = f.accepted;
    j["verdict"] = f.verdict;
    return j;
}

nlohmann::ordered_json to_json(const ComparisonResult& c) {
    nlohmann::ordered_json j;
    j["event"] = c.event.text();
    j["lower"] = c.lower.to_json();
    j["middle"] = c.middle.to_json();
    j["upper"] = c.upper.to_json();
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& k : c.checks) j["checks"].push_back(check_json(k));
    if (!c.coarse_checks.empty()) {
        j["coarse_lower"] = c.coarse_lower.to_json();
        j["coarse_middle"] = c.coarse_middle.to_json();
        j["coarse_upper"] = c.coarse_upper.to_json();
        j["coarse_checks"] = nlohmann::ordered_json::array();
        for (const auto& k : c.coarse_checks) j["coarse_checks"].push_back(check_json(k));
    }
    j["verdict"] = c.holds() ? "ordering holds" : "ordering violated";
    return j;
}

nlohmann::ordered_json to_json(const LocalGapTail& t) {
    nlohmann::ordered_json j;
    j["N"] = t.range;
    j["threshold"] = t.threshold;
    j["truncation"] = t.truncation.to_json();
    j["discretisation"] = t.discretisation.to_json();
    return j;
}

nlohmann::ordered_json to_json(const CameronMartinResult& c) {
    nlohmann::ordered_json j;
    j["direct"] = c.direct.to_json();
    j["reweighted"] = c.reweighted;
    j["reweighted_sigma"] = c.reweighted_sigma;
    j["reweighted_ci"] = {c.reweighted_ci.lo, c.reweighted_ci.hi};
    j["weight_mean"] = c.weight_mean;
    j["weight_sigma"] = c.weight_sigma;
    j["min_eigenvalue"] = c.min_eigenvalue;
    j["samples"] = c.samples;
    return j;
}

}  // namespace gplab::stats
