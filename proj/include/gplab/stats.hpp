#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "gplab/field.hpp"
#include "gplab/kernel.hpp"
#include "gplab/perc.hpp"
#include "gplab/report.hpp"

namespace gplab::stats {

/// One percolation model: which field is thresholded, on which lattices.
/// ContinuumApprox thresholds f (no cutoff, no noise flags); Truncated
/// thresholds f_N^ε with T_δ.
struct ModelParams {
    kernel::KernelSpec kernel = kernel::KernelSpec::bargmann_fock(2);
    double spacing = 0.25;  // h
    double range = field::kNoCutoff;
    double epsilon = 0.25;
    double delta = 0.0;
    perc::ModelTag tag = perc::ModelTag::ContinuumApprox;
    std::size_t max_cells = field::kDefaultCellBudget;

    int dim() const { return kernel.dim(); }
    nlohmann::ordered_json to_json() const;
};

inline constexpr std::size_t kMinReplicas = 100;

struct RunOptions {
    std::size_t replicas = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Samples `replicas` bundles of `model` covering the ε-box `eps_box` and
/// calls fn(replica, values on the ε-box, flags) for each (flags empty for
/// ContinuumApprox). Calls may come from several threads.
void for_each_replica(const ModelParams& model, const GridBox& eps_box, const RunOptions& run,
                      const std::function<void(std::size_t, std::span<const double>, std::span<const field::NoiseFlag>)>& fn);

EstimateReport estimate(const perc::AdmissibleEvent& event, const ModelParams& model, double level, const RunOptions& run);

/// Crossing probability at many levels from one set of replicas: each
/// replica contributes its critical level.
std::vector<double> critical_levels(const perc::AdmissibleEvent& event, const ModelParams& model, const RunOptions& run);

struct BisectionScale {
    double scale = 0.0;           // R
    double level = 0.0;           // ℓ̂_c(R)
    double level_lo = 0.0;        // 95% order-statistic band of the p*-quantile
    double level_hi = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    int iterations = 0;
    std::size_t replicas = 0;
    EstimateReport at_level;      // crossing estimate at ℓ̂_c(R)
};

struct BisectionResult {
    double target = 0.5;
    std::vector<BisectionScale> scales;
    bool abs_decreasing = false;   // |ℓ̂_c| strictly decreasing along the scales
    double extrapolated = 0.0;     // ℓ_∞ from the last two scales assuming O(1/R) corrections
    double log_log_slope = 0.0;    // slope of log|ℓ̂_c| against log R
};

struct BisectionOptions {
    double target = 0.5;
    double level_lo = -1.0;
    double level_hi = 1.0;
    double min_width = 1e-4;
    int max_iterations = 60;
};

/// Per scale R, the level where the crossing frequency of `family` (scaled
/// to R) equals the target. Throws BisectionNonBracketed when the bracket
/// does not straddle the target or the frequency does not depend on ℓ.
BisectionResult bisect_lc(const perc::AdmissibleEvent& family, const ModelParams& model, const std::vector<double>& scales,
                          const BisectionOptions& options, const RunOptions& run);

enum class DecayKind { OneArm, Disconnection };

struct DecayPoint {
    double radius = 0.0;
    std::size_t hits = 0;
    std::size_t replicas = 0;
    double p = 0.0;
    double neg_log_p = 0.0;
    double sigma = 0.0;  // binomial error of -log p̂
};

struct DecayFit {
    DecayKind kind = DecayKind::OneArm;
    std::vector<DecayPoint> points;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double slope_sigma = 0.0;
    bool accepted = false;  // significant and substantial decay over the range
    std::string verdict;
};

/// Least squares of y against x (x = R, or R^{d-1} for disconnection).
DecayFit fit_points(const std::vector<double>& x, const std::vector<double>& neg_log_p);

/// One arm: P[[-r, r]^d ↔ outside [-R, R]^d]. Disconnection: P[[-R, R]^d is
/// not connected to the window boundary], the window being the box of the
/// largest radius plus `outer_margin`. Each replica is labelled once and
/// serves every radius.
DecayFit fit_decay(DecayKind kind, double r, const std::vector<double>& radii, const ModelParams& model, double level,
                   const RunOptions& run, double outer_margin = 0.0);

struct OrderingCheck {
    std::string relation;  // e.g. "P[E_N(l-s)] <= P[E(l)]"
    double gap = 0.0;      // left - right
    double sigma = 0.0;    // combined
    bool holds = false;    // gap <= z·sigma (one-sided 95%)
};

struct ComparisonResult {
    perc::AdmissibleEvent event;
    EstimateReport lower, middle, upper;  // E_N(ℓ-s), E(ℓ), E_N(ℓ+s)
    std::vector<OrderingCheck> checks;
    // N vs 2N form: E_N(ℓ-s_N) <= E_2N(ℓ) <= E_N(ℓ+s_N)
    EstimateReport coarse_lower, coarse_middle, coarse_upper;
    std::vector<OrderingCheck> coarse_checks;
    bool holds() const;
};

struct ComparisonSetup {
    ModelParams continuum;  // E(ℓ)
    ModelParams fine;       // E_N^{ε,δ}
    ModelParams coarse;     // E_2N^{ε_2N,δ_2N}
    double level = 0.0;
    double sprinkle = 0.0;  // s_N
    bool with_coarse = true;
};

std::vector<ComparisonResult> compare(const ComparisonSetup& setup, const std::vector<perc::AdmissibleEvent>& events,
                                      const RunOptions& run);

OrderingCheck ordering(const std::string& relation, const EstimateReport& left, const EstimateReport& right);

/// Box event {lo_i <= g_i <= hi_i for every i}.
struct BoxEvent {
    std::vector<double> lo, hi;
    bool contains(const Eigen::VectorXd& g) const;
};

struct CameronMartinResult {
    EstimateReport direct;       // P[g + Kw ∈ E]
    double reweighted = 0.0;     // E[exp(<w,g> - ½ wᵀKw) 1{g ∈ E}]
    double reweighted_sigma = 0.0;
    Interval reweighted_ci;
    double weight_mean = 0.0;
    double weight_sigma = 0.0;
    double min_eigenvalue = 0.0;
    std::size_t samples = 0;
};

/// Throws NotPSD when K has an eigenvalue below -1e-10·max|λ|.
CameronMartinResult cameron_martin_check(const Eigen::MatrixXd& K, const Eigen::VectorXd& w, const BoxEvent& event,
                                         std::size_t samples, std::uint64_t seed);

/// Tails of the two local gaps over B_1: P[sup|f - f_N| >= t] and
/// P[sup|f_N - f_N^ε| >= t].
struct LocalGapTail {
    double range = 0.0;
    double threshold = 0.0;
    EstimateReport truncation;
    EstimateReport discretisation;
};

LocalGapTail local_gap_tail(const kernel::KernelSpec& kernel, double spacing, double range, double epsilon,
                            double threshold, const RunOptions& run, std::size_t max_cells = field::kDefaultCellBudget);

nlohmann::ordered_json to_json(const BisectionResult& r);
nlohmann::ordered_json to_json(const DecayFit& f);
nlohmann::ordered_json to_json(const ComparisonResult& c);
nlohmann::ordered_json to_json(const CameronMartinResult& c);
nlohmann::ordered_json to_json(const LocalGapTail& t);

}  // namespace gplab::stats
