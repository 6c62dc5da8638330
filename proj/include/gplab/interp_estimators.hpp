#pragma once

#include <cstdint>
#include <vector>

#include "gplab/interp.hpp"
#include "gplab/kernel.hpp"
#include "gplab/report.hpp"
#include "gplab/stats.hpp"

namespace gplab::interp {

/// Fine model f_N^{ε_N} + T_{δ_N} and coarse model f_{2N}^{ε_{2N}} + T_{δ_{2N}}
/// sampled from one white noise, interpolated at level ℓ with sprinkle s_N.
struct InterpSetup {
    kernel::KernelSpec kernel = kernel::KernelSpec::bargmann_fock(2);
    double spacing = 0.25;
    double range = 4.0;  // N; the coarse model uses 2N
    double sprinkle = 0.1;
    double fine_epsilon = 0.25, fine_delta = 0.0;
    double coarse_epsilon = 0.25, coarse_delta = 0.0;
    double level = 0.0;
    Direction direction = Direction::Up;
    std::size_t max_cells = field::kDefaultCellBudget;

    nlohmann::ordered_json to_json() const;
};

/// Calls fn(replica, inputs) with both models read on `window` (h-lattice).
void for_each_hybrid(const InterpSetup& setup, const GridBox& window, const stats::RunOptions& run,
                     const std::function<void(std::size_t, const HybridInputs&)>& fn);

/// h-cells of the box B'_N(2N z).
GridBox box_window(const InterpSetup& setup, const LatticePoint& z);

struct InclusionResult {
    std::uint64_t step = 0;          // n
    stats::EstimateReport inclusion;  // P[I_n ⊂ I_{n+1/2}]
    stats::EstimateReport sufficient; // field gap <= s/2 and neutral noise on B'_N(x_n)
};

InclusionResult inclusion_rate(const InterpSetup& setup, std::uint64_t n, const stats::RunOptions& run);

struct CentrePivotality {
    LatticePoint z;  // x_j = 2N z
    stats::EstimateReport report;
};

struct PivotalityProfile {
    std::uint64_t step = 0;
    std::string event;
    // Coupled counts on one replica set.
    stats::EstimateReport at_n, at_half, at_next;  // P[I_n ∈ A], P[I_{n+1/2} ∈ A], P[I_{n+1} ∈ A]
    double p_difference = 0.0, p_difference_sigma = 0.0;
    double q_difference = 0.0, q_difference_sigma = 0.0;
    stats::EstimateReport p_coupled;  // P[I_n ∈ A, I_{n+1/2} ∉ A]
    stats::EstimateReport q_coupled;  // P[I_{n+1} ∈ A, I_{n+1/2} ∉ A]
    stats::EstimateReport inclusion;  // P[I_n ⊂ I_{n+1/2}] on the window
    std::vector<CentrePivotality> centres;  // p_n(x_j) = P[Piv^n_{x_j}(4N)]
    bool q_nonnegative = false;      // q̂_n >= -3σ
    bool q_ways_agree = false;       // difference and coupled q̂_n within 3σ
    bool decoupling_holds = false;   // p̂_n <= (1 - incl)·p̂_n(x_n) + 3σ
    double decoupling_bound = 0.0;
};

/// Window: the event's box on the h-lattice extended by 2N on every side.
/// Throws WindowTooSmall through the event geometry.
PivotalityProfile pivotality_profile(const InterpSetup& setup, std::uint64_t n, const perc::AdmissibleEvent& event,
                                     const stats::RunOptions& run);

nlohmann::ordered_json to_json(const InclusionResult& r);
nlohmann::ordered_json to_json(const PivotalityProfile& p);

}  // namespace gplab::interp
