#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "gplab/field.hpp"
#include "gplab/geometry.hpp"
#include "gplab/perc.hpp"

namespace gplab::interp {

/// τ(y) = c_d / (1 + |x|∞^{d+1}) for y in x + [-1/2, 1/2)^d, normalised so
/// that the lattice sum is 1/2.
struct TauBase {
    int dim = 2;
    double c = 0.0;           // c_d
    double partial_sum = 0.0; // Σ_{|x|∞ <= shells} (1 + |x|∞^{d+1})^{-1}
    double tail_lo = 0.0;     // bracket for the remaining shells
    double tail_hi = 0.0;
    Index shells = 0;

    double at_lattice(Index sup_norm) const;
    double operator()(const Point& y) const;
};

TauBase tau_base(int dim, Index shells = 100000);

/// Enumeration of Z^d by increasing |z|∞, lexicographic inside each shell.
class CentreEnumerator {
  public:
    explicit CentreEnumerator(int dim);
    const LatticePoint& next();
    std::uint64_t produced() const { return produced_; }
    Index current_shell() const { return shell_; }

  private:
    void fill_shell();
    int dim_;
    Index shell_ = -1;
    std::vector<LatticePoint> pending_;
    std::size_t pos_ = 0;
    std::uint64_t produced_ = 0;
};

/// Position of z in the CentreEnumerator order.
std::uint64_t centre_rank(const LatticePoint& z);

/// Step index k ∈ ½N stored as 2k.
class SprinklingField {
  public:
    /// `window` is a box of the h-lattice; the boxes B'_N(2Nz) meeting it are
    /// the ones τ is tracked on. N must be an integer multiple of h.
    SprinklingField(const TauBase& base, double range, double sprinkle, double spacing, const GridBox& window);

    double k() const { return 0.5 * static_cast<double>(half_steps_); }
    std::uint64_t half_steps() const { return half_steps_; }
    double range() const { return range_; }
    double sprinkle() const { return sprinkle_; }
    double spacing() const { return spacing_; }
    Index cells_per_half_box() const { return half_cells_; }

    /// Box lattice: z with B'_N(2Nz) meeting the window.
    const GridBox& boxes() const { return boxes_; }
    const std::vector<double>& box_values() const { return values_; }
    /// z index of the box containing h-point i.
    LatticePoint box_of(const LatticePoint& i) const;
    double value_at(const LatticePoint& i) const { return values_[boxes_.linear(box_of(i))]; }
    /// True when the box of z has switched model: its rank is below ⌈k⌉.
    bool processed(const LatticePoint& z) const;
    std::uint64_t rank_of_box(std::size_t box_index) const { return ranks_[box_index]; }
    /// Centre z_n of step n (n below the number of steps taken so far, or any
    /// n for a fresh enumeration).
    static LatticePoint centre(int dim, std::uint64_t n);

    /// Advances k by ½.
    void step();
    void advance_to(std::uint64_t half_steps);
    double max_deficit() const;
    /// Full steps until max |τ - s| < tol·s or `max_half_steps` is reached.
    /// Returns true on convergence.
    bool advance_until_converged(double tol = 1e-3, std::uint64_t max_half_steps = 40000000);

  private:
    TauBase base_;
    double range_;
    double sprinkle_;
    double spacing_;
    Index half_cells_;
    GridBox boxes_;
    std::vector<double> values_;
    std::vector<std::uint64_t> ranks_;
    std::uint64_t half_steps_ = 0;
    CentreEnumerator centres_;
    LatticePoint current_;
};

enum class Direction { Up, Down };

/// Two coupled models read on the common h-lattice: f_N^{ε_N} with T_{δ_N}
/// (fine) and f_{2N}^{ε_{2N}} with T_{δ_{2N}} (coarse). Every h-point takes
/// the value and flag of the ε-cell containing it.
struct HybridInputs {
    GridBox box;
    double spacing = 1.0;
    std::vector<double> fine_values, coarse_values;
    std::vector<field::NoiseFlag> fine_flags, coarse_flags;
};

/// h-box whose points have their ε-representatives inside `eval_box` for
/// both ε ratios.
GridBox usable_box(const GridBox& eval_box, Index ratio_a, Index ratio_b);
/// Evaluation box to request so that `target` is usable.
GridBox padded_box(const GridBox& target, Index ratio_a, Index ratio_b);

HybridInputs hybrid_inputs(const field::FieldBundle& fine, const field::FieldBundle& coarse, const GridBox& box);

/// I_k: up direction starts from the coarse model at `level` and moves to the
/// fine one; down starts from the fine model at level - s and moves to the
/// coarse one. Processed boxes carry the destination model; every cell is
/// thresholded at start level + τ_k.
perc::OccupancyGrid hybrid(const HybridInputs& in, double level, Direction dir, const SprinklingField& tau);

/// I_∞: the destination model at the start level + s.
perc::OccupancyGrid hybrid_limit(const HybridInputs& in, double level, Direction dir, double sprinkle);

bool is_subset(const perc::OccupancyGrid& a, const perc::OccupancyGrid& b);

/// Sufficient event for I_n ⊂ I_{n+1/2}: on the box of z_n the two fields
/// differ by at most s/2 and both noises are neutral.
bool sufficient_event(const HybridInputs& in, const SprinklingField& tau, std::uint64_t n);

/// Per-step record for JSON-lines traces.
struct StepRecord {
    std::uint64_t half_steps = 0;
    bool event = false;
    bool included = true;       // previous configuration ⊂ this one
    double p_accumulator = 0.0; // Σ_n 1[I_n ∈ A] - 1[I_{n+1/2} ∈ A]
    double q_accumulator = 0.0; // Σ_n 1[I_{n+1} ∈ A] - 1[I_{n+1/2} ∈ A]
};

/// Runs steps 0..max_half_steps on one replica and records the event.
std::vector<StepRecord> trace_steps(const HybridInputs& in, double level, Direction dir, SprinklingField tau,
                                    const perc::EventGeometry& geometry, std::uint64_t max_half_steps);
void write_trace_jsonl(std::ostream& out, const std::vector<StepRecord>& trace);

}  // namespace gplab::interp
