#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gplab/geometry.hpp"
#include "gplab/kernel.hpp"

namespace gplab::field {

inline constexpr std::size_t kDefaultCellBudget = std::size_t{1} << 25;
inline constexpr double kNoCutoff = std::numeric_limits<double>::infinity();

struct SeedLineage {
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
    friend bool operator==(const SeedLineage&, const SeedLineage&) = default;
};

/// i.i.d. N(0,1) draws, one per cell of an h-spaced lattice box.
struct WhiteNoiseGrid {
    double spacing = 1.0;
    GridBox cells;
    std::vector<double> values;
    SeedLineage lineage;
};

WhiteNoiseGrid sample_noise(const GridBox& cells, double spacing, std::uint64_t seed, std::uint64_t replica,
                            std::size_t max_cells = kDefaultCellBudget);

/// Samples of h^{d/2} q(x) χ_N(x) on the h-lattice inside an ℓ∞ ball.
struct KernelStencil {
    double spacing = 1.0;
    Index radius = 0;
    std::vector<double> weights;  // over GridBox::symmetric(d, radius)

    GridBox box(int dim) const { return GridBox::symmetric(dim, radius); }
};

/// `support` bounds the stencil (ℓ∞ radius, in length units). A finite
/// `cutoff_range` multiplies by χ_N and caps the support at N/2.
KernelStencil make_stencil(const kernel::KernelSpec& spec, double spacing, double support,
                           double cutoff_range = kNoCutoff);

/// Linear convolution of a noise grid with one or more stencils through a
/// shared forward transform. Holds FFTW plans and aligned work buffers; not
/// shareable between threads, but independent instances are.
class FftConvolver {
  public:
    FftConvolver(const GridBox& noise_box, std::vector<KernelStencil> stencils);
    ~FftConvolver();
    FftConvolver(const FftConvolver&) = delete;
    FftConvolver& operator=(const FftConvolver&) = delete;
    FftConvolver(FftConvolver&&) noexcept;
    FftConvolver& operator=(FftConvolver&&) noexcept;

    const GridBox& noise_box() const;
    std::size_t stencil_count() const;
    const std::vector<Index>& transform_shape() const;

    /// Loads noise values (laid out over noise_box) and transforms them.
    void load(std::span<const double> noise);
    /// Writes (stencil ⋆ noise) restricted to `eval` into `out`.
    void apply(std::size_t stencil, const GridBox& eval, std::span<double> out);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Transform-based convolution; throws InsufficientPadding unless the noise
/// covers `eval` expanded by the stencil radius.
std::vector<double> convolve(const WhiteNoiseGrid& noise, const KernelStencil& stencil, const GridBox& eval);

enum class NoiseFlag : std::uint8_t { Neutral = 0, ForcedOpen = 1, ForcedClosed = 2 };

/// One noise realisation and its derived fields on an evaluation window.
///
/// Fields live on the h-lattice (`eval_box`); the discretised field and the
/// noise flags live on the ε-lattice (`eps_box`, indices j with position εj).
/// ε is an integer multiple `eps_ratio` of h, so f_N^ε is a literal
/// subsample of f_N.
struct FieldBundle {
    int dim = 0;
    double spacing = 1.0;  // h
    double range = kNoCutoff;  // N
    double epsilon = 1.0;
    double delta = 0.0;
    Index eps_ratio = 1;
    GridBox eval_box;
    GridBox eps_box;
    std::vector<double> full;       // f; empty when not requested
    std::vector<double> truncated;  // f_N; empty when not requested
    std::vector<NoiseFlag> flags;   // T_δ per ε-cell
    SeedLineage lineage;

    bool has_full() const { return !full.empty(); }
    bool has_truncated() const { return !truncated.empty(); }

    /// h-lattice index of the ε-lattice point j.
    LatticePoint eps_to_eval(const LatticePoint& j) const;
    /// ε-lattice index of the cell x + [-ε/2, ε/2)^d containing h-point i.
    LatticePoint representative(const LatticePoint& i) const;

    /// f_N^ε (or f at ε-points) laid out over eps_box.
    std::vector<double> truncated_on_eps() const;
    std::vector<double> full_on_eps() const;
};

/// One model of a coupled sample: a truncation range (kNoCutoff = none), its
/// ε and δ, and which fields to keep.
struct ModelRequest {
    double range = kNoCutoff;
    double epsilon = 1.0;
    double delta = 0.0;
    bool full = false;
    bool truncated = true;
};

struct SamplerConfig {
    kernel::KernelSpec kernel = kernel::KernelSpec::bargmann_fock(2);
    double spacing = 0.25;
    GridBox eval_box;
    std::vector<ModelRequest> models;
    std::size_t max_cells = kDefaultCellBudget;
    double radius_tol = 1e-9;
};

/// Builds bundles for several models from one shared white-noise sample.
/// Construct one sampler per worker thread.
class FieldSampler {
  public:
    explicit FieldSampler(SamplerConfig config);

    const GridBox& noise_box() const { return noise_box_; }
    const SamplerConfig& config() const { return config_; }

    std::vector<FieldBundle> sample(std::uint64_t seed, std::uint64_t replica);

  private:
    SamplerConfig config_;
    GridBox noise_box_;
    std::vector<Index> eps_ratio_;
    std::vector<std::size_t> stencil_of_model_;  // index into convolver stencils, or npos
    std::size_t full_stencil_ = static_cast<std::size_t>(-1);
    FftConvolver convolver_;
    std::vector<double> noise_;
};

Index epsilon_ratio(double epsilon, double spacing);

/// Largest multiple of h not exceeding ε, and at least h. Used when a schedule
/// asks for a finer discretisation than the evaluation lattice resolves.
double snap_epsilon(double epsilon, double spacing);

/// Default noise spacing: min(ε, 0.25).
double default_spacing(double epsilon);

FieldBundle make_bundle(const kernel::KernelSpec& spec, const kernel::CutoffSpec& cut, double epsilon, double delta,
                        const GridBox& eval_box, double spacing, std::uint64_t seed, std::uint64_t replica,
                        std::size_t max_cells = kDefaultCellBudget);

struct LocalGap {
    double truncation = 0.0;      // sup over B_1 of |f - f_N|
    double discretisation = 0.0;  // sup over B_1 of |f_N - f_N^ε|
};

LocalGap local_gap(const FieldBundle& bundle);

/// Draws T_δ flags for every cell of `eps_box`.
std::vector<NoiseFlag> sample_flags(const GridBox& eps_box, double delta, double range, std::uint64_t seed,
                                    std::uint64_t replica);

// Serialisation: little-endian binary layout plus JSON metadata sidecar.
void write_bundle(std::ostream& out, const FieldBundle& bundle);
FieldBundle read_bundle(std::istream& in);
std::string bundle_metadata_json(const FieldBundle& bundle);
void write_bundle_csv(std::ostream& out, const FieldBundle& bundle);

}  // namespace gplab::field
