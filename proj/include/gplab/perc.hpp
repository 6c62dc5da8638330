#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gplab/field.hpp"
#include "gplab/geometry.hpp"

namespace gplab::perc {

enum class ModelTag { ContinuumApprox, Truncated, Interpolation };
std::string to_string(ModelTag tag);

/// Open/closed sites on a box of the ε-lattice (site j sits at εj).
struct OccupancyGrid {
    double epsilon = 1.0;
    GridBox box;
    std::vector<std::uint8_t> open;
    double level = 0.0;
    ModelTag tag = ModelTag::Truncated;

    int dim() const { return box.dim(); }
    bool is_open(const LatticePoint& j) const { return open[box.linear(j)] != 0; }
    std::size_t open_count() const;
};

/// Cell open iff forced open, or neutral with value >= -level. `flags` may be
/// empty (all neutral).
OccupancyGrid threshold_values(const GridBox& box, double epsilon, std::span<const double> values,
                               std::span<const field::NoiseFlag> flags, double level, ModelTag tag);

/// Same with a per-cell level (the sprinkled threshold of the interpolation).
OccupancyGrid threshold_levels(const GridBox& box, double epsilon, std::span<const double> values,
                               std::span<const field::NoiseFlag> flags, std::span<const double> levels, ModelTag tag);

/// ContinuumApprox thresholds f at the ε-points and ignores the noise flags;
/// Truncated thresholds f_N^ε together with T_δ.
OccupancyGrid threshold(const field::FieldBundle& bundle, double level, ModelTag tag = ModelTag::Truncated);

struct ClusterLabeling {
    std::vector<std::int64_t> id;      // per cell, -1 when closed or outside the mask
    std::vector<std::size_t> sizes;    // per component
    std::vector<std::uint32_t> faces;  // per component: bit 2a touches the low face of axis a, 2a+1 the high face

    std::size_t count() const { return sizes.size(); }
};

/// Nearest-neighbour components of the open cells, optionally restricted to
/// cells with mask != 0. Ids follow the first cell of each component in
/// linear order.
ClusterLabeling label(const OccupancyGrid& grid, std::span<const std::uint8_t> mask = {});

// ---------------------------------------------------------------------------
// Connection events

enum class Shape { FullSpace, Slab, Crossing };

/// FullSpace(r, R): S1 = [-r, r]^d to the complement of S2 = [-R, R]^d.
/// Slab(r, R, M): the same inside D = R^2 x [-M, M]^{d-2}.
/// Crossing(L, aspect): a path across the box [-aL/2, aL/2] x [-L/2, L/2]^{d-1}
/// joining its two faces normal to the first axis.
struct AdmissibleEvent {
    Shape shape = Shape::FullSpace;
    double r = 0.0;
    double R = 1.0;
    double M = 0.0;
    double aspect = 1.0;

    static AdmissibleEvent full_space(double r, double R);
    static AdmissibleEvent slab(double r, double R, double M);
    static AdmissibleEvent crossing(double L, double aspect = 1.0);

    /// Same event with the outer radius (or crossing length) replaced.
    AdmissibleEvent with_scale(double R) const;
    void validate() const;
    std::string text() const;
};

/// "full:r,R", "slab:r,R,M", "cross:L" or "cross:L,aspect".
AdmissibleEvent parse_event(const std::string& text);

/// Source/target/domain masks of an event on a particular ε-box. Cells are
/// closed cubes εj + [-ε/2, ε/2]^d; a cell is a source when it meets S1 and a
/// target when it meets the complement of S2.
struct EventGeometry {
    AdmissibleEvent event;
    double epsilon = 1.0;
    GridBox box;
    std::vector<std::uint8_t> domain;
    std::vector<std::uint8_t> source;
    std::vector<std::uint8_t> target;

    /// Throws WindowTooSmall when the box cannot decide the event.
    EventGeometry(const AdmissibleEvent& event, const GridBox& box, double epsilon);
};

/// Smallest symmetric ε-box that can decide the event.
GridBox required_box(const AdmissibleEvent& event, int dim, double epsilon);

bool occurs(const OccupancyGrid& grid, const ClusterLabeling& labeling, const EventGeometry& geometry);
bool occurs(const OccupancyGrid& grid, const EventGeometry& geometry);
bool occurs(const OccupancyGrid& grid, const AdmissibleEvent& event);

/// Largest ℓ∞ extent max_i |x_i| + ε/2 reached by an open cluster that meets
/// [-r, r]^d; FullSpace(r, R) occurs iff the reach exceeds R (for R inside
/// the window). Returns -inf when no open cell meets [-r, r]^d.
double arm_reach(const OccupancyGrid& grid, const ClusterLabeling& labeling, double r);

/// Cells whose centre lies in y + [-L, L]^d.
std::vector<std::size_t> box_cells(const OccupancyGrid& grid, const Point& y, double L);

/// {I ∪ B_L(y) ∈ A} and {I \ B_L(y) ∉ A}.
bool coarse_pivotal(const OccupancyGrid& grid, const EventGeometry& geometry, const Point& y, double L);
/// {I ∪ B_L(y) ∈ A} and {I ∉ A}.
bool closed_pivotal(const OccupancyGrid& grid, const EventGeometry& geometry, const Point& y, double L);

inline constexpr double kNever = std::numeric_limits<double>::infinity();

/// Smallest level at which the event occurs, by adding cells in order of
/// their activation level -value (forced-open cells first, forced-closed
/// never). Returns kNever if it does not occur even with every neutral cell
/// open.
double critical_level(const EventGeometry& geometry, std::span<const double> values,
                      std::span<const field::NoiseFlag> flags);

// Bitmap export: plain PBM (P1), first axis down the rows, remaining axes
// flattened along each row; '1' marks an open cell.
void write_pbm(std::ostream& out, const OccupancyGrid& grid);
OccupancyGrid read_pbm(std::istream& in, const GridBox& box, double epsilon, double level, ModelTag tag);
std::string grid_metadata_json(const OccupancyGrid& grid);
OccupancyGrid read_grid(std::istream& pbm, const std::string& metadata_json);

}  // namespace gplab::perc
