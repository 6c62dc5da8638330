#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gplab/geometry.hpp"

namespace gplab::kernel {

enum class Family { BargmannFock, RationalQuadratic, TabulatedRadial };

std::string to_string(Family family);

/// Radial, nonnegative convolution square root q of a covariance κ = q ⋆ q.
///
/// All families are radial, so evaluations are automatically invariant under
/// coordinate sign flips and permutations. Bargmann-Fock carries an infinite
/// decay exponent (super-polynomial decay).
class KernelSpec {
  public:
    static KernelSpec bargmann_fock(int dim);
    static KernelSpec rational_quadratic(int dim, double beta);
    /// Piecewise-linear profile through (radius, value) samples, zero beyond
    /// the last radius. `beta` is the decay exponent used for schedules.
    static KernelSpec tabulated(int dim, std::vector<double> radii, std::vector<double> values, double beta);

    Family family() const { return family_; }
    int dim() const { return dim_; }
    double decay_exponent() const { return beta_; }
    bool super_polynomial() const { return beta_ == std::numeric_limits<double>::infinity(); }

    double radial(double r) const;
    double operator()(std::span<const double> x) const;

    /// Smallest radius beyond which q stays below `tol`.
    double numeric_radius(double tol = 1e-9) const;

    const std::vector<double>& table_radii() const { return radii_; }
    const std::vector<double>& table_values() const { return values_; }

  private:
    KernelSpec(Family family, int dim, double beta) : family_(family), dim_(dim), beta_(beta) {}

    Family family_;
    int dim_;
    double beta_;
    std::vector<double> radii_;
    std::vector<double> values_;
};

/// Reads a two-column (radius, value) CSV; radii must be strictly increasing.
KernelSpec read_tabulated_csv(std::istream& in, int dim, double beta);

/// Parses "bargmann-fock", "rational-quadratic:3", "tabulated:path.csv:3".
KernelSpec parse_kernel(const std::string& text, int dim);

double eval_q(const KernelSpec& spec, std::span<const double> x);

/// κ(x) = (q ⋆ q)(x). Closed form for Bargmann-Fock, quadrature otherwise.
double eval_kappa(const KernelSpec& spec, std::span<const double> x, double tol = 1e-6);

struct QuadratureResult {
    double value = 0.0;
    double step = 0.0;
    double radius = 0.0;
    int evaluations = 0;
};

/// Product trapezoid rule for ∫ q(y) q(x - y) dy on a centred box. The step is
/// halved until successive values agree within `tol`, then the box radius is
/// doubled until the same holds for the truncation. Throws
/// QuadratureNonConvergent when `max_points` would be exceeded.
QuadratureResult kappa_quadrature(const KernelSpec& spec, std::span<const double> x, double tol = 1e-6,
                                  double max_points = 6.0e7);

/// Smooth isotropic cutoff χ_N(x) = χ(x / N): 1 on |x| <= N/4, 0 on |x| >= N/2.
struct CutoffSpec {
    double range = 1.0;  // N
};

/// C^∞ ramp on r = |x|/N: φ(2 - 4r) / (φ(2 - 4r) + φ(4r - 1)), φ(t) = e^{-1/t}.
double cutoff_profile(double r);
double eval_cutoff(const CutoffSpec& cut, std::span<const double> x);
double eval_cutoff_radial(const CutoffSpec& cut, double radius);

struct ParamSchedule {
    double range = 1.0;   // N
    double eta = 0.0;
    double gamma = 0.0;
    double sprinkle = 0.0;   // s_N
    double epsilon = 0.0;    // ε_N
    double delta = 0.0;      // δ_N
    bool bargmann_fock = false;
};

/// s_N = N^{-η}, ε_N = N^{-β + d/2}, δ_N = exp(-N^γ) with γ = 2β - d - 2η.
ParamSchedule schedule(double range, double eta, double beta, int dim);

/// Super-polynomial variant: s_N = N^{γ/2} e^{-cN²/2}, ε_N = e^{-cN²/2},
/// δ_N = e^{-N^γ}, for any γ > d.
ParamSchedule bargmann_fock_schedule(double range, double c, double gamma, int dim);

/// Inverse of the Bargmann-Fock sprinkle: the N >= sqrt(γ/(2c)) (decreasing
/// branch) with s_N = s. Scales like sqrt(2 log(1/s) / c).
double bargmann_fock_range_for_sprinkle(double sprinkle, double c, double gamma);

}  // namespace gplab::kernel
