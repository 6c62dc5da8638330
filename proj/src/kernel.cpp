#include "gplab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>

#include "gplab/error.hpp"

namespace gplab::kernel {

std::string to_string(Family family) {
    switch (family) {
        case Family::BargmannFock: return "bargmann-fock";
        case Family::RationalQuadratic: return "rational-quadratic";
        case Family::TabulatedRadial: return "tabulated";
    }
    return "unknown";
}

namespace {

void check_dim(int dim) {
    if (dim < 1) throw Error(ErrorKind::ConfigInvalid, "dimension must be positive", "kernel.dim");
}

double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

}  // namespace

KernelSpec KernelSpec::bargmann_fock(int dim) {
    check_dim(dim);
    return KernelSpec(Family::BargmannFock, dim, std::numeric_limits<double>::infinity());
}

KernelSpec KernelSpec::rational_quadratic(int dim, double beta) {
    check_dim(dim);
    if (!(beta > dim / 2.0) || !std::isfinite(beta))
        throw Error(ErrorKind::ConfigInvalid, "rational-quadratic exponent must satisfy beta > d/2", "kernel.beta");
    return KernelSpec(Family::RationalQuadratic, dim, beta);
}

KernelSpec KernelSpec::tabulated(int dim, std::vector<double> radii, std::vector<double> values, double beta) {
    check_dim(dim);
    if (radii.size() != values.size() || radii.size() < 2)
        throw Error(ErrorKind::ConfigInvalid, "tabulated profile needs at least two (radius, value) rows", "kernel.table");
    if (radii.front() != 0.0)
        throw Error(ErrorKind::ConfigInvalid, "tabulated profile must start at radius 0", "kernel.table");
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] > radii[i - 1]))
            throw Error(ErrorKind::ConfigInvalid, "tabulated radii must be strictly increasing", "kernel.table");
    for (double v : values)
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(ErrorKind::ConfigInvalid, "tabulated values must be finite and nonnegative", "kernel.table");
    if (!(beta > dim / 2.0))
        throw Error(ErrorKind::ConfigInvalid, "decay exponent must satisfy beta > d/2", "kernel.beta");
    KernelSpec spec(Family::TabulatedRadial, dim, beta);
    spec.radii_ = std::move(radii);
    spec.values_ = std::move(values);
    return spec;
}

double KernelSpec::radial(double r) const {
    switch (family_) {
        case Family::BargmannFock:
            return std::pow(2.0 / std::numbers::pi, dim_ / 4.0) * std::exp(-r * r);
        case Family::RationalQuadratic:
            return std::pow(1.0 + r * r, -beta_ / 2.0);
        case Family::TabulatedRadial: {
            if (r >= radii_.back()) return 0.0;
            const auto it = std::upper_bound(radii_.begin(), radii_.end(), r);
            const auto i = static_cast<std::size_t>(it - radii_.begin()) - 1;
            const double t = (r - radii_[i]) / (radii_[i + 1] - radii_[i]);
            return values_[i] + t * (values_[i + 1] - values_[i]);
        }
    }
    return 0.0;
}

double KernelSpec::operator()(std::span<const double> x) const { return radial(norm(x)); }

double KernelSpec::numeric_radius(double tol) const {
    switch (family_) {
        case Family::BargmannFock: {
            const double amp = std::pow(2.0 / std::numbers::pi, dim_ / 4.0);
            return amp <= tol ? 0.0 : std::sqrt(std::log(amp / tol));
        }
        case Family::RationalQuadratic:
            return tol >= 1.0 ? 0.0 : std::sqrt(std::pow(tol, -2.0 / beta_) - 1.0);
        case Family::TabulatedRadial: {
            for (std::size_t i = values_.size(); i-- > 0;) {
                if (values_[i] >= tol) {
                    if (i + 1 == values_.size()) return radii_.back();
                    const double t = (values_[i] - tol) / (values_[i] - values_[i + 1]);
                    return radii_[i] + t * (radii_[i + 1] - radii_[i]);
                }
            }
            return 0.0;
        }
    }
    return 0.0;
}

KernelSpec read_tabulated_csv(std::istream& in, int dim, double beta) {
    std::vector<double> radii;
    std::vector<double> values;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        double r = 0.0;
        double v = 0.0;
        if (!(row >> r >> v)) {
            if (first) {  // header row
                first = false;
                continue;
            }
            throw Error(ErrorKind::ConfigInvalid, "malformed tabulated row: " + line, "kernel.table");
        }
        first = false;
        radii.push_back(r);
        values.push_back(v);
    }
    return KernelSpec::tabulated(dim, std::move(radii), std::move(values), beta);
}

KernelSpec parse_kernel(const std::string& text, int dim) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    if (parts.empty()) throw Error(ErrorKind::ConfigInvalid, "empty kernel description", "kernel.family");
    const std::string& name = parts[0];
    auto number = [&](std::size_t i, const char* field) {
        if (i >= parts.size()) throw Error(ErrorKind::ConfigInvalid, "missing value in kernel '" + text + "'", field);
        try {
            return std::stod(parts[i]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::ConfigInvalid, "not a number: '" + parts[i] + "'", field);
        }
    };
    if (name == "bargmann-fock" || name == "bf") return KernelSpec::bargmann_fock(dim);
    if (name == "rational-quadratic" || name == "rq") return KernelSpec::rational_quadratic(dim, number(1, "kernel.beta"));
    if (name == "tabulated") {
        if (parts.size() < 3) throw Error(ErrorKind::ConfigInvalid, "expected tabulated:PATH:BETA", "kernel.table");
        std::ifstream in(parts[1]);
        if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open " + parts[1], "kernel.table");
        return read_tabulated_csv(in, dim, number(2, "kernel.beta"));
    }
    throw Error(ErrorKind::ConfigInvalid, "unknown kernel family '" + name + "'", "kernel.family");
}

double eval_q(const KernelSpec& spec, std::span<const double> x) { return spec(x); }

double eval_kappa(const KernelSpec& spec, std::span<const double> x, double tol) {
    if (spec.family() == Family::BargmannFock) {
        const double r = norm(x);
        return std::exp(-0.5 * r * r);
    }
    return kappa_quadrature(spec, x, tol).value;
}

QuadratureResult kappa_quadrature(const KernelSpec& spec, std::span<const double> x, double tol, double max_points) {
    const int d = spec.dim();
    if (static_cast<int>(x.size()) != d) throw std::invalid_argument("kappa_quadrature: dimension mismatch");
    std::vector<double> centre(x.begin(), x.end());
    for (double& c : centre) c *= 0.5;
    const double far = spec.numeric_radius(1e-9);

    int evaluations = 0;
    // Midpoint rule over the cells of a `step` grid filling [-outer, outer]^d
    // around the centre, skipping cells inside [-inner, inner]^d. Both radii
    // are multiples of the step, so nested grids tile exactly.
    auto rule = [&](double step, double inner, double outer) {
        const auto n_out = static_cast<Index>(std::llround(outer / step));
        const auto n_in = static_cast<Index>(std::llround(inner / step));
        if (std::pow(2.0 * static_cast<double>(n_out), d) > max_points)
            throw Error(ErrorKind::QuadratureNonConvergent, "quadrature grid exceeds the point budget before reaching tolerance");
        const GridBox box(std::vector<Index>(d, -n_out), std::vector<Index>(d, n_out - 1));
        double sum = 0.0;
        std::vector<double> y(d);
        for_each_point(box, [&](std::size_t, const LatticePoint& k) {
            bool interior = true;
            for (int a = 0; a < d; ++a) interior = interior && k[a] >= -n_in && k[a] < n_in;
            if (interior) return;
            double r1 = 0.0;
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
                y[a] = centre[a] + step * (static_cast<double>(k[a]) + 0.5);
                r1 += y[a] * y[a];
                const double z = x[a] - y[a];
                r2 += z * z;
            }
            sum += spec.radial(std::sqrt(r1)) * spec.radial(std::sqrt(r2));
            ++evaluations;
        });
        return sum * std::pow(step, d);
    };

    // Core box: both peaks plus the bulk of q. Refine until stable.
    const double core = std::ceil(0.5 * norm(x) + std::min(far, 8.0) + 1.0);
    double step = 0.5;
    double value = rule(step, 0.0, core);
    for (;;) {
        const double finer = rule(step / 2.0, 0.0, core);
        step /= 2.0;
        const double change = std::abs(finer - value);
        value = finer;
        if (change < 0.25 * tol) break;
    }
    // Doubling shells with a step growing in proportion to the radius; for
    // polynomial kernels the shell masses fall geometrically, so the remainder
    // is estimated from the last ratio.
    double radius = core;
    double previous_shell = 0.0;
    for (int shell = 0; radius < far + norm(x); ++shell) {
        if (shell > 60) throw Error(ErrorKind::QuadratureNonConvergent, "tail shells do not converge");
        step *= 2.0;
        const double mass = rule(step, radius, 2.0 * radius);
        radius *= 2.0;
        value += mass;
        if (shell > 0 && previous_shell > 0.0) {
            const double ratio = mass / previous_shell;
            if (ratio < 0.95 && mass * ratio / (1.0 - ratio) < 0.5 * tol && mass < 0.5 * tol) break;
        } else if (mass == 0.0) {
            break;
        }
        previous_shell = mass;
    }
    return {value, step, radius, evaluations};
}

double cutoff_profile(double r) {
    if (r <= 0.25) return 1.0;
    if (r >= 0.5) return 0.0;
    auto phi = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
    const double inner = phi(2.0 - 4.0 * r);
    const double outer = phi(4.0 * r - 1.0);
    return inner / (inner + outer);
}

double eval_cutoff_radial(const CutoffSpec& cut, double radius) { return cutoff_profile(radius / cut.range); }

double eval_cutoff(const CutoffSpec& cut, std::span<const double> x) { return eval_cutoff_radial(cut, norm(x)); }

ParamSchedule schedule(double range, double eta, double beta, int dim) {
    if (!(range >= 1.0)) throw Error(ErrorKind::InvalidSchedule, "range N must be >= 1", "model.N");
    if (!std::isfinite(beta))
        throw Error(ErrorKind::InvalidSchedule,
                    "polynomial schedule needs a finite decay exponent; use the Bargmann-Fock schedule", "model.eta");
    if (!(eta > 0.0 && eta < beta - dim))
        throw Error(ErrorKind::InvalidSchedule, "eta must lie in (0, beta - d)", "model.eta");
    ParamSchedule s;
    s.range = range;
    s.eta = eta;
    s.gamma = 2.0 * beta - dim - 2.0 * eta;
    s.sprinkle = std::pow(range, -eta);
    s.epsilon = std::pow(range, -beta + dim / 2.0);
    s.delta = std::exp(-std::pow(range, s.gamma));
    return s;
}

ParamSchedule bargmann_fock_schedule(double range, double c, double gamma, int dim) {
    if (!(range >= 1.0)) throw Error(ErrorKind::InvalidSchedule, "range N must be >= 1", "model.N");
    if (!(c > 0.0)) throw Error(ErrorKind::InvalidSchedule, "constant c must be positive", "model.bf_c");
    if (!(gamma > dim)) throw Error(ErrorKind::InvalidSchedule, "gamma must exceed d", "model.gamma");
    ParamSchedule s;
    s.range = range;
    s.gamma = gamma;
    s.bargmann_fock = true;
    const double gauss = std::exp(-0.5 * c * range * range);
    s.sprinkle = std::pow(range, gamma / 2.0) * gauss;
    s.epsilon = gauss;
    s.delta = std::exp(-std::pow(range, gamma));
    return s;
}

double bargmann_fock_range_for_sprinkle(double sprinkle, double c, double gamma) {
    if (!(c > 0.0) || !(gamma > 0.0)) throw Error(ErrorKind::InvalidSchedule, "c and gamma must be positive");
    auto log_s = [&](double n) { return 0.5 * gamma * std::log(n) - 0.5 * c * n * n; };
    const double peak = std::max(1.0, std::sqrt(gamma / (2.0 * c)));
    const double target = std::log(sprinkle);
    if (!(sprinkle > 0.0) || target >= log_s(peak))
        throw Error(ErrorKind::InvalidSchedule, "sprinkle is above the largest value the schedule attains");
    double lo = peak;
    double hi = 2.0 * peak;
    while (log_s(hi) > target) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (log_s(mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace gplab::kernel
