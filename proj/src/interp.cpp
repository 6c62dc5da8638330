#include "gplab/interp.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>

#include "gplab/error.hpp"

namespace gplab::interp {

using field::NoiseFlag;

namespace {

Index sup_norm(const LatticePoint& z) {
    Index m = 0;
    for (Index v : z) m = std::max(m, v < 0 ? -v : v);
    return m;
}

Index ipow(Index base, int e) {
    Index r = 1;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

// Number of points of [-m, m]^dim with |w|∞ = m.
Index shell_size(Index m, int dim) {
    if (dim == 0) return m == 0 ? 1 : 0;
    if (m == 0) return 1;
    return ipow(2 * m + 1, dim) - ipow(2 * m - 1, dim);
}

// Lexicographic position of z[from..] inside the shell of radius m (or the
// full box when `in_shell` already holds).
std::uint64_t rank_within(const LatticePoint& z, std::size_t from, Index m, bool in_shell) {
    const int rest = static_cast<int>(z.size() - from);
    if (rest == 0) return 0;
    std::uint64_t r = 0;
    const Index v = z[from];
    for (Index w = -m; w < v; ++w) {
        const bool hits = in_shell || w == m || w == -m;
        r += static_cast<std::uint64_t>(hits ? ipow(2 * m + 1, rest - 1) : shell_size(m, rest - 1));
    }
    return r + rank_within(z, from + 1, m, in_shell || v == m || v == -m);
}

}  // namespace

double TauBase::at_lattice(Index k) const {
    return c / (1.0 + std::pow(static_cast<double>(k), dim + 1));
}

double TauBase::operator()(const Point& y) const {
    Index m = 0;
    for (double v : y) {
        const auto x = static_cast<Index>(std::floor(v + 0.5));
        m = std::max(m, x < 0 ? -x : x);
    }
    return at_lattice(m);
}

TauBase tau_base(int dim, Index shells) {
    if (dim < 1) throw Error(ErrorKind::ConfigInvalid, "dimension must be positive", "geometry.d");
    TauBase t;
    t.dim = dim;
    t.shells = shells;
    // Shell sums, smallest terms first.
    long double sum = 0.0L;
    for (Index k = shells; k >= 1; --k)
        sum += static_cast<long double>(shell_size(k, dim)) / (1.0L + std::pow(static_cast<long double>(k), dim + 1));
    t.partial_sum = static_cast<double>(sum + 1.0L);

    // The shell term a(t) = ((2t+1)^d - (2t-1)^d) / (1 + t^{d+1}) decreases for
    // large t, so Σ_{k>K} a(k) lies between ∫_{K+1}^∞ a and ∫_K^∞ a. Expanding
    // (2t+1)^d - (2t-1)^d = 2 Σ_{d-j odd} C(d,j) (2t)^j and bounding
    // 1 + t^{d+1} between t^{d+1} and t^{d+1}(1 + K^{-(d+1)}) gives closed forms.
    auto power_integral = [&](double from) {
        double total = 0.0;
        double binom = 1.0;
        for (int j = 0; j < dim; ++j) {
            if ((dim - j) % 2 == 1) total += 2.0 * binom * std::pow(2.0, j) * std::pow(from, j - dim) / (dim - j);
            binom = binom * (dim - j) / (j + 1);
        }
        return total;
    };
    const double K = static_cast<double>(shells);
    t.tail_hi = power_integral(K);
    t.tail_lo = power_integral(K + 1.0) / (1.0 + std::pow(K, -(dim + 1)));
    t.c = 0.5 / (t.partial_sum + 0.5 * (t.tail_lo + t.tail_hi));
    return t;
}

CentreEnumerator::CentreEnumerator(int dim) : dim_(dim) {}

void CentreEnumerator::fill_shell() {
    ++shell_;
    pending_.clear();
    pos_ = 0;
    const Index m = shell_;
    LatticePoint z(dim_);
    // Depth-first over coordinates in increasing order keeps lexicographic order.
    auto rec = [&](auto&& self, int axis, bool on_shell) -> void {
        if (axis == dim_) {
            if (on_shell) pending_.push_back(z);
            return;
        }
        // On the last axis an interior prefix only admits the two faces.
        const Index stride = (axis == dim_ - 1 && !on_shell && m > 0) ? 2 * m : 1;
        for (Index v = -m; v <= m; v += stride) {
            z[axis] = v;
            self(self, axis + 1, on_shell || v == m || v == -m);
        }
    };
    rec(rec, 0, m == 0);
}

const LatticePoint& CentreEnumerator::next() {
    if (pos_ >= pending_.size()) fill_shell();
    ++produced_;
    return pending_[pos_++];
}

std::uint64_t centre_rank(const LatticePoint& z) {
    const Index m = sup_norm(z);
    const int d = static_cast<int>(z.size());
    const std::uint64_t inside = m == 0 ? 0 : static_cast<std::uint64_t>(ipow(2 * m - 1, d));
    return inside + rank_within(z, 0, m, false);
}

SprinklingField::SprinklingField(const TauBase& base, double range, double sprinkle, double spacing, const GridBox& window)
    : base_(base), range_(range), sprinkle_(sprinkle), spacing_(spacing), centres_(window.dim()) {
    if (window.dim() != base.dim) throw std::invalid_argument("SprinklingField: dimension mismatch");
    if (!(sprinkle >= 0.0)) throw Error(ErrorKind::ConfigInvalid, "sprinkle must be >= 0", "model.s");
    const double ratio = range / spacing;
    half_cells_ = static_cast<Index>(std::llround(ratio));
    if (half_cells_ < 1 || std::abs(ratio - static_cast<double>(half_cells_)) > 1e-9 * ratio)
        throw Error(ErrorKind::ConfigInvalid, "interpolation needs N to be a positive multiple of h", "model.N");
    boxes_ = GridBox(box_of(window.lo()), box_of(window.hi()));
    values_.assign(boxes_.size(), 0.0);
    ranks_.resize(boxes_.size());
    for_each_point(boxes_, [&](std::size_t i, const LatticePoint& z) { ranks_[i] = centre_rank(z); });
}

LatticePoint SprinklingField::box_of(const LatticePoint& i) const {
    LatticePoint z(i.size());
    for (std::size_t a = 0; a < i.size(); ++a) z[a] = floor_div(i[a] + half_cells_, 2 * half_cells_);
    return z;
}

bool SprinklingField::processed(const LatticePoint& z) const {
    return centre_rank(z) < (half_steps_ + 1) / 2;
}

LatticePoint SprinklingField::centre(int dim, std::uint64_t n) {
    CentreEnumerator e(dim);
    for (std::uint64_t k = 0; k < n; ++k) e.next();
    return e.next();
}

void SprinklingField::step() {
    const int d = boxes_.dim();
    if (half_steps_ % 2 == 0) {
        current_ = centres_.next();
        if (boxes_.contains(current_)) values_[boxes_.linear(current_)] += 0.5 * sprinkle_;
    } else {
        for_each_point(boxes_, [&](std::size_t i, const LatticePoint& u) {
            Index m = 0;
            for (int a = 0; a < d; ++a) m = std::max(m, std::abs(u[a] - current_[a]));
            values_[i] += sprinkle_ * base_.at_lattice(m);
        });
    }
    ++half_steps_;
}

void SprinklingField::advance_to(std::uint64_t half_steps) {
    if (half_steps < half_steps_) throw std::logic_error("SprinklingField only moves forward");
    while (half_steps_ < half_steps) step();
}

double SprinklingField::max_deficit() const {
    double worst = 0.0;
    for (double v : values_) worst = std::max(worst, sprinkle_ - v);
    return worst;
}

bool SprinklingField::advance_until_converged(double tol, std::uint64_t max_half_steps) {
    // Deficits only shrink, so checking once per completed shell is enough.
    while (half_steps_ < max_half_steps) {
        const Index shell = centres_.current_shell();
        do {
            step();
            step();
        } while (centres_.current_shell() == shell && half_steps_ < max_half_steps);
        if (max_deficit() < tol * sprinkle_) return true;
    }
    return max_deficit() < tol * sprinkle_;
}

GridBox usable_box(const GridBox& eval_box, Index ratio_a, Index ratio_b) {
    return eval_box.expanded(-std::max(ratio_a, ratio_b) / 2);
}

GridBox padded_box(const GridBox& target, Index ratio_a, Index ratio_b) {
    return target.expanded(std::max(ratio_a, ratio_b) / 2);
}

HybridInputs hybrid_inputs(const field::FieldBundle& fine, const field::FieldBundle& coarse, const GridBox& box) {
    if (!(fine.eval_box == coarse.eval_box) || fine.spacing != coarse.spacing)
        throw std::invalid_argument("hybrid_inputs: bundles must share the evaluation lattice");
    if (!fine.has_truncated() || !coarse.has_truncated())
        throw std::invalid_argument("hybrid_inputs: bundles need truncated fields");
    HybridInputs in;
    in.box = box;
    in.spacing = fine.spacing;
    const std::size_t n = box.size();
    in.fine_values.resize(n);
    in.coarse_values.resize(n);
    in.fine_flags.resize(n);
    in.coarse_flags.resize(n);
    auto read = [&](const field::FieldBundle& b, const LatticePoint& i, double& value, NoiseFlag& flag) {
        const LatticePoint j = b.representative(i);
        if (!b.eps_box.contains(j))
            throw Error(ErrorKind::WindowTooSmall, "interpolation window reaches past the sampled ε-cells");
        value = b.truncated[b.eval_box.linear(b.eps_to_eval(j))];
        flag = b.flags[b.eps_box.linear(j)];
    };
    for_each_point(box, [&](std::size_t k, const LatticePoint& i) {
        read(fine, i, in.fine_values[k], in.fine_flags[k]);
        read(coarse, i, in.coarse_values[k], in.coarse_flags[k]);
    });
    return in;
}

namespace {

bool open_cell(NoiseFlag flag, double value, double level) {
    if (flag == NoiseFlag::ForcedOpen) return true;
    if (flag == NoiseFlag::ForcedClosed) return false;
    return value >= -level;
}

}  // namespace

perc::OccupancyGrid hybrid(const HybridInputs& in, double level, Direction dir, const SprinklingField& tau) {
    const bool up = dir == Direction::Up;
    const double start_level = up ? level : level - tau.sprinkle();
    const GridBox& boxes = tau.boxes();
    if (!boxes.contains(tau.box_of(in.box.lo())) || !boxes.contains(tau.box_of(in.box.hi())))
        throw Error(ErrorKind::WindowTooSmall, "sprinkling field does not cover the interpolation window");
    const std::uint64_t done = (tau.half_steps() + 1) / 2;
    std::vector<std::uint8_t> box_done(boxes.size());
    for (std::size_t b = 0; b < boxes.size(); ++b) box_done[b] = tau.rank_of_box(b) < done;

    perc::OccupancyGrid g{in.spacing, in.box, std::vector<std::uint8_t>(in.box.size()),
                          std::numeric_limits<double>::quiet_NaN(), perc::ModelTag::Interpolation};
    const auto& values = tau.box_values();
    for_each_point(in.box, [&](std::size_t k, const LatticePoint& i) {
        const std::size_t b = boxes.linear(tau.box_of(i));
        const bool fine = up == static_cast<bool>(box_done[b]);
        g.open[k] = fine ? open_cell(in.fine_flags[k], in.fine_values[k], start_level + values[b])
                         : open_cell(in.coarse_flags[k], in.coarse_values[k], start_level + values[b]);
    });
    return g;
}

perc::OccupancyGrid hybrid_limit(const HybridInputs& in, double level, Direction dir, double sprinkle) {
    const bool up = dir == Direction::Up;
    const auto& v = up ? in.fine_values : in.coarse_values;
    const auto& f = up ? in.fine_flags : in.coarse_flags;
    const double final_level = up ? level + sprinkle : level;
    auto g = perc::threshold_values(in.box, in.spacing, v, f, final_level, perc::ModelTag::Interpolation);
    return g;
}

bool is_subset(const perc::OccupancyGrid& a, const perc::OccupancyGrid& b) {
    if (!(a.box == b.box)) throw std::invalid_argument("is_subset: grids differ in shape");
    for (std::size_t i = 0; i < a.open.size(); ++i)
        if (a.open[i] && !b.open[i]) return false;
    return true;
}

bool sufficient_event(const HybridInputs& in, const SprinklingField& tau, std::uint64_t n) {
    const LatticePoint zn = SprinklingField::centre(in.box.dim(), n);
    bool ok = true;
    for_each_point(in.box, [&](std::size_t k, const LatticePoint& i) {
        if (!ok || tau.box_of(i) != zn) return;
        if (in.fine_flags[k] != NoiseFlag::Neutral || in.coarse_flags[k] != NoiseFlag::Neutral ||
            std::abs(in.fine_values[k] - in.coarse_values[k]) > 0.5 * tau.sprinkle())
            ok = false;
    });
    return ok;
}

std::vector<StepRecord> trace_steps(const HybridInputs& in, double level, Direction dir, SprinklingField tau,
                                    const perc::EventGeometry& geometry, std::uint64_t max_half_steps) {
    std::vector<StepRecord> out;
    auto grid = hybrid(in, level, dir, tau);
    StepRecord rec;
    rec.half_steps = tau.half_steps();
    rec.event = perc::occurs(grid, geometry);
    out.push_back(rec);
    while (tau.half_steps() < max_half_steps) {
        const bool was = rec.event;
        tau.step();
        auto next = hybrid(in, level, dir, tau);
        rec.half_steps = tau.half_steps();
        rec.included = is_subset(grid, next);
        rec.event = perc::occurs(next, geometry);
        // Odd count: just finished I_{n+1/2}; even: I_{n+1}.
        if (rec.half_steps % 2 == 1)
            rec.p_accumulator += static_cast<double>(was) - static_cast<double>(rec.event);
        else
            rec.q_accumulator += static_cast<double>(rec.event) - static_cast<double>(was);
        out.push_back(rec);
        grid = std::move(next);
    }
    return out;
}

void write_trace_jsonl(std::ostream& out, const std::vector<StepRecord>& trace) {
    for (const auto& r : trace) {
        nlohmann::ordered_json j;
        j["k"] = 0.5 * static_cast<double>(r.half_steps);
        j["event"] = r.event;
        j["included"] = r.included;
        j["p_acc"] = r.p_accumulator;
        j["q_acc"] = r.q_accumulator;
        out << j.dump() << '\n';
    }
}

}  // namespace gplab::interp
