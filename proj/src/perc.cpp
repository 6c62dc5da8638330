#include "gplab/perc.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <sstream>

#include "gplab/error.hpp"
#include "gplab/format.hpp"
#include "gplab/union_find.hpp"

namespace gplab::perc {

using field::NoiseFlag;

std::string to_string(ModelTag tag) {
    switch (tag) {
        case ModelTag::ContinuumApprox: return "continuum-approx";
        case ModelTag::Truncated: return "truncated";
        case ModelTag::Interpolation: return "interpolation";
    }
    return "unknown";
}

namespace {

ModelTag parse_tag(const std::string& s) {
    for (ModelTag t : {ModelTag::ContinuumApprox, ModelTag::Truncated, ModelTag::Interpolation})
        if (to_string(t) == s) return t;
    throw Error(ErrorKind::ConfigInvalid, "unknown model tag '" + s + "'", "tag");
}

// Slack for comparing lattice positions against event radii.
constexpr double kSlack = 1e-9;

bool cell_open(NoiseFlag flag, double value, double level) {
    if (flag == NoiseFlag::ForcedOpen) return true;
    if (flag == NoiseFlag::ForcedClosed) return false;
    return value >= -level;
}

// Coordinate of linear index i along axis a.
inline Index coord(const GridBox& box, std::size_t i, int a) {
    return box.lo()[a] + static_cast<Index>((i / box.stride(a)) % static_cast<std::size_t>(box.extent(a)));
}

}  // namespace

std::size_t OccupancyGrid::open_count() const {
    return static_cast<std::size_t>(std::count_if(open.begin(), open.end(), [](std::uint8_t v) { return v != 0; }));
}

OccupancyGrid threshold_values(const GridBox& box, double epsilon, std::span<const double> values,
                               std::span<const NoiseFlag> flags, double level, ModelTag tag) {
    if (!std::isfinite(level)) throw Error(ErrorKind::ConfigInvalid, "level must be finite", "model.level");
    if (values.size() != box.size() || (!flags.empty() && flags.size() != box.size()))
        throw std::invalid_argument("threshold: size mismatch");
    OccupancyGrid g{epsilon, box, std::vector<std::uint8_t>(box.size()), level, tag};
    for (std::size_t i = 0; i < values.size(); ++i)
        g.open[i] = cell_open(flags.empty() ? NoiseFlag::Neutral : flags[i], values[i], level) ? 1 : 0;
    return g;
}

OccupancyGrid threshold_levels(const GridBox& box, double epsilon, std::span<const double> values,
                               std::span<const NoiseFlag> flags, std::span<const double> levels, ModelTag tag) {
    if (values.size() != box.size() || levels.size() != box.size() || (!flags.empty() && flags.size() != box.size()))
        throw std::invalid_argument("threshold_levels: size mismatch");
    OccupancyGrid g{epsilon, box, std::vector<std::uint8_t>(box.size()), std::numeric_limits<double>::quiet_NaN(), tag};
    for (std::size_t i = 0; i < values.size(); ++i)
        g.open[i] = cell_open(flags.empty() ? NoiseFlag::Neutral : flags[i], values[i], levels[i]) ? 1 : 0;
    return g;
}

OccupancyGrid threshold(const field::FieldBundle& bundle, double level, ModelTag tag) {
    if (tag == ModelTag::ContinuumApprox) {
        const auto f = bundle.full_on_eps();
        return threshold_values(bundle.eps_box, bundle.epsilon, f, {}, level, tag);
    }
    const auto fe = bundle.truncated_on_eps();
    return threshold_values(bundle.eps_box, bundle.epsilon, fe, bundle.flags, level, tag);
}

ClusterLabeling label(const OccupancyGrid& grid, std::span<const std::uint8_t> mask) {
    const GridBox& box = grid.box;
    const std::size_t n = box.size();
    const int d = box.dim();
    if (!mask.empty() && mask.size() != n) throw std::invalid_argument("label: mask size mismatch");
    auto active = [&](std::size_t i) { return grid.open[i] != 0 && (mask.empty() || mask[i] != 0); };

    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!active(i)) continue;
        for (int a = 0; a < d; ++a) {
            if (coord(box, i, a) == box.lo()[a]) continue;
            const std::size_t j = i - box.stride(a);
            if (active(j)) uf.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
        }
    }

    ClusterLabeling out;
    out.id.assign(n, -1);
    std::vector<std::int64_t> root_id(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (!active(i)) continue;
        const std::uint32_t root = uf.find(static_cast<std::uint32_t>(i));
        if (root_id[root] < 0) {
            root_id[root] = static_cast<std::int64_t>(out.sizes.size());
            out.sizes.push_back(0);
            out.faces.push_back(0);
        }
        const auto c = static_cast<std::size_t>(root_id[root]);
        out.id[i] = root_id[root];
        ++out.sizes[c];
        for (int a = 0; a < d; ++a) {
            const Index x = coord(box, i, a);
            if (x == box.lo()[a]) out.faces[c] |= 1u << (2 * a);
            if (x == box.hi()[a]) out.faces[c] |= 1u << (2 * a + 1);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

AdmissibleEvent AdmissibleEvent::full_space(double r, double R) {
    AdmissibleEvent e;
    e.shape = Shape::FullSpace;
    e.r = r;
    e.R = R;
    e.validate();
    return e;
}

AdmissibleEvent AdmissibleEvent::slab(double r, double R, double M) {
    AdmissibleEvent e;
    e.shape = Shape::Slab;
    e.r = r;
    e.R = R;
    e.M = M;
    e.validate();
    return e;
}

AdmissibleEvent AdmissibleEvent::crossing(double L, double aspect) {
    AdmissibleEvent e;
    e.shape = Shape::Crossing;
    e.R = L;
    e.aspect = aspect;
    e.validate();
    return e;
}

AdmissibleEvent AdmissibleEvent::with_scale(double scale) const {
    AdmissibleEvent e = *this;
    e.R = scale;
    e.validate();
    return e;
}

void AdmissibleEvent::validate() const {
    auto bad = [](const std::string& field, const std::string& what) {
        throw Error(ErrorKind::ConfigInvalid, what, "event." + field);
    };
    if (shape == Shape::Crossing) {
        if (!(R > 0.0) || !std::isfinite(R)) bad("L", "crossing length must be positive");
        if (!(aspect > 0.0) || !std::isfinite(aspect)) bad("aspect", "aspect ratio must be positive");
        return;
    }
    if (!(r >= 0.0) || !std::isfinite(r)) bad("r", "r must be a finite number >= 0");
    if (!(R >= r) || !std::isfinite(R)) bad("R", "R must be finite and >= r");
    if (shape == Shape::Slab && (!(M >= 0.0) || !std::isfinite(M))) bad("M", "M must be a finite number >= 0");
}

std::string AdmissibleEvent::text() const {
    switch (shape) {
        case Shape::FullSpace: return "full:" + format_number(r) + "," + format_number(R);
        case Shape::Slab: return "slab:" + format_number(r) + "," + format_number(R) + "," + format_number(M);
        case Shape::Crossing: return "cross:" + format_number(R) + "," + format_number(aspect);
    }
    return {};
}

AdmissibleEvent parse_event(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    std::vector<double> nums;
    if (colon != std::string::npos) {
        std::stringstream ss(text.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                nums.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw Error(ErrorKind::ConfigInvalid, "bad number '" + item + "' in event '" + text + "'", "event");
            }
        }
    }
    if (kind == "full" && nums.size() == 2) return AdmissibleEvent::full_space(nums[0], nums[1]);
    if (kind == "slab" && nums.size() == 3) return AdmissibleEvent::slab(nums[0], nums[1], nums[2]);
    if (kind == "cross" && nums.size() == 1) return AdmissibleEvent::crossing(nums[0]);
    if (kind == "cross" && nums.size() == 2) return AdmissibleEvent::crossing(nums[0], nums[1]);
    throw Error(ErrorKind::ConfigInvalid, "cannot parse event '" + text + "' (expected full:r,R, slab:r,R,M or cross:L[,aspect])",
                "event");
}

namespace {

// Half-widths (in cells) an event needs along each axis.
std::vector<Index> needed_half_widths(const AdmissibleEvent& e, int d, double eps) {
    std::vector<Index> half(d);
    auto cells_beyond = [&](double R) { return static_cast<Index>(std::ceil((R + 0.5 * eps) / eps - kSlack)); };
    auto cells_within = [&](double R) { return static_cast<Index>(std::floor(R / eps + kSlack)); };
    for (int a = 0; a < d; ++a) {
        switch (e.shape) {
            case Shape::FullSpace: half[a] = cells_beyond(e.R); break;
            case Shape::Slab: half[a] = cells_beyond(a < 2 ? e.R : std::min(e.M, e.R)); break;
            case Shape::Crossing: half[a] = cells_within(a == 0 ? 0.5 * e.aspect * e.R : 0.5 * e.R); break;
        }
    }
    return half;
}

}  // namespace

GridBox required_box(const AdmissibleEvent& event, int dim, double epsilon) {
    const auto half = needed_half_widths(event, dim, epsilon);
    std::vector<Index> lo(dim);
    for (int a = 0; a < dim; ++a) lo[a] = -half[a];
    return GridBox(std::move(lo), half);
}

EventGeometry::EventGeometry(const AdmissibleEvent& ev, const GridBox& b, double eps) : event(ev), epsilon(eps), box(b) {
    event.validate();
    const int d = box.dim();
    if (event.shape == Shape::Slab && d < 3)
        throw Error(ErrorKind::ConfigInvalid, "slab events need d >= 3", "event");
    const auto half = needed_half_widths(event, d, eps);
    for (int a = 0; a < d; ++a)
        if (box.lo()[a] > -half[a] || box.hi()[a] < half[a])
            throw Error(ErrorKind::WindowTooSmall, "window of " + std::to_string(box.extent(a)) + " cells along axis " +
                                                       std::to_string(a + 1) + " cannot decide " + event.text());
    if (event.shape == Shape::Crossing && half[0] < 1)
        throw Error(ErrorKind::WindowTooSmall, "crossing box is narrower than two cells");

    const std::size_t n = box.size();
    domain.assign(n, 0);
    source.assign(n, 0);
    target.assign(n, 0);
    const double h = 0.5 * eps;
    for_each_point(box, [&](std::size_t i, const LatticePoint& j) {
        bool in_domain = true, meets_inner = true, meets_outside = false;
        for (int a = 0; a < d; ++a) {
            const double c = std::abs(eps * static_cast<double>(j[a]));
            switch (event.shape) {
                case Shape::FullSpace:
                case Shape::Slab:
                    if (event.shape == Shape::Slab && a >= 2 && c - h > event.M + kSlack) in_domain = false;
                    if (c - h > event.r + kSlack) meets_inner = false;
                    if (c + h > event.R + kSlack) meets_outside = true;
                    break;
                case Shape::Crossing:
                    if (j[a] < -half[a] || j[a] > half[a]) in_domain = false;
                    break;
            }
        }
        if (!in_domain) return;
        domain[i] = 1;
        if (event.shape == Shape::Crossing) {
            source[i] = j[0] == -half[0];
            target[i] = j[0] == half[0];
        } else {
            source[i] = meets_inner;
            target[i] = meets_outside;
        }
    });
}

bool occurs(const OccupancyGrid&, const ClusterLabeling& labeling, const EventGeometry& geo) {
    std::vector<std::uint8_t> reached(labeling.count(), 0);
    bool any = false;
    for (std::size_t i = 0; i < labeling.id.size(); ++i)
        if (geo.source[i] && labeling.id[i] >= 0) reached[static_cast<std::size_t>(labeling.id[i])] = any = true;
    if (!any) return false;
    for (std::size_t i = 0; i < labeling.id.size(); ++i)
        if (geo.target[i] && labeling.id[i] >= 0 && reached[static_cast<std::size_t>(labeling.id[i])]) return true;
    return false;
}

bool occurs(const OccupancyGrid& grid, const EventGeometry& geo) {
    if (!(grid.box == geo.box)) throw std::invalid_argument("occurs: grid and event geometry differ");
    return occurs(grid, label(grid, geo.domain), geo);
}

bool occurs(const OccupancyGrid& grid, const AdmissibleEvent& event) {
    return occurs(grid, EventGeometry(event, grid.box, grid.epsilon));
}

double arm_reach(const OccupancyGrid& grid, const ClusterLabeling& labeling, double r) {
    const GridBox& box = grid.box;
    const int d = box.dim();
    const double h = 0.5 * grid.epsilon;
    std::vector<std::uint8_t> reached(labeling.count(), 0);
    bool any = false;
    for_each_point(box, [&](std::size_t i, const LatticePoint& j) {
        if (labeling.id[i] < 0) return;
        for (int a = 0; a < d; ++a)
            if (std::abs(grid.epsilon * static_cast<double>(j[a])) - h > r + kSlack) return;
        reached[static_cast<std::size_t>(labeling.id[i])] = any = true;
    });
    if (!any) return -std::numeric_limits<double>::infinity();
    double reach = 0.0;
    for_each_point(box, [&](std::size_t i, const LatticePoint& j) {
        if (labeling.id[i] < 0 || !reached[static_cast<std::size_t>(labeling.id[i])]) return;
        for (int a = 0; a < d; ++a) reach = std::max(reach, std::abs(grid.epsilon * static_cast<double>(j[a])) + h);
    });
    return reach;
}

std::vector<std::size_t> box_cells(const OccupancyGrid& grid, const Point& y, double L) {
    const int d = grid.dim();
    std::vector<Index> lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
        lo[a] = std::max(grid.box.lo()[a], static_cast<Index>(std::ceil((y[a] - L) / grid.epsilon - kSlack)));
        hi[a] = std::min(grid.box.hi()[a], static_cast<Index>(std::floor((y[a] + L) / grid.epsilon + kSlack)));
        if (lo[a] > hi[a]) return {};
    }
    std::vector<std::size_t> cells;
    for_each_point(GridBox(lo, hi), [&](std::size_t, const LatticePoint& j) { cells.push_back(grid.box.linear(j)); });
    return cells;
}

namespace {

OccupancyGrid with_box_set(const OccupancyGrid& grid, const std::vector<std::size_t>& cells, std::uint8_t value) {
    OccupancyGrid g = grid;
    for (std::size_t i : cells) g.open[i] = value;
    return g;
}

}  // namespace

bool coarse_pivotal(const OccupancyGrid& grid, const EventGeometry& geo, const Point& y, double L) {
    const auto cells = box_cells(grid, y, L);
    if (!occurs(with_box_set(grid, cells, 1), geo)) return false;
    return !occurs(with_box_set(grid, cells, 0), geo);
}

bool closed_pivotal(const OccupancyGrid& grid, const EventGeometry& geo, const Point& y, double L) {
    const auto cells = box_cells(grid, y, L);
    if (!occurs(with_box_set(grid, cells, 1), geo)) return false;
    return !occurs(grid, geo);
}

double critical_level(const EventGeometry& geo, std::span<const double> values, std::span<const NoiseFlag> flags) {
    const GridBox& box = geo.box;
    const std::size_t n = box.size();
    const int d = box.dim();
    if (values.size() != n || (!flags.empty() && flags.size() != n))
        throw std::invalid_argument("critical_level: size mismatch");
    auto flag = [&](std::size_t i) { return flags.empty() ? NoiseFlag::Neutral : flags[i]; };

    // Activation level: a cell is open at level l iff l >= -value.
    std::vector<std::uint32_t> order;
    order.reserve(n);
    std::size_t forced = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!geo.domain[i] || flag(i) == NoiseFlag::ForcedClosed) continue;
        order.push_back(static_cast<std::uint32_t>(i));
        forced += flag(i) == NoiseFlag::ForcedOpen;
    }
    auto activation = [&](std::uint32_t i) {
        return flag(i) == NoiseFlag::ForcedOpen ? -std::numeric_limits<double>::infinity() : -values[i];
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return activation(a) < activation(b); });

    UnionFind uf(n);
    std::vector<std::uint8_t> active(n, 0);
    std::vector<std::uint8_t> has_source(geo.source), has_target(geo.target);
    for (std::uint32_t i : order) {
        active[i] = 1;
        std::uint32_t root = i;
        for (int a = 0; a < d; ++a) {
            const Index x = coord(box, i, a);
            if (x > box.lo()[a] && active[i - box.stride(a)]) {
                const std::uint32_t other = uf.find(static_cast<std::uint32_t>(i - box.stride(a)));
                const std::uint8_t s = has_source[root] | has_source[other], t = has_target[root] | has_target[other];
                root = uf.unite(root, other);
                has_source[root] = s;
                has_target[root] = t;
            }
            if (x < box.hi()[a] && active[i + box.stride(a)]) {
                const std::uint32_t other = uf.find(static_cast<std::uint32_t>(i + box.stride(a)));
                const std::uint8_t s = has_source[root] | has_source[other], t = has_target[root] | has_target[other];
                root = uf.unite(root, other);
                has_source[root] = s;
                has_target[root] = t;
            }
        }
        if (has_source[root] && has_target[root]) return activation(i);
    }
    return kNever;
}

// ---------------------------------------------------------------------------

void write_pbm(std::ostream& out, const OccupancyGrid& grid) {
    const std::size_t rows = static_cast<std::size_t>(grid.box.extent(0));
    const std::size_t cols = grid.box.size() / rows;
    out << "P1\n" << cols << ' ' << rows << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) out << (c ? " " : "") << (grid.open[r * cols + c] ? '1' : '0');
        out << '\n';
    }
}

OccupancyGrid read_pbm(std::istream& in, const GridBox& box, double epsilon, double level, ModelTag tag) {
    auto token = [&]() {
        std::string t;
        while (in >> t) {
            if (t[0] != '#') return t;
            std::string rest;
            std::getline(in, rest);
        }
        throw std::runtime_error("truncated PBM stream");
    };
    if (token() != "P1") throw std::runtime_error("expected a plain PBM (P1) bitmap");
    const auto cols = std::stoull(token());
    const auto rows = std::stoull(token());
    if (rows != static_cast<std::size_t>(box.extent(0)) || rows * cols != box.size())
        throw std::runtime_error("PBM dimensions do not match the grid box");
    OccupancyGrid g{epsilon, box, std::vector<std::uint8_t>(box.size()), level, tag};
    // Plain PBM allows pixels without separating whitespace.
    std::size_t k = 0;
    char c;
    while (k < g.open.size() && in.get(c)) {
        if (c == '0' || c == '1') g.open[k++] = c == '1';
        else if (c == '#') {
            std::string rest;
            std::getline(in, rest);
        }
    }
    if (k != g.open.size()) throw std::runtime_error("truncated PBM pixel data");
    return g;
}

std::string grid_metadata_json(const OccupancyGrid& grid) {
    nlohmann::ordered_json j;
    j["epsilon"] = grid.epsilon;
    j["level"] = std::isnan(grid.level) ? nlohmann::ordered_json("per-cell") : nlohmann::ordered_json(grid.level);
    j["tag"] = to_string(grid.tag);
    j["lo"] = grid.box.lo();
    j["hi"] = grid.box.hi();
    j["open"] = grid.open_count();
    return j.dump(2);
}

OccupancyGrid read_grid(std::istream& pbm, const std::string& metadata_json) {
    const auto j = nlohmann::json::parse(metadata_json);
    const GridBox box(j.at("lo").get<std::vector<Index>>(), j.at("hi").get<std::vector<Index>>());
    const double level =
        j.at("level").is_number() ? j.at("level").get<double>() : std::numeric_limits<double>::quiet_NaN();
    return read_pbm(pbm, box, j.at("epsilon").get<double>(), level, parse_tag(j.at("tag").get<std::string>()));
}

}  // namespace gplab::perc
