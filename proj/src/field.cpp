#include "gplab/field.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <ostream>

#include "gplab/error.hpp"
#include "gplab/rng.hpp"

namespace gplab::field {

namespace {

// FFTW's planner is not reentrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

Index good_fft_size(Index n) {
    for (Index m = std::max<Index>(n, 1);; ++m) {
        Index r = m;
        for (Index p : {2, 3, 5, 7})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

std::uint64_t range_tag(double range) { return std::bit_cast<std::uint64_t>(range); }

void check_budget(std::size_t cells, std::size_t max_cells) {
    if (cells > max_cells)
        throw Error(ErrorKind::WindowTooLarge,
                    "window needs " + std::to_string(cells) + " cells, budget is " + std::to_string(max_cells));
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

template <class T>
std::unique_ptr<T[], FftwFree> fftw_buffer(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
    if (p == nullptr) throw std::bad_alloc();
    return std::unique_ptr<T[], FftwFree>(p);
}

}  // namespace

WhiteNoiseGrid sample_noise(const GridBox& cells, double spacing, std::uint64_t seed, std::uint64_t replica,
                            std::size_t max_cells) {
    if (!(spacing > 0.0) || cells.empty()) throw Error(ErrorKind::ConfigInvalid, "noise window must be nonempty, h > 0");
    check_budget(cells.size(), max_cells);
    WhiteNoiseGrid grid{spacing, cells, std::vector<double>(cells.size()), {seed, replica}};
    CounterRng rng({seed, replica, Substream::Noise, 0});
    rng.fill_normal(grid.values);
    return grid;
}

KernelStencil make_stencil(const kernel::KernelSpec& spec, double spacing, double support, double cutoff_range) {
    const int d = spec.dim();
    if (std::isfinite(cutoff_range)) support = std::min(support, cutoff_range / 2.0);
    KernelStencil st;
    st.spacing = spacing;
    st.radius = static_cast<Index>(std::ceil(support / spacing - 1e-12));
    const GridBox box = st.box(d);
    st.weights.resize(box.size());
    const double scale = std::pow(spacing, d / 2.0);
    const kernel::CutoffSpec cut{cutoff_range};
    for_each_point(box, [&](std::size_t idx, const LatticePoint& k) {
        double r2 = 0.0;
        for (Index v : k) r2 += static_cast<double>(v * v);
        const double r = spacing * std::sqrt(r2);
        double w = spec.radial(r);
        if (std::isfinite(cutoff_range)) w *= kernel::eval_cutoff_radial(cut, r);
        st.weights[idx] = scale * w;
    });
    return st;
}

struct FftConvolver::Impl {
    GridBox noise_box;
    std::vector<KernelStencil> stencils;
    std::vector<Index> shape;
    std::size_t real_size = 1;
    std::size_t complex_size = 1;
    std::unique_ptr<double[], FftwFree> real;
    std::unique_ptr<fftw_complex[], FftwFree> spectrum;
    std::unique_ptr<fftw_complex[], FftwFree> product;
    std::vector<std::unique_ptr<fftw_complex[], FftwFree>> stencil_spectra;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    ~Impl() {
        std::lock_guard lock(planner_mutex());
        if (forward != nullptr) fftw_destroy_plan(forward);
        if (backward != nullptr) fftw_destroy_plan(backward);
    }

    std::size_t real_index(const std::vector<Index>& wrapped) const {
        std::size_t idx = 0;
        for (std::size_t a = 0; a < shape.size(); ++a) idx = idx * static_cast<std::size_t>(shape[a]) + static_cast<std::size_t>(wrapped[a]);
        return idx;
    }
};

FftConvolver::FftConvolver(const GridBox& noise_box, std::vector<KernelStencil> stencils) : impl_(std::make_unique<Impl>()) {
    auto& m = *impl_;
    m.noise_box = noise_box;
    m.stencils = std::move(stencils);
    const int d = noise_box.dim();
    m.shape.resize(d);
    for (int a = 0; a < d; ++a) {
        m.shape[a] = good_fft_size(noise_box.extent(a));
        m.real_size *= static_cast<std::size_t>(m.shape[a]);
        m.complex_size *= static_cast<std::size_t>(a == d - 1 ? m.shape[a] / 2 + 1 : m.shape[a]);
    }
    m.real = fftw_buffer<double>(m.real_size);
    m.spectrum = fftw_buffer<fftw_complex>(m.complex_size);
    m.product = fftw_buffer<fftw_complex>(m.complex_size);
    std::vector<int> n(m.shape.begin(), m.shape.end());
    {
        std::lock_guard lock(planner_mutex());
        m.forward = fftw_plan_dft_r2c(d, n.data(), m.real.get(), m.spectrum.get(), FFTW_ESTIMATE);
        m.backward = fftw_plan_dft_c2r(d, n.data(), m.product.get(), m.real.get(), FFTW_ESTIMATE);
    }
    if (m.forward == nullptr || m.backward == nullptr) throw std::runtime_error("FFTW planning failed");

    for (const auto& st : m.stencils) {
        std::fill_n(m.real.get(), m.real_size, 0.0);
        const GridBox sbox = st.box(d);
        std::vector<Index> wrapped(d);
        for_each_point(sbox, [&](std::size_t idx, const LatticePoint& k) {
            for (int a = 0; a < d; ++a) wrapped[a] = ((k[a] % m.shape[a]) + m.shape[a]) % m.shape[a];
            m.real[m.real_index(wrapped)] += st.weights[idx];
        });
        auto spec = fftw_buffer<fftw_complex>(m.complex_size);
        fftw_execute_dft_r2c(m.forward, m.real.get(), spec.get());
        m.stencil_spectra.push_back(std::move(spec));
    }
}

FftConvolver::~FftConvolver() = default;
FftConvolver::FftConvolver(FftConvolver&&) noexcept = default;
FftConvolver& FftConvolver::operator=(FftConvolver&&) noexcept = default;

const GridBox& FftConvolver::noise_box() const { return impl_->noise_box; }
std::size_t FftConvolver::stencil_count() const { return impl_->stencils.size(); }
const std::vector<Index>& FftConvolver::transform_shape() const { return impl_->shape; }

void FftConvolver::load(std::span<const double> noise) {
    auto& m = *impl_;
    if (noise.size() != m.noise_box.size()) throw std::invalid_argument("FftConvolver::load: size mismatch");
    const int d = m.noise_box.dim();
    std::fill_n(m.real.get(), m.real_size, 0.0);
    // Copy rows along the last axis.
    const auto row = static_cast<std::size_t>(m.noise_box.extent(d - 1));
    std::vector<Index> offset(d, 0);
    for (std::size_t start = 0; start < noise.size(); start += row) {
        const LatticePoint p = m.noise_box.point(start);
        for (int a = 0; a < d; ++a) offset[a] = p[a] - m.noise_box.lo()[a];
        std::copy_n(noise.data() + start, row, m.real.get() + m.real_index(offset));
    }
    fftw_execute_dft_r2c(m.forward, m.real.get(), m.spectrum.get());
}

void FftConvolver::apply(std::size_t stencil, const GridBox& eval, std::span<double> out) {
    auto& m = *impl_;
    const int d = m.noise_box.dim();
    if (out.size() != eval.size()) throw std::invalid_argument("FftConvolver::apply: size mismatch");
    if (!m.noise_box.contains(eval.expanded(m.stencils.at(stencil).radius)))
        throw Error(ErrorKind::InsufficientPadding, "noise window does not cover the kernel support around the evaluation grid");
    const fftw_complex* ks = m.stencil_spectra[stencil].get();
    for (std::size_t i = 0; i < m.complex_size; ++i) {
        const double re = m.spectrum[i][0] * ks[i][0] - m.spectrum[i][1] * ks[i][1];
        const double im = m.spectrum[i][0] * ks[i][1] + m.spectrum[i][1] * ks[i][0];
        m.product[i][0] = re;
        m.product[i][1] = im;
    }
    fftw_execute_dft_c2r(m.backward, m.product.get(), m.real.get());
    const double norm = 1.0 / static_cast<double>(m.real_size);
    const auto row = static_cast<std::size_t>(eval.extent(d - 1));
    std::vector<Index> offset(d, 0);
    for (std::size_t start = 0; start < out.size(); start += row) {
        const LatticePoint p = eval.point(start);
        for (int a = 0; a < d; ++a) offset[a] = p[a] - m.noise_box.lo()[a];
        const double* src = m.real.get() + m.real_index(offset);
        for (std::size_t k = 0; k < row; ++k) out[start + k] = src[k] * norm;
    }
}

std::vector<double> convolve(const WhiteNoiseGrid& noise, const KernelStencil& stencil, const GridBox& eval) {
    if (!noise.cells.contains(eval.expanded(stencil.radius)))
        throw Error(ErrorKind::InsufficientPadding, "noise window does not cover the kernel support around the evaluation grid");
    FftConvolver conv(noise.cells, {stencil});
    conv.load(noise.values);
    std::vector<double> out(eval.size());
    conv.apply(0, eval, out);
    return out;
}

Index epsilon_ratio(double epsilon, double spacing) {
    const double ratio = epsilon / spacing;
    const auto m = static_cast<Index>(std::llround(ratio));
    if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio)
        throw Error(ErrorKind::ConfigInvalid, "epsilon must be a positive integer multiple of h", "geometry.epsilon");
    return m;
}

double snap_epsilon(double epsilon, double spacing) {
    const double m = std::floor(epsilon / spacing + 1e-9);
    return spacing * std::max(1.0, m);
}

double default_spacing(double epsilon) { return std::min(epsilon, 0.25); }

LatticePoint FieldBundle::eps_to_eval(const LatticePoint& j) const {
    LatticePoint i(j);
    for (auto& v : i) v *= eps_ratio;
    return i;
}

LatticePoint FieldBundle::representative(const LatticePoint& i) const {
    LatticePoint j(i.size());
    for (std::size_t a = 0; a < i.size(); ++a) j[a] = floor_div(2 * i[a] + eps_ratio, 2 * eps_ratio);
    return j;
}

namespace {

std::vector<double> subsample(const FieldBundle& b, const std::vector<double>& values) {
    std::vector<double> out(b.eps_box.size());
    for_each_point(b.eps_box, [&](std::size_t idx, const LatticePoint& j) { out[idx] = values[b.eval_box.linear(b.eps_to_eval(j))]; });
    return out;
}

GridBox eps_box_inside(const GridBox& eval, Index m) {
    std::vector<Index> lo(eval.dim());
    std::vector<Index> hi(eval.dim());
    for (int a = 0; a < eval.dim(); ++a) {
        lo[a] = ceil_div(eval.lo()[a], m);
        hi[a] = floor_div(eval.hi()[a], m);
    }
    return GridBox(std::move(lo), std::move(hi));
}

}  // namespace

std::vector<double> FieldBundle::truncated_on_eps() const {
    if (!has_truncated()) throw std::logic_error("bundle carries no truncated field");
    return subsample(*this, truncated);
}

std::vector<double> FieldBundle::full_on_eps() const {
    if (!has_full()) throw std::logic_error("bundle carries no full field");
    return subsample(*this, full);
}

std::vector<NoiseFlag> sample_flags(const GridBox& eps_box, double delta, double range, std::uint64_t seed,
                                    std::uint64_t replica) {
    std::vector<NoiseFlag> flags(eps_box.size(), NoiseFlag::Neutral);
    if (delta <= 0.0) return flags;
    CounterRng rng({seed, replica, Substream::Tdelta, range_tag(range)});
    const double half = 0.5 * delta;
    for (auto& f : flags) {
        const double u = rng.uniform();
        if (u < half)
            f = NoiseFlag::ForcedClosed;
        else if (u < delta)
            f = NoiseFlag::ForcedOpen;
    }
    return flags;
}

namespace {

GridBox checked_noise_box(const SamplerConfig& cfg, Index pad) {
    const GridBox box = cfg.eval_box.expanded(pad);
    check_budget(box.size(), cfg.max_cells);
    // The transform buffers are padded up to FFT-friendly sizes.
    std::size_t transformed = 1;
    for (int a = 0; a < box.dim(); ++a) transformed *= static_cast<std::size_t>(good_fft_size(box.extent(a)));
    check_budget(transformed, cfg.max_cells);
    return box;
}

}  // namespace

FieldSampler::FieldSampler(SamplerConfig config)
    : config_(std::move(config)),
      convolver_([&] {
          const auto& cfg = config_;
          if (cfg.eval_box.dim() != cfg.kernel.dim())
              throw Error(ErrorKind::ConfigInvalid, "evaluation window dimension differs from kernel dimension");
          if (cfg.eval_box.empty()) throw Error(ErrorKind::ConfigInvalid, "evaluation window is empty");
          if (!(cfg.spacing > 0.0)) throw Error(ErrorKind::ConfigInvalid, "h must be positive", "geometry.h");
          const double support = cfg.kernel.numeric_radius(cfg.radius_tol);
          std::vector<KernelStencil> stencils;
          for (const auto& model : cfg.models) {
              if (!(model.delta >= 0.0 && model.delta <= 1.0))
                  throw Error(ErrorKind::ConfigInvalid, "delta must lie in [0, 1]", "model.delta");
              if (model.full && full_stencil_ == static_cast<std::size_t>(-1)) {
                  full_stencil_ = stencils.size();
                  stencils.push_back(make_stencil(cfg.kernel, cfg.spacing, support));
              }
              if (model.truncated) {
                  if (!(model.range > 0.0)) throw Error(ErrorKind::ConfigInvalid, "range N must be positive", "model.N");
                  std::size_t shared = static_cast<std::size_t>(-1);
                  for (std::size_t k = 0; k < stencil_of_model_.size(); ++k)
                      if (cfg.models[k].truncated && cfg.models[k].range == model.range) shared = stencil_of_model_[k];
                  if (shared == static_cast<std::size_t>(-1)) {
                      shared = stencils.size();
                      stencils.push_back(make_stencil(cfg.kernel, cfg.spacing, support, model.range));
                  }
                  stencil_of_model_.push_back(shared);
              } else {
                  stencil_of_model_.push_back(static_cast<std::size_t>(-1));
              }
              eps_ratio_.push_back(epsilon_ratio(model.epsilon, cfg.spacing));
          }
          Index pad = 0;
          for (const auto& st : stencils) pad = std::max(pad, st.radius);
          noise_box_ = checked_noise_box(cfg, pad);
          return FftConvolver(noise_box_, std::move(stencils));
      }()),
      noise_(noise_box_.size()) {}

std::vector<FieldBundle> FieldSampler::sample(std::uint64_t seed, std::uint64_t replica) {
    CounterRng rng({seed, replica, Substream::Noise, 0});
    rng.fill_normal(noise_);
    convolver_.load(noise_);

    const auto& cfg = config_;
    const GridBox& eval = cfg.eval_box;
    std::vector<double> full;
    if (full_stencil_ != static_cast<std::size_t>(-1)) {
        full.resize(eval.size());
        convolver_.apply(full_stencil_, eval, full);
    }
    std::vector<FieldBundle> out;
    out.reserve(cfg.models.size());
    for (std::size_t k = 0; k < cfg.models.size(); ++k) {
        const auto& model = cfg.models[k];
        FieldBundle b;
        b.dim = eval.dim();
        b.spacing = cfg.spacing;
        b.range = model.range;
        b.epsilon = model.epsilon;
        b.delta = model.delta;
        b.eps_ratio = eps_ratio_[k];
        b.eval_box = eval;
        b.eps_box = eps_box_inside(eval, b.eps_ratio);
        b.lineage = {seed, replica};
        if (model.full) b.full = full;
        if (model.truncated) {
            // Models sharing a range share a stencil; reuse its output.
            const std::size_t st = stencil_of_model_[k];
            for (std::size_t prev = 0; prev < k; ++prev) {
                if (stencil_of_model_[prev] == st && out[prev].has_truncated()) {
                    b.truncated = out[prev].truncated;
                    break;
                }
            }
            if (b.truncated.empty()) {
                b.truncated.resize(eval.size());
                convolver_.apply(st, eval, b.truncated);
            }
        }
        b.flags = sample_flags(b.eps_box, model.delta, model.range, seed, replica);
        out.push_back(std::move(b));
    }
    return out;
}

FieldBundle make_bundle(const kernel::KernelSpec& spec, const kernel::CutoffSpec& cut, double epsilon, double delta,
                        const GridBox& eval_box, double spacing, std::uint64_t seed, std::uint64_t replica,
                        std::size_t max_cells) {
    SamplerConfig cfg;
    cfg.kernel = spec;
    cfg.spacing = spacing;
    cfg.eval_box = eval_box;
    cfg.models = {ModelRequest{cut.range, epsilon, delta, true, true}};
    cfg.max_cells = max_cells;
    FieldSampler sampler(std::move(cfg));
    return std::move(sampler.sample(seed, replica).front());
}

LocalGap local_gap(const FieldBundle& b) {
    if (!b.has_full() || !b.has_truncated()) throw std::logic_error("local_gap needs both f and f_N");
    const auto unit = static_cast<Index>(std::floor(1.0 / b.spacing + 1e-9));
    const GridBox ball = GridBox::symmetric(b.dim, unit);
    if (!b.eval_box.contains(ball)) throw Error(ErrorKind::WindowTooSmall, "evaluation grid does not cover B_1");
    LocalGap gap;
    for_each_point(ball, [&](std::size_t, const LatticePoint& i) {
        const std::size_t at = b.eval_box.linear(i);
        gap.truncation = std::max(gap.truncation, std::abs(b.full[at] - b.truncated[at]));
        const LatticePoint rep = b.eps_to_eval(b.representative(i));
        if (!b.eval_box.contains(rep)) throw Error(ErrorKind::WindowTooSmall, "ε-representative of a B_1 point lies outside the window");
        gap.discretisation = std::max(gap.discretisation, std::abs(b.truncated[at] - b.truncated[b.eval_box.linear(rep)]));
    });
    return gap;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

constexpr char kMagic[4] = {'G', 'P', 'L', 'B'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    std::array<char, sizeof(T)> bytes{};
    if (!in.read(bytes.data(), sizeof(T))) throw std::runtime_error("truncated bundle stream");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

void put_box(std::ostream& out, const GridBox& box) {
    for (int a = 0; a < box.dim(); ++a) {
        put<std::int64_t>(out, box.lo()[a]);
        put<std::int64_t>(out, box.hi()[a]);
    }
}

GridBox get_box(std::istream& in, int d) {
    std::vector<Index> lo(d);
    std::vector<Index> hi(d);
    for (int a = 0; a < d; ++a) {
        lo[a] = get<std::int64_t>(in);
        hi[a] = get<std::int64_t>(in);
    }
    return GridBox(std::move(lo), std::move(hi));
}

}  // namespace

void write_bundle(std::ostream& out, const FieldBundle& b) {
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(b.dim));
    put_box(out, b.eval_box);
    put_box(out, b.eps_box);
    put<double>(out, b.spacing);
    put<double>(out, b.epsilon);
    put<double>(out, b.range);
    put<double>(out, b.delta);
    put<std::int64_t>(out, b.eps_ratio);
    put<std::uint64_t>(out, b.lineage.seed);
    put<std::uint64_t>(out, b.lineage.replica);
    put<std::uint8_t>(out, b.has_full() ? 1 : 0);
    put<std::uint8_t>(out, b.has_truncated() ? 1 : 0);
    for (double v : b.full) put<double>(out, v);
    for (double v : b.truncated) put<double>(out, v);
    for (NoiseFlag f : b.flags) put<std::uint8_t>(out, static_cast<std::uint8_t>(f));
}

FieldBundle read_bundle(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a bundle stream");
    if (get<std::uint32_t>(in) != kVersion) throw std::runtime_error("unsupported bundle version");
    FieldBundle b;
    b.dim = static_cast<int>(get<std::uint32_t>(in));
    b.eval_box = get_box(in, b.dim);
    b.eps_box = get_box(in, b.dim);
    b.spacing = get<double>(in);
    b.epsilon = get<double>(in);
    b.range = get<double>(in);
    b.delta = get<double>(in);
    b.eps_ratio = get<std::int64_t>(in);
    b.lineage.seed = get<std::uint64_t>(in);
    b.lineage.replica = get<std::uint64_t>(in);
    const bool has_full = get<std::uint8_t>(in) != 0;
    const bool has_truncated = get<std::uint8_t>(in) != 0;
    if (has_full) {
        b.full.resize(b.eval_box.size());
        for (double& v : b.full) v = get<double>(in);
    }
    if (has_truncated) {
        b.truncated.resize(b.eval_box.size());
        for (double& v : b.truncated) v = get<double>(in);
    }
    b.flags.resize(b.eps_box.size());
    for (auto& f : b.flags) {
        const auto raw = get<std::uint8_t>(in);
        if (raw > 2) throw std::runtime_error("invalid noise flag in bundle stream");
        f = static_cast<NoiseFlag>(raw);
    }
    return b;
}

std::string bundle_metadata_json(const FieldBundle& b) {
    nlohmann::ordered_json j;
    j["dim"] = b.dim;
    j["h"] = b.spacing;
    j["epsilon"] = b.epsilon;
    j["eps_ratio"] = b.eps_ratio;
    j["N"] = std::isfinite(b.range) ? nlohmann::ordered_json(b.range) : nlohmann::ordered_json("inf");
    j["delta"] = b.delta;
    j["eval_lo"] = b.eval_box.lo();
    j["eval_hi"] = b.eval_box.hi();
    j["eps_lo"] = b.eps_box.lo();
    j["eps_hi"] = b.eps_box.hi();
    j["seed"] = b.lineage.seed;
    j["replica"] = b.lineage.replica;
    j["fields"] = {{"f", b.has_full()}, {"f_N", b.has_truncated()}};
    j["layout"] = "little-endian f64 payloads, row-major, last axis fastest; T flags as u8 (0 neutral, 1 open, 2 closed)";
    return j.dump(2);
}

void write_bundle_csv(std::ostream& out, const FieldBundle& b) {
    for (int a = 0; a < b.dim; ++a) out << "x" << a + 1 << ',';
    out << "f,f_N,f_N_eps\n";
    out.precision(17);
    for_each_point(b.eval_box, [&](std::size_t idx, const LatticePoint& i) {
        for (int a = 0; a < b.dim; ++a) out << static_cast<double>(i[a]) * b.spacing << ',';
        if (b.has_full()) out << b.full[idx];
        out << ',';
        if (b.has_truncated()) {
            out << b.truncated[idx] << ',';
            const LatticePoint rep = b.eps_to_eval(b.representative(i));
            if (b.eval_box.contains(rep)) out << b.truncated[b.eval_box.linear(rep)];
        } else {
            out << ',';
        }
        out << '\n';
    });
}

}  // namespace gplab::field
