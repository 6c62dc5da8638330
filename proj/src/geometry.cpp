#include "gplab/geometry.hpp"

#include <stdexcept>

namespace gplab {

GridBox::GridBox(std::vector<Index> lo, std::vector<Index> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size()) throw std::invalid_argument("GridBox: dimension mismatch");
}

GridBox GridBox::symmetric(int dim, Index half_width) {
    return GridBox(std::vector<Index>(dim, -half_width), std::vector<Index>(dim, half_width));
}

std::size_t GridBox::size() const {
    if (lo_.empty()) return 0;
    std::size_t n = 1;
    for (int a = 0; a < dim(); ++a) {
        if (hi_[a] < lo_[a]) return 0;
        n *= static_cast<std::size_t>(extent(a));
    }
    return n;
}

bool GridBox::contains(const LatticePoint& p) const {
    for (int a = 0; a < dim(); ++a)
        if (p[a] < lo_[a] || p[a] > hi_[a]) return false;
    return true;
}

bool GridBox::contains(const GridBox& inner) const {
    if (inner.dim() != dim()) return false;
    for (int a = 0; a < dim(); ++a)
        if (inner.lo_[a] < lo_[a] || inner.hi_[a] > hi_[a]) return false;
    return true;
}

std::size_t GridBox::linear(const LatticePoint& p) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx = idx * static_cast<std::size_t>(extent(a)) + static_cast<std::size_t>(p[a] - lo_[a]);
    return idx;
}

LatticePoint GridBox::point(std::size_t linear) const {
    LatticePoint p(dim());
    for (int a = dim() - 1; a >= 0; --a) {
        const auto e = static_cast<std::size_t>(extent(a));
        p[a] = lo_[a] + static_cast<Index>(linear % e);
        linear /= e;
    }
    return p;
}

std::size_t GridBox::stride(int axis) const {
    std::size_t s = 1;
    for (int a = dim() - 1; a > axis; --a) s *= static_cast<std::size_t>(extent(a));
    return s;
}

GridBox GridBox::expanded(Index cells) const {
    auto lo = lo_;
    auto hi = hi_;
    for (auto& v : lo) v -= cells;
    for (auto& v : hi) v += cells;
    return GridBox(std::move(lo), std::move(hi));
}

}  // namespace gplab
