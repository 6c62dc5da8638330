#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gplab {

using Index = std::int64_t;
using Point = std::vector<double>;
using LatticePoint = std::vector<Index>;

constexpr Index floor_div(Index a, Index b) {
    Index q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

constexpr Index ceil_div(Index a, Index b) { return -floor_div(-a, b); }

// Axis-aligned box of integer lattice coordinates, bounds inclusive.
// Flattening is row-major: the last axis varies fastest.
class GridBox {
  public:
    GridBox() = default;
    GridBox(std::vector<Index> lo, std::vector<Index> hi);

    static GridBox symmetric(int dim, Index half_width);

    int dim() const { return static_cast<int>(lo_.size()); }
    const std::vector<Index>& lo() const { return lo_; }
    const std::vector<Index>& hi() const { return hi_; }
    Index extent(int axis) const { return hi_[axis] - lo_[axis] + 1; }
    std::size_t size() const;
    bool empty() const { return size() == 0; }

    bool contains(const LatticePoint& p) const;
    bool contains(const GridBox& inner) const;

    std::size_t linear(const LatticePoint& p) const;
    LatticePoint point(std::size_t linear) const;
    // Stride of one step along `axis` in the linear layout.
    std::size_t stride(int axis) const;

    GridBox expanded(Index cells) const;

    friend bool operator==(const GridBox&, const GridBox&) = default;

  private:
    std::vector<Index> lo_;
    std::vector<Index> hi_;
};

// Calls fn(linear_index, point) for every point of the box in linear order.
template <class Fn>
void for_each_point(const GridBox& box, Fn&& fn) {
    const std::size_t n = box.size();
    if (n == 0) return;
    LatticePoint p = box.lo();
    const int d = box.dim();
    for (std::size_t i = 0; i < n; ++i) {
        fn(i, static_cast<const LatticePoint&>(p));
        for (int a = d - 1; a >= 0; --a) {
            if (++p[a] <= box.hi()[a]) break;
            p[a] = box.lo()[a];
        }
    }
}

}  // namespace gplab
