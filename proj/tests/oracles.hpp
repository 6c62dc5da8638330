#pragma once

// Independent reference implementations used to check the library. These are
// deliberately naive: direct sums, breadth-first search, explicit loops.

#include <cmath>
#include <deque>
#include <vector>

#include "gplab/field.hpp"
#include "gplab/geometry.hpp"

namespace oracle {

using gplab::GridBox;
using gplab::Index;
using gplab::LatticePoint;

// Direct O(n m) convolution sum over the stencil.
inline std::vector<double> direct_convolve(const gplab::field::WhiteNoiseGrid& noise,
                                           const gplab::field::KernelStencil& st, const GridBox& eval) {
    const int d = eval.dim();
    const GridBox sbox = st.box(d);
    std::vector<double> out(eval.size(), 0.0);
    gplab::for_each_point(eval, [&](std::size_t i, const LatticePoint& x) {
        long double acc = 0.0L;
        gplab::for_each_point(sbox, [&](std::size_t k, const LatticePoint& off) {
            LatticePoint y(x);
            for (int a = 0; a < d; ++a) y[a] -= off[a];
            acc += static_cast<long double>(st.weights[k]) * noise.values[noise.cells.linear(y)];
        });
        out[i] = static_cast<double>(acc);
    });
    return out;
}

// Components of open cells in a 2d grid by BFS; returns a label per cell
// (-1 for closed), labels numbered in order of first appearance.
inline std::vector<int> bfs_components(const std::vector<bool>& open, int nx, int ny) {
    std::vector<int> lab(open.size(), -1);
    int next = 0;
    for (int s = 0; s < nx * ny; ++s) {
        if (!open[s] || lab[s] >= 0) continue;
        std::deque<int> q{s};
        lab[s] = next;
        while (!q.empty()) {
            const int c = q.front();
            q.pop_front();
            const int x = c / ny, y = c % ny;
            const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (auto& p : nb) {
                if (p[0] < 0 || p[0] >= nx || p[1] < 0 || p[1] >= ny) continue;
                const int t = p[0] * ny + p[1];
                if (open[t] && lab[t] < 0) {
                    lab[t] = next;
                    q.push_back(t);
                }
            }
        }
        ++next;
    }
    return lab;
}

// Two labelings describe the same partition.
inline bool same_partition(const std::vector<int>& a, const std::vector<std::int64_t>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] < 0) != (b[i] < 0)) return false;
        if (a[i] < 0) continue;
        for (std::size_t j = 0; j < i; ++j)
            if (a[j] >= 0 && ((a[j] == a[i]) != (b[j] == b[i]))) return false;
    }
    return true;
}

}  // namespace oracle

namespace oracle {

// Flood fill from every open source cell of a 2d grid over open cells of the
// domain; true when some target cell is reached. Sources/targets/domain are
// predicates on integer coordinates.
template <class Src, class Tgt, class Dom>
bool path_exists(const std::vector<bool>& open, int x0, int y0, int nx, int ny, Src is_source, Tgt is_target,
                 Dom in_domain) {
    std::vector<char> seen(open.size(), 0);
    std::deque<std::pair<int, int>> q;
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y)
            if (open[x * ny + y] && in_domain(x0 + x, y0 + y) && is_source(x0 + x, y0 + y)) {
                seen[x * ny + y] = 1;
                q.emplace_back(x, y);
            }
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        if (is_target(x0 + x, y0 + y)) return true;
        const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (auto& p : nb) {
            if (p[0] < 0 || p[0] >= nx || p[1] < 0 || p[1] >= ny) continue;
            const int t = p[0] * ny + p[1];
            if (open[t] && !seen[t] && in_domain(x0 + p[0], y0 + p[1])) {
                seen[t] = 1;
                q.emplace_back(p[0], p[1]);
            }
        }
    }
    return false;
}

}  // namespace oracle
