#pragma once

#include <array>
#include <cmath>

#include "velocity_space.hpp"

namespace boltzgap {

// Tensor Lagrange interpolation on the uniform lattice.
// order 1: 2 nodes per axis, 2: 3 nodes (exact on quadratics), 3: 4 nodes.
struct AxisStencil {
    int base = 0;
    int count = 0;
    std::array<double, 4> w{};
};

inline AxisStencil axis_stencil(int order, double xi) {
    AxisStencil s;
    if (order == 1) {
        double c = std::floor(xi), t = xi - c;
        s.base = int(c);
        s.count = 2;
        s.w = {1 - t, t, 0, 0};
    } else if (order == 2) {
        double c = std::nearbyint(xi), t = xi - c;
        s.base = int(c) - 1;
        s.count = 3;
        s.w = {0.5 * t * (t - 1), 1 - t * t, 0.5 * t * (t + 1), 0};
    } else if (order == 3) {
        double c = std::floor(xi), t = xi - c;
        s.base = int(c) - 1;
        s.count = 4;
        s.w = {-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2, -(t + 1) * t * (t - 2) / 2,
               (t + 1) * t * (t - 1) / 6};
    } else {
        throw DomainError("interpolation order must be 1, 2 or 3");
    }
    return s;
}

// Visit (node index, weight) pairs of the stencil around the physical point x.
// Nodes outside the box are dropped (zero extension).
template <class F>
void for_each_stencil_node(const VelocityGrid& g, int order, const Vec& x, F&& f) {
    const double h = g.spacing(), R = g.extent();
    const int n = g.points_per_axis(), N = g.dimension();
    std::array<AxisStencil, 3> s;
    for (int d = 0; d < N; ++d) s[d] = axis_stencil(order, (x[d] + R) / h);
    if (N == 2) {
        for (int a = 0; a < s[0].count; ++a) {
            int ia = s[0].base + a;
            if (ia < 0 || ia >= n) continue;
            for (int b = 0; b < s[1].count; ++b) {
                int ib = s[1].base + b;
                if (ib < 0 || ib >= n) continue;
                f(g.index(ia, ib), s[0].w[a] * s[1].w[b]);
            }
        }
        return;
    }
    for (int a = 0; a < s[0].count; ++a) {
        int ia = s[0].base + a;
        if (ia < 0 || ia >= n) continue;
        for (int b = 0; b < s[1].count; ++b) {
            int ib = s[1].base + b;
            if (ib < 0 || ib >= n) continue;
            double wab = s[0].w[a] * s[1].w[b];
            for (int c = 0; c < s[2].count; ++c) {
                int ic = s[2].base + c;
                if (ic < 0 || ic >= n) continue;
                f(g.index(ia, ib, ic), wab * s[2].w[c]);
            }
        }
    }
}

inline double interpolate(const VelocityGrid& g, const Field& f, const Vec& x, int order = 2) {
    if (!g.uniform()) throw DomainError("interpolation needs a uniform grid");
    double acc = 0;
    for_each_stencil_node(g, order, x, [&](std::size_t i, double w) { acc += w * f[static_cast<Eigen::Index>(i)]; });
    return acc;
}

}  // namespace boltzgap
