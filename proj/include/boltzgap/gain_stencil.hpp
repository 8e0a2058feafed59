#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "interpolation.hpp"
#include "velocity_space.hpp"

namespace boltzgap {

// For a lattice relative velocity u = v - v_*, the gain-side post-collisional
// points v', v'_* sit at fixed lattice offsets from v. Summing the sphere
// quadrature against the interpolation stencils of those points gives one
// aggregated stencil S_u(d), so that
//   sum_k w_k b_k [h(v') + h(v'_*)] = sum_d S_u(d) h(v + d h).
struct GainStencil {
    struct Entry {
        std::int32_t lin;
        std::int16_t d[3];
        double w;
    };
    std::vector<Entry> entries;
    int lo[3]{0, 0, 0}, hi[3]{0, 0, 0};
};

enum class GainPoints { both, prime_only };

class GainStencilTable {
public:
    GainStencilTable(const VelocityGrid& g, const SphereQuadrature& sq, std::function<double(double)> b, int order,
                     GainPoints points = GainPoints::both)
        : g_(g), sq_(sq), order_(order), points_(points) {
        if (!g.uniform()) throw DomainError("gain stencils need a uniform grid");
        if (sq.dimension != g.dimension()) throw DomainError("sphere quadrature dimension does not match grid");
        bw_.resize(sq.size());
        for (std::size_t k = 0; k < sq.size(); ++k) bw_[k] = sq.w[k] * b(sq.cos_t[k]);
        int n = g.points_per_axis();
        span_ = 2 * n - 1;
        std::size_t count = g.dimension() == 3 ? std::size_t(span_) * span_ * span_ : std::size_t(span_) * span_;
        table_.resize(count);
    }

    // sum_k w_k b_k
    double angular_mass() const {
        double s = 0;
        for (double x : bw_) s += x;
        return s;
    }

    const GainStencil& get(int ux, int uy, int uz = 0) {
        int n = g_.points_per_axis();
        std::size_t key = g_.dimension() == 3
                              ? (std::size_t(ux + n - 1) * span_ + (uy + n - 1)) * span_ + (uz + n - 1)
                              : std::size_t(ux + n - 1) * span_ + (uy + n - 1);
        auto& slot = table_[key];
        if (!slot) {
            slot = std::make_unique<GainStencil>(build(ux, uy, uz));
            stored_ += slot->entries.size();
        }
        return *slot;
    }

    void release(int ux, int uy, int uz = 0) {
        int n = g_.points_per_axis();
        std::size_t key = g_.dimension() == 3
                              ? (std::size_t(ux + n - 1) * span_ + (uy + n - 1)) * span_ + (uz + n - 1)
                              : std::size_t(ux + n - 1) * span_ + (uy + n - 1);
        if (table_[key]) {
            stored_ -= table_[key]->entries.size();
            table_[key].reset();
        }
    }

    std::size_t stored_entries() const { return stored_; }

    GainStencil build(int ux, int uy, int uz) const {
        const int N = g_.dimension();
        Vec ul{double(ux), double(uy), double(N == 3 ? uz : 0)};
        double ulen = norm(ul);
        GainStencil st;
        if (ulen == 0) return st;
        const int D = int(std::ceil(ulen)) + 3;
        const int side = 2 * D + 1;
        std::vector<double> cube(N == 3 ? std::size_t(side) * side * side : std::size_t(side) * side, 0.0);
        std::vector<Vec> sig;
        sq_.directions((1.0 / ulen) * ul, sig);
        auto deposit = [&](const Vec& xi, double c) {
            AxisStencil s[3];
            for (int d = 0; d < N; ++d) s[d] = axis_stencil(order_, xi[d]);
            if (N == 2) {
                for (int a = 0; a < s[0].count; ++a)
                    for (int b = 0; b < s[1].count; ++b)
                        cube[std::size_t(s[0].base + a + D) * side + (s[1].base + b + D)] += c * s[0].w[a] * s[1].w[b];
                return;
            }
            for (int a = 0; a < s[0].count; ++a)
                for (int b = 0; b < s[1].count; ++b) {
                    double wab = c * s[0].w[a] * s[1].w[b];
                    std::size_t row = (std::size_t(s[0].base + a + D) * side + (s[1].base + b + D)) * side;
                    for (int q = 0; q < s[2].count; ++q) cube[row + s[2].base + q + D] += wab * s[2].w[q];
                }
        };
        for (std::size_t k = 0; k < sq_.size(); ++k) {
            if (bw_[k] == 0) continue;
            // offsets in lattice units: o = (-u + |u| sigma)/2 and -u - o
            Vec o = 0.5 * ((ulen * sig[k]) - ul);
            deposit(o, bw_[k]);
            if (points_ == GainPoints::both) deposit(Vec{0, 0, 0} - ul - o, bw_[k]);
        }
        auto strides = g_.strides();
        for (int d = 0; d < 3; ++d) st.lo[d] = st.hi[d] = 0;
        bool first = true;
        for (std::size_t idx = 0; idx < cube.size(); ++idx) {
            double w = cube[idx];
            if (w == 0) continue;
            int c[3] = {0, 0, 0};
            if (N == 3) {
                c[0] = int(idx / (side * side)) - D;
                c[1] = int((idx / side) % side) - D;
                c[2] = int(idx % side) - D;
            } else {
                c[0] = int(idx / side) - D;
                c[1] = int(idx % side) - D;
            }
            GainStencil::Entry e;
            e.lin = std::int32_t(c[0] * strides[0] + c[1] * strides[1] + c[2] * strides[2]);
            for (int d = 0; d < 3; ++d) {
                e.d[d] = std::int16_t(c[d]);
                if (first || c[d] < st.lo[d]) st.lo[d] = c[d];
                if (first || c[d] > st.hi[d]) st.hi[d] = c[d];
            }
            first = false;
            e.w = w;
            st.entries.push_back(e);
        }
        return st;
    }

    const VelocityGrid& grid() const { return g_; }
    int order() const { return order_; }

private:
    const VelocityGrid& g_;
    const SphereQuadrature& sq_;
    int order_;
    GainPoints points_;
    std::vector<double> bw_;
    int span_;
    std::vector<std::unique_ptr<GainStencil>> table_;
    std::size_t stored_ = 0;
};

// row[p + d] += c * S(d) for every in-box target; p is the lattice position of the row node.
inline void apply_stencil(const GainStencil& s, const VelocityGrid& g, const std::array<int, 3>& p, std::size_t lin,
                          double c, double* row) {
    const int n = g.points_per_axis(), N = g.dimension();
    bool inside = true;
    for (int d = 0; d < N; ++d)
        if (p[d] + s.lo[d] < 0 || p[d] + s.hi[d] >= n) inside = false;
    if (inside) {
        double* base = row + lin;
        for (const auto& e : s.entries) base[e.lin] += c * e.w;
        return;
    }
    for (const auto& e : s.entries) {
        bool ok = true;
        for (int d = 0; d < N; ++d) {
            int q = p[d] + e.d[d];
            if (q < 0 || q >= n) ok = false;
        }
        if (ok) row[std::ptrdiff_t(lin) + e.lin] += c * e.w;
    }
}

}  // namespace boltzgap
