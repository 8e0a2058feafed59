#pragma once

#include <cmath>
#include <vector>

#include "core.hpp"

namespace boltzgap {

struct Rule1D {
    std::vector<double> x, w;
    std::size_t size() const { return x.size(); }
};

// Gauss-Legendre on [a, b], Newton iteration on P_n.
inline Rule1D gauss_legendre(int n, double a = -1.0, double b = 1.0) {
    if (n < 1) throw DomainError("gauss_legendre: order must be positive");
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int k = 1; k <= n; ++k) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double wi = 2.0 / ((1 - z * z) * dp * dp);
        r.x[i] = -z;
        r.x[n - 1 - i] = z;
        r.w[i] = r.w[n - 1 - i] = wi;
    }
    double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
        r.x[i] = c + h * r.x[i];
        r.w[i] *= h;
    }
    return r;
}

// Composite Gauss on [-1, 1] with panels shrinking geometrically toward
// both endpoints (ratio q, `levels` refinements per side).
inline Rule1D graded_gauss(int per_panel, int levels, double q = 0.5) {
    std::vector<double> cuts{-1.0};
    double len = 1.0;
    std::vector<double> left;
    for (int l = 0; l < levels; ++l) {
        len *= q;
        left.push_back(-1.0 + len);
    }
    for (auto it = left.rbegin(); it != left.rend(); ++it) cuts.push_back(*it);
    cuts.push_back(0.0);
    for (auto c : left) cuts.push_back(-c);
    cuts.push_back(1.0);
    Rule1D r;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        auto g = gauss_legendre(per_panel, cuts[p], cuts[p + 1]);
        r.x.insert(r.x.end(), g.x.begin(), g.x.end());
        r.w.insert(r.w.end(), g.w.begin(), g.w.end());
    }
    return r;
}

template <class F>
double integrate(const Rule1D& r, F&& f) {
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * f(r.x[i]);
    return s;
}

}  // namespace boltzgap
