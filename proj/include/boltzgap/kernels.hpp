#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core.hpp"
#include "quadrature.hpp"

namespace boltzgap {

// b as a function of cos(theta) on [-1, 1].
struct AngularProfile {
    std::string kind = "hard_sphere";
    std::function<double(double)> fn;
    std::vector<double> table;  // samples on a uniform cos(theta) grid, when tabulated

    double operator()(double x) const { return fn(x); }

    static AngularProfile constant(double c = 1.0) {
        AngularProfile p;
        p.kind = "hard_sphere";
        p.fn = [c](double) { return c; };
        return p;
    }

    static AngularProfile tabulated(std::vector<double> values) {
        if (values.size() < 2) throw DomainError("angular table needs at least two samples");
        for (double v : values)
            if (!(v >= 0) || !std::isfinite(v)) throw DomainError("angular table has a negative or non-finite entry");
        AngularProfile p;
        p.kind = "tabulated";
        p.table = std::move(values);
        auto t = p.table;
        p.fn = [t](double x) {
            double s = (std::clamp(x, -1.0, 1.0) + 1.0) * 0.5 * (t.size() - 1);
            std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(s), t.size() - 2);
            double f = s - k;
            return (1 - f) * t[k] + f * t[k + 1];
        };
        return p;
    }

    static AngularProfile custom(std::function<double(double)> f, std::string kind = "custom") {
        AngularProfile p;
        p.kind = std::move(kind);
        p.fn = std::move(f);
        return p;
    }
};

// |S^{N-2}| int_0^pi b(cos t) sin^{N-2} t dt
inline double angular_integral(const std::function<double(double)>& b, int dim, int order = 64) {
    auto r = gauss_legendre(order, 0.0, pi);
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * b(std::cos(r.x[i])) * std::pow(std::sin(r.x[i]), dim - 2);
    return sphere_area(dim - 2) * s;
}

struct CollisionKernelSpec {
    int dimension = 3;
    double gamma = 1.0;
    double c_phi = 1.0;
    AngularProfile angular = AngularProfile::constant();
    double scale = 1.0;  // applied to the raw profile
    double c_b = 0, C_b = 0;
    bool normalized = false;

    double phi(double z) const {
        if (z < 0) throw DomainError("phi: negative relative speed");
        return c_phi * std::pow(z, gamma);
    }
    double b(double x) const { return scale * angular(x); }
    double ell_b(int order = 64) const {
        return angular_integral([this](double x) { return b(x); }, dimension, order);
    }
};

inline CollisionKernelSpec make_kernel(int dimension, double gamma, double c_phi, AngularProfile profile,
                                       bool normalize = true) {
    if (dimension != 2 && dimension != 3) throw DomainError("dimension must be 2 or 3");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in (0, 1] (hard potentials)");
    if (!(c_phi > 0.0) || !std::isfinite(c_phi)) throw DomainError("c_phi must be positive");
    CollisionKernelSpec k;
    k.dimension = dimension;
    k.gamma = gamma;
    k.c_phi = c_phi;
    k.angular = std::move(profile);
    double lo = INFINITY, hi = 0;
    for (int i = 0; i <= 2000; ++i) {
        double v = k.angular(-1.0 + i * 1e-3);
        if (!(v >= 0) || !std::isfinite(v)) throw DomainError("angular profile must be nonnegative and finite");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= 0) throw DomainError("angular profile vanishes identically");
    double ell = k.ell_b();
    if (normalize) {
        k.scale = 1.0 / ell;
        k.normalized = true;
    }
    k.c_b = lo * k.scale;
    k.C_b = hi * k.scale;
    return k;
}

// Constant b with ell_b = 1.
inline CollisionKernelSpec hard_sphere_kernel(int dimension = 3, double c_phi = 1.0) {
    return make_kernel(dimension, 1.0, c_phi, AngularProfile::constant(), true);
}

// c_b C_Phi (gamma/8)^{gamma/2} e^{-gamma/2} pi / 24
inline double explicit_gap_lower_bound(double c_b, double c_phi, double gamma) {
    return c_b * c_phi * std::pow(gamma / 8.0, gamma / 2.0) * std::exp(-gamma / 2.0) * pi / 24.0;
}
inline double explicit_gap_lower_bound(const CollisionKernelSpec& k) {
    return explicit_gap_lower_bound(k.c_b, k.c_phi, k.gamma);
}

// Smooth bump exp(-1/(1-x^2)) and its normalized radial companion.
class Mollifier {
public:
    explicit Mollifier(int dimension = 3, int order = 64) : dim_(dimension), rule_(gauss_legendre(order)) {
        double s = integrate(rule_, raw);
        c1_ = 1.0 / s;
        auto half = gauss_legendre(order, 0.0, 1.0);
        double m = integrate(half, [&](double r) { return raw(r) * std::pow(r, dim_ - 1); });
        cN_ = 1.0 / (sphere_area(dim_ - 1) * m);
        rhalf_ = half;
    }

    static double raw(double x) { return std::abs(x) < 1.0 ? std::exp(-1.0 / (1.0 - x * x)) : 0.0; }
    double theta(double x) const { return c1_ * raw(x); }
    double theta_radial(double r) const { return cN_ * raw(r); }

    // int_{-1}^{s} theta
    double cdf(double s) const {
        if (s <= -1.0) return 0.0;
        if (s >= 1.0) return 1.0;
        double h = 0.5 * (s + 1.0), c = 0.5 * (s - 1.0);
        double acc = 0;
        for (std::size_t i = 0; i < rule_.size(); ++i) acc += rule_.w[i] * h * theta(c + h * rule_.x[i]);
        return acc;
    }

    // (Theta_{d^2} * 1_{[-1+2d^2, 1-2d^2]})(x)
    double angular_window(double x, double delta) const {
        double eps = delta * delta;
        double a = -1.0 + 2 * eps, b = 1.0 - 2 * eps;
        if (a >= b) return 0.0;  // empty interval once delta >= 1/sqrt(2)
        return cdf((x - a) / eps) - cdf((x - b) / eps);
    }

    // (Theta~_delta * 1_{|.| <= 1/delta})(v) with |v| = r
    double velocity_window(double r, double delta) const {
        double R = 1.0 / delta;
        if (r <= R - delta) return 1.0;
        if (r >= R + delta) return 0.0;
        double acc = 0;
        for (std::size_t i = 0; i < rhalf_.size(); ++i) {
            double rho = rhalf_.x[i];
            double c = (r * r + delta * delta * rho * rho - R * R) / (2 * r * delta * rho);
            c = std::clamp(c, -1.0, 1.0);
            double cap = dim_ == 3 ? 2 * pi * (1 - c) : 2 * std::acos(c);
            acc += rhalf_.w[i] * theta_radial(rho) * std::pow(rho, dim_ - 1) * cap;
        }
        return acc;
    }

    int dimension() const { return dim_; }

private:
    int dim_;
    Rule1D rule_, rhalf_;
    double c1_ = 1, cN_ = 1;
};

// b_delta as a callable on cos(theta).
inline std::function<double(double)> mollified_angular(const CollisionKernelSpec& k, double delta,
                                                        std::shared_ptr<const Mollifier> mol = nullptr) {
    if (!(delta > 0 && delta < 1)) throw DomainError("delta must lie in (0, 1)");
    if (!mol) mol = std::make_shared<Mollifier>(k.dimension);
    return [k, delta, mol](double x) { return mol->angular_window(x, delta) * k.b(x); };
}

}  // namespace boltzgap
