#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core.hpp"
#include "quadrature.hpp"

namespace boltzgap {

using Field = Eigen::VectorXd;

class VelocityGrid {
public:
    enum class Rule { trapezoid, gauss };

    VelocityGrid(int dimension, int points_per_axis, double extent, Rule rule = Rule::trapezoid)
        : dim_(dimension), n_(points_per_axis), R_(extent), rule_(rule) {
        if (dim_ != 2 && dim_ != 3) throw DomainError("grid dimension must be 2 or 3");
        if (n_ < 3) throw DomainError("grid needs at least 3 points per axis");
        if (!(R_ > 0) || !std::isfinite(R_)) throw DomainError("grid extent must be positive");
        if (rule_ == Rule::trapezoid) {
            h_ = 2 * R_ / (n_ - 1);
            for (int i = 0; i < n_; ++i) {
                ax_.push_back(-R_ + i * h_);
                aw_.push_back(i == 0 || i == n_ - 1 ? 0.5 * h_ : h_);
            }
        } else {
            auto g = gauss_legendre(n_, -R_, R_);
            ax_ = g.x;
            aw_ = g.w;
            h_ = 0;
        }
        std::size_t N = size();
        nodes_.resize(N);
        w_.resize(static_cast<Eigen::Index>(N));
        for (std::size_t i = 0; i < N; ++i) {
            auto c = coords(i);
            Vec v{0, 0, 0};
            double w = 1;
            for (int d = 0; d < dim_; ++d) {
                v[d] = ax_[c[d]];
                w *= aw_[c[d]];
            }
            nodes_[i] = v;
            w_[static_cast<Eigen::Index>(i)] = w;
        }
    }

    int dimension() const { return dim_; }
    int points_per_axis() const { return n_; }
    double extent() const { return R_; }
    Rule rule() const { return rule_; }
    bool uniform() const { return rule_ == Rule::trapezoid; }
    double spacing() const { return h_; }
    std::size_t size() const { return dim_ == 3 ? std::size_t(n_) * n_ * n_ : std::size_t(n_) * n_; }

    const Vec& node(std::size_t i) const { return nodes_[i]; }
    double weight(std::size_t i) const { return w_[static_cast<Eigen::Index>(i)]; }
    const Field& weights() const { return w_; }
    const std::vector<double>& axis() const { return ax_; }

    // last axis fastest
    std::array<int, 3> coords(std::size_t i) const {
        if (dim_ == 3) return {int(i / (n_ * n_)), int((i / n_) % n_), int(i % n_)};
        return {int(i / n_), int(i % n_), 0};
    }
    std::size_t index(int a, int b, int c = 0) const {
        return dim_ == 3 ? (std::size_t(a) * n_ + b) * n_ + c : std::size_t(a) * n_ + b;
    }
    std::array<long, 3> strides() const {
        return dim_ == 3 ? std::array<long, 3>{long(n_) * n_, n_, 1} : std::array<long, 3>{n_, 1, 0};
    }

    template <class F>
    Field sample(F&& f) const {
        Field out(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) out[static_cast<Eigen::Index>(i)] = f(nodes_[i]);
        return out;
    }

    // nodes whose sup-norm coordinate sits in the outer fraction of the box
    std::vector<char> outer_shell(double fraction = 0.2) const {
        std::vector<char> m(size());
        for (std::size_t i = 0; i < size(); ++i) {
            double s = 0;
            for (int d = 0; d < dim_; ++d) s = std::max(s, std::abs(nodes_[i][d]));
            m[i] = s >= (1 - fraction) * R_ - 1e-12;
        }
        return m;
    }

private:
    int dim_, n_;
    double R_, h_ = 0;
    Rule rule_;
    std::vector<double> ax_, aw_;
    std::vector<Vec> nodes_;
    Field w_;
};

using GridPtr = std::shared_ptr<const VelocityGrid>;

// Directions on S^{N-1} described relative to a pole: cos(theta) against the
// pole plus an azimuth. Callers rotate the pole onto the relative velocity.
struct SphereQuadrature {
    int dimension = 3;
    std::vector<double> cos_t, sin_t, cos_p, sin_p, w;

    std::size_t size() const { return w.size(); }
    double total() const {
        double s = 0;
        for (double x : w) s += x;
        return s;
    }

    static SphereQuadrature product(int polar, int azimuthal) {
        return from_polar_rule(gauss_legendre(polar), azimuthal);
    }

    // panels refined toward cos(theta) = +-1
    static SphereQuadrature graded(int per_panel, int levels, int azimuthal) {
        return from_polar_rule(graded_gauss(per_panel, levels), azimuthal);
    }

    static SphereQuadrature from_polar_rule(const Rule1D& r, int azimuthal) {
        if (azimuthal < 1 || r.size() < 1) throw DomainError("sphere quadrature needs positive orders");
        SphereQuadrature q;
        q.dimension = 3;
        for (std::size_t i = 0; i < r.size(); ++i)
            for (int j = 0; j < azimuthal; ++j) {
                double p = 2 * pi * (j + 0.5) / azimuthal;
                q.cos_t.push_back(r.x[i]);
                q.sin_t.push_back(std::sqrt(std::max(0.0, 1 - r.x[i] * r.x[i])));
                q.cos_p.push_back(std::cos(p));
                q.sin_p.push_back(std::sin(p));
                q.w.push_back(r.w[i] * 2 * pi / azimuthal);
            }
        return q;
    }

    static SphereQuadrature circle(int points) {
        if (points < 2) throw DomainError("circle quadrature needs at least 2 points");
        SphereQuadrature q;
        q.dimension = 2;
        for (int k = 0; k < points; ++k) {
            double t = 2 * pi * (k + 0.5) / points;
            q.cos_t.push_back(std::cos(t));
            q.sin_t.push_back(std::sin(t));
            q.cos_p.push_back(1);
            q.sin_p.push_back(0);
            q.w.push_back(2 * pi / points);
        }
        return q;
    }

    // composite Gauss in theta, graded toward theta = 0 and pi, mirrored
    static SphereQuadrature circle_graded(int per_panel, int levels) {
        auto r = graded_gauss(per_panel, levels);
        SphereQuadrature q;
        q.dimension = 2;
        for (int side : {1, -1})
            for (std::size_t i = 0; i < r.size(); ++i) {
                double t = 0.5 * pi * (r.x[i] + 1);
                q.cos_t.push_back(std::cos(t));
                q.sin_t.push_back(side * std::sin(t));
                q.cos_p.push_back(1);
                q.sin_p.push_back(0);
                q.w.push_back(0.5 * pi * r.w[i]);
            }
        return q;
    }

    static SphereQuadrature standard(int dimension) {
        return dimension == 3 ? product(16, 32) : circle(32);
    }

    // sigma_k with the pole mapped to the unit vector e
    void directions(const Vec& e, std::vector<Vec>& out) const {
        out.resize(size());
        if (dimension == 3) {
            Vec e1, e2;
            frame_from_axis(e, e1, e2);
            for (std::size_t k = 0; k < size(); ++k) {
                double a = sin_t[k] * cos_p[k], b = sin_t[k] * sin_p[k];
                out[k] = cos_t[k] * e + a * e1 + b * e2;
            }
        } else {
            Vec p{-e[1], e[0], 0};
            for (std::size_t k = 0; k < size(); ++k) out[k] = cos_t[k] * e + sin_t[k] * p;
        }
    }

    // sum_k w_k b(cos theta_k)
    template <class B>
    double angular_mass(B&& b) const {
        double s = 0;
        for (std::size_t k = 0; k < size(); ++k) s += w[k] * b(cos_t[k]);
        return s;
    }
};

// rho (2 pi T)^{-N/2} exp(-|v-u|^2 / 2T)
struct Maxwellian {
    double rho = 0;
    Vec u{0, 0, 0};
    double T = 0.5;
    int dim = 3;

    static Maxwellian standard(int dim) { return {std::pow(pi, 0.5 * dim), {0, 0, 0}, 0.5, dim}; }

    double operator()(const Vec& v) const {
        return rho * std::pow(2 * pi * T, -0.5 * dim) * std::exp(-norm2(v - u) / (2 * T));
    }
    bool is_standard() const { return T == 0.5 && u == Vec{0, 0, 0} && std::abs(rho - std::pow(pi, 0.5 * dim)) < 1e-14 * rho; }
};

inline Field maxwellian_field(const VelocityGrid& g) {
    return g.sample([](const Vec& v) { return std::exp(-norm2(v)); });
}
inline Field maxwellian_field(const VelocityGrid& g, const Maxwellian& m) {
    if (m.is_standard()) return maxwellian_field(g);
    return g.sample([&](const Vec& v) { return m(v); });
}

struct Moments {
    double mass = 0;
    Vec momentum{0, 0, 0};
    double energy = 0;  // (1/2) int |v|^2 f
};

inline Moments moments(const VelocityGrid& g, const Field& f) {
    Moments m;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double wf = g.weight(i) * f[static_cast<Eigen::Index>(i)];
        const Vec& v = g.node(i);
        m.mass += wf;
        for (int d = 0; d < 3; ++d) m.momentum[d] += wf * v[d];
        m.energy += 0.5 * wf * norm2(v);
    }
    return m;
}

inline Maxwellian maxwellian_from_moments(const Moments& m, int dim) {
    if (!(m.mass > 0)) throw DomainError("maxwellian_from_moments: nonpositive mass");
    Maxwellian M;
    M.dim = dim;
    M.rho = m.mass;
    M.u = (1.0 / m.mass) * m.momentum;
    M.T = (2 * m.energy / m.mass - norm2(M.u)) / dim;
    if (!(M.T > 0)) throw DomainError("maxwellian_from_moments: nonpositive temperature");
    return M;
}

// Collision invariants 1, v_1..v_N, |v|^2 sampled on the grid (columns).
inline Eigen::MatrixXd invariants(const VelocityGrid& g) {
    int N = g.dimension();
    Eigen::MatrixXd P(static_cast<Eigen::Index>(g.size()), N + 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto r = static_cast<Eigen::Index>(i);
        const Vec& v = g.node(i);
        P(r, 0) = 1;
        for (int d = 0; d < N; ++d) P(r, 1 + d) = v[d];
        P(r, N + 1) = norm2(v);
    }
    return P;
}

struct WeightFunction {
    enum class Kind { maxwellian, stretched, bracket };
    Kind kind = Kind::stretched;
    double a = 0.5, s = 0.2, q = 0;

    static WeightFunction stretched_exponential(double a, double s) { return {Kind::stretched, a, s, 0}; }
    static WeightFunction maxwellian() { return {Kind::maxwellian, 1, 2, 0}; }
    static WeightFunction polynomial(double q) { return {Kind::bracket, 0, 0, q}; }

    double operator()(const Vec& v) const {
        switch (kind) {
            case Kind::maxwellian: return std::exp(-norm2(v));
            case Kind::stretched: return std::exp(-a * std::pow(norm(v), s));
            case Kind::bracket: return std::pow(japanese(norm(v)), -q);
        }
        return 1;
    }

    // the stretched weight m = exp(-a|v|^s) needs a > 0 and 0 < s < gamma/2
    void check_admissible(double gamma) const {
        if (kind != Kind::stretched) return;
        if (!(a > 0)) throw DomainError("weight: a must be positive");
        if (!(s > 0 && s < gamma / 2)) throw DomainError("weight: s must lie in (0, gamma/2)");
    }
};

inline Field weight_field(const VelocityGrid& g, const WeightFunction& m) {
    return g.sample([&](const Vec& v) { return m(v); });
}

// ||f||_{L^p(W)}: p = 1, 2 or infinity (p <= 0)
inline double weighted_norm(const VelocityGrid& g, const Field& f, const Field& W, double p = 1) {
    if (p == 1) return (g.weights().array() * f.array().abs() * W.array()).sum();
    if (p == 2) return std::sqrt((g.weights().array() * f.array().square() * W.array()).sum());
    return (f.array().abs() * W.array()).maxCoeff();
}
inline double l1_norm(const VelocityGrid& g, const Field& f) { return (g.weights().array() * f.array().abs()).sum(); }

inline double h_functional(const VelocityGrid& g, const Field& f) {
    double s = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        double x = f[i];
        if (x < 0) throw DomainError("h_functional: negative value in f");
        if (x > 0) s += g.weight(static_cast<std::size_t>(i)) * x * std::log(x);
    }
    return s;
}

}  // namespace boltzgap
