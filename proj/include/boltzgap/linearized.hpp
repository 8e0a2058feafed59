#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "gain_stencil.hpp"
#include "interpolation.hpp"
#include "kernels.hpp"
#include "velocity_space.hpp"

namespace boltzgap {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct AssemblyOptions {
    int order = 2;
    // Off-grid values of mg are reconstructed either from mg/M (then multiplied
    // by M at the point) or from mg itself.
    enum class Reference { maxwellian, weight } reference = Reference::maxwellian;
    Maxwellian expansion{};  // rho = 0 means the standard exp(-|v|^2)
    std::function<double(double)> angular;  // overrides b in the gain part only
};

// Discrete L = gain - conv - diag(nu), acting on h (f = M(1+h)), optionally
// conjugated to the weighted scaling g = m h M / m.
struct LinearizedOperatorMatrix {
    Eigen::MatrixXd gain, conv;
    Field nu;
    bool weighted = false;  // true: acts on g with the weight below
    WeightFunction weight{};
    double delta = 0;  // > 0 for the mollified gain part
    double ell_quad = 0;

    Eigen::MatrixXd full() const {
        Eigen::MatrixXd A = gain - conv;
        A.diagonal() -= nu;
        return A;
    }
    Eigen::Index size() const { return gain.rows(); }
};

namespace detail {

inline Maxwellian resolve(const Maxwellian& m, int dim) { return m.rho > 0 ? m : Maxwellian::standard(dim); }

// rows[i] += sum_j c(i, j) S_{p_i - p_j}(.) over all pairs, processed one
// slab of relative velocities at a time to bound stencil memory.
template <class Coef>
void accumulate_gain(const VelocityGrid& g, GainStencilTable& T, Coef&& coef, RowMatrix& G) {
    const int n = g.points_per_axis(), N = g.dimension();
    const std::size_t S = g.size();
    for (int ux = -(n - 1); ux <= n - 1; ++ux) {
        for (std::size_t i = 0; i < S; ++i) {
            auto p = g.coords(i);
            int jx = p[0] - ux;
            if (jx < 0 || jx >= n) continue;
            double* row = G.row(static_cast<Eigen::Index>(i)).data();
            if (N == 2) {
                for (int jy = 0; jy < n; ++jy) {
                    int uy = p[1] - jy;
                    if (ux == 0 && uy == 0) continue;
                    std::size_t j = g.index(jx, jy);
                    double c = coef(i, j);
                    if (c == 0) continue;
                    apply_stencil(T.get(ux, uy), g, p, i, c, row);
                }
            } else {
                for (int jy = 0; jy < n; ++jy)
                    for (int jz = 0; jz < n; ++jz) {
                        int uy = p[1] - jy, uz = p[2] - jz;
                        if (ux == 0 && uy == 0 && uz == 0) continue;
                        std::size_t j = g.index(jx, jy, jz);
                        double c = coef(i, j);
                        if (c == 0) continue;
                        apply_stencil(T.get(ux, uy, uz), g, p, i, c, row);
                    }
            }
        }
        for (int uy = -(n - 1); uy <= n - 1; ++uy) {
            if (N == 2)
                T.release(ux, uy);
            else
                for (int uz = -(n - 1); uz <= n - 1; ++uz) T.release(ux, uy, uz);
        }
    }
}

}  // namespace detail

// Gain part only, acting on h. `row_window` multiplies row i when given.
inline Eigen::MatrixXd assemble_gain(const VelocityGrid& g, const CollisionKernelSpec& k, const SphereQuadrature& sq,
                                     const AssemblyOptions& opt = {}, const Field* row_window = nullptr) {
    auto M = detail::resolve(opt.expansion, g.dimension());
    Field Mv = maxwellian_field(g, M);
    auto b = opt.angular ? opt.angular : std::function<double(double)>([&k](double x) { return k.b(x); });
    GainStencilTable T(g, sq, b, opt.order, GainPoints::both);
    const Field& w = g.weights();
    RowMatrix G = RowMatrix::Zero(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
    detail::accumulate_gain(
        g, T,
        [&](std::size_t i, std::size_t j) {
            auto jj = static_cast<Eigen::Index>(j);
            return w[jj] * k.phi(norm(g.node(i) - g.node(j))) * Mv[jj];
        },
        G);
    if (row_window) G.array().colwise() *= row_window->array();
    return Eigen::MatrixXd(G);
}

inline LinearizedOperatorMatrix assemble_L(const VelocityGrid& g, const CollisionKernelSpec& k,
                                           const SphereQuadrature& sq, const AssemblyOptions& opt = {}) {
    if (k.dimension != g.dimension()) throw DomainError("kernel and grid dimensions differ");
    LinearizedOperatorMatrix L;
    auto M = detail::resolve(opt.expansion, g.dimension());
    Field Mv = maxwellian_field(g, M);
    L.gain = assemble_gain(g, k, sq, opt);
    // conv and nu always use the plain b (the loss side is never mollified)
    double ell = sq.angular_mass([&k](double x) { return k.b(x); });
    L.ell_quad = ell;
    const auto S = static_cast<Eigen::Index>(g.size());
    L.conv.resize(S, S);
    const Field& w = g.weights();
    for (Eigen::Index j = 0; j < S; ++j)
        for (Eigen::Index i = 0; i < S; ++i)
            L.conv(i, j) = i == j ? 0.0 : w[j] * k.phi(norm(g.node(i) - g.node(j))) * Mv[j] * ell;
    L.nu = L.conv.rowwise().sum();
    return L;
}

// g -> m^{-1} M L(m M^{-1} g), obtained as D^{-1} L D with D = diag(m/M).
inline LinearizedOperatorMatrix conjugate_to_weight(const LinearizedOperatorMatrix& L, const VelocityGrid& g,
                                                    const WeightFunction& m, const Maxwellian& expansion = {}) {
    Field Mv = maxwellian_field(g, detail::resolve(expansion, g.dimension()));
    Field D = weight_field(g, m).array() / Mv.array();
    LinearizedOperatorMatrix out = L;
    out.gain = D.asDiagonal().inverse() * L.gain * D.asDiagonal();
    out.conv = D.asDiagonal().inverse() * L.conv * D.asDiagonal();
    out.weighted = true;
    out.weight = m;
    return out;
}

// Direct pointwise assembly of the weighted operator with mg interpolated
// as is; an independent path against the conjugated one. O(n^{2N} K).
inline LinearizedOperatorMatrix assemble_L_m_direct(const VelocityGrid& g, const CollisionKernelSpec& k,
                                                    const SphereQuadrature& sq, const WeightFunction& m,
                                                    const AssemblyOptions& opt = {}) {
    const auto S = static_cast<Eigen::Index>(g.size());
    Field mv = weight_field(g, m), Mv = maxwellian_field(g);
    const Field& w = g.weights();
    double ell = sq.angular_mass([&k](double x) { return k.b(x); });
    LinearizedOperatorMatrix L;
    L.weighted = true;
    L.weight = m;
    L.ell_quad = ell;
    RowMatrix G = RowMatrix::Zero(S, S);
    L.conv.resize(S, S);
    std::vector<Vec> sig;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec& v = g.node(i);
        double* row = G.row(static_cast<Eigen::Index>(i)).data();
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (i == j) continue;
            const Vec& vs = g.node(j);
            Vec u = v - vs;
            double ul = norm(u);
            double c = w[static_cast<Eigen::Index>(j)] * k.phi(ul) / mv[static_cast<Eigen::Index>(i)];
            sq.directions((1.0 / ul) * u, sig);
            Vec mid = 0.5 * (v + vs);
            for (std::size_t q = 0; q < sq.size(); ++q) {
                double bw = sq.w[q] * k.b(sq.cos_t[q]);
                Vec vp = mid + (0.5 * ul) * sig[q];
                Vec vps = mid - (0.5 * ul) * sig[q];
                double Mp = std::exp(-norm2(vp)), Mps = std::exp(-norm2(vps));
                // (mg)(v') M(v'_*) + M(v')(mg)(v'_*), with mg = m * g at nodes
                for_each_stencil_node(g, opt.order, vp, [&](std::size_t l, double a) {
                    row[l] += c * bw * Mps * a * mv[static_cast<Eigen::Index>(l)];
                });
                for_each_stencil_node(g, opt.order, vps, [&](std::size_t l, double a) {
                    row[l] += c * bw * Mp * a * mv[static_cast<Eigen::Index>(l)];
                });
            }
        }
    }
    L.gain = G;
    for (Eigen::Index j = 0; j < S; ++j)
        for (Eigen::Index i = 0; i < S; ++i)
            L.conv(i, j) = i == j ? 0.0 : w[j] * k.phi(norm(g.node(i) - g.node(j))) * Mv[i] * mv[j] / mv[i] * ell;
    // nu_i = sum_j w_j Phi M_j ell
    L.nu = Field::Zero(S);
    for (Eigen::Index i = 0; i < S; ++i)
        for (Eigen::Index j = 0; j < S; ++j)
            if (i != j) L.nu[i] += w[j] * k.phi(norm(g.node(i) - g.node(j))) * Mv[j] * ell;
    return L;
}

inline LinearizedOperatorMatrix assemble_L_m(const VelocityGrid& g, const CollisionKernelSpec& k,
                                             const SphereQuadrature& sq, const WeightFunction& m,
                                             const AssemblyOptions& opt = {}) {
    m.check_admissible(k.gamma);
    if (opt.reference == AssemblyOptions::Reference::weight) return assemble_L_m_direct(g, k, sq, m, opt);
    return conjugate_to_weight(assemble_L(g, k, sq, opt), g, m, opt.expansion);
}

// Gain part with b_delta and rows multiplied by I_delta; on h, or on g when a
// weight is given.
inline LinearizedOperatorMatrix assemble_L_plus_delta(const VelocityGrid& g, const CollisionKernelSpec& k,
                                                      const SphereQuadrature& sq, double delta,
                                                      const WeightFunction* m = nullptr, AssemblyOptions opt = {}) {
    auto mol = std::make_shared<Mollifier>(g.dimension());
    opt.angular = mollified_angular(k, delta, mol);
    Field I = g.sample([&](const Vec& v) { return mol->velocity_window(norm(v), delta); });
    LinearizedOperatorMatrix L;
    L.delta = delta;
    L.gain = assemble_gain(g, k, sq, opt, &I);
    L.conv = Eigen::MatrixXd::Zero(L.gain.rows(), L.gain.cols());
    L.nu = Field::Zero(L.gain.rows());
    if (m) {
        Field D = weight_field(g, *m).array() / maxwellian_field(g).array();
        L.gain = D.asDiagonal().inverse() * L.gain * D.asDiagonal();
        L.weighted = true;
        L.weight = *m;
    }
    return L;
}

// max |A_m - D^{-1} A D| / max |A_m|
inline double conjugation_defect(const Eigen::MatrixXd& Am, const Eigen::MatrixXd& A, const VelocityGrid& g,
                                 const WeightFunction& m) {
    Field D = weight_field(g, m).array() / maxwellian_field(g).array();
    Eigen::MatrixXd C = D.asDiagonal().inverse() * A * D.asDiagonal();
    return (Am - C).cwiseAbs().maxCoeff() / Am.cwiseAbs().maxCoeff();
}

// Inner-product weights W = w M (quadrature weight times the Maxwellian).
inline Field l2m_weights(const VelocityGrid& g, const Maxwellian& expansion = {}) {
    return g.weights().array() * maxwellian_field(g, detail::resolve(expansion, g.dimension())).array();
}

struct Symmetrized {
    Eigen::MatrixXd A;  // self-adjoint in L^2(M)
    double defect = 0;  // ||S - S^T||_F / ||S||_F in the symmetric frame
};

inline Symmetrized symmetrize(const Eigen::MatrixXd& A, const Field& W) {
    Field s = W.array().sqrt();
    Eigen::MatrixXd S = s.asDiagonal() * A * s.cwiseInverse().asDiagonal();
    Symmetrized r;
    r.defect = (S - S.transpose()).norm() / S.norm();
    Eigen::MatrixXd Ssym = 0.5 * (S + S.transpose());
    r.A = s.cwiseInverse().asDiagonal() * Ssym * s.asDiagonal();
    return r;
}

inline double symmetry_defect(const Eigen::MatrixXd& A, const Field& W) {
    Field s = W.array().sqrt();
    Eigen::MatrixXd S = s.asDiagonal() * A * s.cwiseInverse().asDiagonal();
    return (S - S.transpose()).norm() / S.norm();
}

// ||A||_{L^1(omega) -> L^1}: max_l sum_i w_i |A_il| / (w_l omega_l)
inline double l1_operator_norm(const Eigen::MatrixXd& A, const Field& w, const Field* omega = nullptr) {
    double best = 0;
    for (Eigen::Index l = 0; l < A.cols(); ++l) {
        double s = (w.array() * A.col(l).array().abs()).sum() / w[l];
        if (omega) s /= (*omega)[l];
        best = std::max(best, s);
    }
    return best;
}

// ||A||_{L^2(W)}: spectral norm in the symmetric frame
inline double l2_operator_norm(const Eigen::MatrixXd& A, const Field& W) {
    Field s = W.array().sqrt();
    Eigen::MatrixXd S = s.asDiagonal() * A * s.cwiseInverse().asDiagonal();
    Eigen::MatrixXd G = S.transpose() * S;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Discrete L^1 -> W^{1,1} surrogate: central differences along each axis.
inline double gradient_l1_norm(const Eigen::MatrixXd& A, const VelocityGrid& g) {
    const int n = g.points_per_axis(), N = g.dimension();
    const double h = g.spacing();
    const Field& w = g.weights();
    auto st = g.strides();
    double best = 0;
    for (Eigen::Index l = 0; l < A.cols(); ++l) {
        double s = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto p = g.coords(i);
            double gi = 0;
            for (int d = 0; d < N; ++d) {
                if (p[d] == 0 || p[d] == n - 1) continue;
                auto ip = static_cast<Eigen::Index>(i + st[d]), im = static_cast<Eigen::Index>(i - st[d]);
                gi += std::abs(A(ip, l) - A(im, l)) / (2 * h);
            }
            s += w[static_cast<Eigen::Index>(i)] * gi;
        }
        best = std::max(best, s / w[l]);
    }
    return best;
}

struct GradKernelCheck {
    double C = 0;
    std::size_t pairs = 0, violations = 0;
    double decay_ratio = 0;  // median kernel/shape for pairs where the second exponential factor is < 1e-3
};

// k(u, v) from the gain part (acting on h): L+ h(v) = M^{-1/2}(v) int k(u,v) h(u) M^{1/2}(u) du.
// Compared with |u-v|^{1+gamma-N} exp(-|u-v|^2/4 - (|u|^2-|v|^2)^2/(4|u-v|^2)).
inline GradKernelCheck grad_kernel_bound_check(const Eigen::MatrixXd& gain, const VelocityGrid& g, double gamma,
                                               double fit_radius, double slack = 1.0) {
    const int N = g.dimension();
    const double h = g.spacing();
    Field Mv = maxwellian_field(g);
    const Field& w = g.weights();
    GradKernelCheck r;
    auto ratio = [&](Eigen::Index i, Eigen::Index l, double& shape) {
        const Vec &v = g.node(std::size_t(i)), &u = g.node(std::size_t(l));
        double d = norm(u - v);
        double e = norm2(u) - norm2(v);
        shape = std::pow(d, 1 + gamma - N) * std::exp(-d * d / 4 - e * e / (4 * d * d));
        double kval = gain(i, l) * std::sqrt(Mv[i]) / (w[l] * std::sqrt(Mv[l]));
        return kval / shape;
    };
    const auto S = gain.rows();
    for (Eigen::Index i = 0; i < S; ++i)
        for (Eigen::Index l = 0; l < S; ++l) {
            if (i == l) continue;
            const Vec &v = g.node(std::size_t(i)), &u = g.node(std::size_t(l));
            if (norm(u - v) < 2 * h || norm(u) > fit_radius || norm(v) > fit_radius) continue;
            double shape;
            r.C = std::max(r.C, ratio(i, l, shape));
        }
    std::vector<double> tail;
    for (Eigen::Index i = 0; i < S; ++i)
        for (Eigen::Index l = 0; l < S; ++l) {
            if (i == l) continue;
            const Vec &v = g.node(std::size_t(i)), &u = g.node(std::size_t(l));
            if (norm(u - v) < 2 * h || norm(u) > fit_radius || norm(v) > fit_radius) continue;
            double shape;
            double q = ratio(i, l, shape);
            ++r.pairs;
            if (q > slack * r.C) ++r.violations;
            double d = norm(u - v), e = norm2(u) - norm2(v);
            if (std::exp(-e * e / (4 * d * d)) < 1e-3) tail.push_back(q / r.C);
        }
    if (!tail.empty()) {
        std::nth_element(tail.begin(), tail.begin() + tail.size() / 2, tail.end());
        r.decay_ratio = tail[tail.size() / 2];
    }
    return r;
}

// Gain part with b_delta and I_delta through the line/hyperplane form
//   L+_delta h(v) = I_delta(v) int dW |W|^{1-N} h(v+W) int_{W^perp} dV
//                   bs(|W|/|U|) Phi(|U|) M(v+W+V),   U = W + V,
//   bs(t) = 2^{N-1} t^{N-2} [b_delta(1-2t^2) + b_delta(2t^2-1)].
// The outer integral runs over grid nodes v+W, so no interpolation enters;
// the hyperplane integral uses Gauss in |V| on the b_delta support and a
// uniform rule in angle (N = 3).
inline LinearizedOperatorMatrix carleman_L_plus_delta(const VelocityGrid& g, const CollisionKernelSpec& k,
                                                      double delta, const WeightFunction* m = nullptr,
                                                      int radial = 48, int azimuthal = 32, int sub = 6,
                                                      double near = 2.5) {
    if (!(delta > 0 && delta < 1)) throw DomainError("delta must lie in (0, 1)");
    const int N = g.dimension();
    auto mol = std::make_shared<Mollifier>(N);
    auto bd = mollified_angular(k, delta, mol);
    const double d2 = delta * delta;
    const double lo = std::sqrt(1.0 / (1.0 - d2 / 2) - 1.0), hi = std::sqrt(2.0 / d2 - 1.0);
    Rule1D rr = gauss_legendre(radial, lo, hi);
    const auto S = static_cast<Eigen::Index>(g.size());
    const Field& w = g.weights();
    Field I = g.sample([&](const Vec& v) { return mol->velocity_window(norm(v), delta); });
    const double pref = std::pow(2.0, N - 1);
    auto bs = [&](double t) { return pref * std::pow(t, N - 2) * (bd(1 - 2 * t * t) + bd(2 * t * t - 1)); };
    LinearizedOperatorMatrix L;
    L.delta = delta;
    L.gain = Eigen::MatrixXd::Zero(S, S);
    // |W|^{1-N} times the hyperplane integral, at v + W
    auto kernel = [&](const Vec& v, const Vec& W) {
        double wl = norm(W);
        if (wl == 0) return 0.0;
        Vec e = (1.0 / wl) * W, e1, e2;
        frame_from_axis(e, e1, e2);
        Vec c = v + W;
        double acc = 0;
        for (std::size_t q = 0; q < rr.size(); ++q) {
            double r = wl * rr.x[q];
            double U = std::hypot(wl, r);
            double ker = bs(wl / U) * k.phi(U);
            if (ker == 0) continue;
            double jac = rr.w[q] * wl;
            if (N == 2) {
                acc += jac * ker * (std::exp(-norm2(c + r * e1)) + std::exp(-norm2(c - r * e1)));
            } else {
                double s = 0;
                for (int a = 0; a < azimuthal; ++a) {
                    double ph = 2 * pi * a / azimuthal;
                    s += std::exp(-norm2(c + (r * std::cos(ph)) * e1 + (r * std::sin(ph)) * e2));
                }
                acc += jac * ker * r * s * (2 * pi / azimuthal);
            }
        }
        return std::pow(wl, 1 - N) * acc;
    };
    // cells next to v carry the |W|^{1-N} singularity: average over subcells
    const double h = g.spacing();
    std::vector<Vec> offs;
    for (int a = 0; a < sub; ++a)
        for (int b = 0; b < sub; ++b)
            for (int c = 0; c < (N == 3 ? sub : 1); ++c) {
                Vec o{(a + 0.5) / sub - 0.5, (b + 0.5) / sub - 0.5, N == 3 ? (c + 0.5) / sub - 0.5 : 0.0};
                offs.push_back(h * o);
            }
    for (Eigen::Index i = 0; i < S; ++i) {
        if (I[i] == 0) continue;
        const Vec& v = g.node(std::size_t(i));
        for (Eigen::Index l = 0; l < S; ++l) {
            Vec W = g.node(std::size_t(l)) - v;
            double kv = 0;
            if (g.uniform() && norm(W) <= near * h) {
                for (const Vec& o : offs) kv += kernel(v, W + o);
                kv /= double(offs.size());
            } else {
                kv = kernel(v, W);
            }
            L.gain(i, l) = I[i] * w[l] * kv;
        }
    }
    L.conv = Eigen::MatrixXd::Zero(S, S);
    L.nu = Field::Zero(S);
    if (m) {
        Field D = weight_field(g, *m).array() / maxwellian_field(g).array();
        L.gain = D.asDiagonal().inverse() * L.gain * D.asDiagonal();
        L.weighted = true;
        L.weight = *m;
    }
    return L;
}

struct MeasuredConstants {
    double C3 = 0;       // ||L+_m||_{L^1(<v>^gamma) -> L^1}
    double C4 = 0;       // sup |L+_delta g| / (I_delta ||g||_1)
    double C5 = 0;       // ||L+_delta||_{L^1 -> W^{1,1}} with central differences
    double C6 = 0;       // sup |L*_m g| / (||g||_1 m^{-1} <v>^gamma M)
    double C7 = 0;       // ||L*_m||_{L^1 -> W^{1,1}}
    std::size_t C6_violations = 0;
    std::size_t C6_samples = 0;
};

// Lm: weighted operator (gain, conv); Ld: weighted mollified gain at one delta.
inline MeasuredConstants measured_constants(const LinearizedOperatorMatrix& Lm, const LinearizedOperatorMatrix& Ld,
                                            const VelocityGrid& g, double gamma, std::uint64_t seed,
                                            std::size_t samples = 50) {
    MeasuredConstants c;
    const Field& w = g.weights();
    const auto S = Lm.gain.rows();
    Field br = g.sample([&](const Vec& v) { return std::pow(japanese(norm(v)), gamma); });
    c.C3 = std::max(l1_operator_norm(Lm.gain, w, &br), l1_operator_norm(Ld.gain, w, &br));
    auto mol = Mollifier(g.dimension());
    Field I = g.sample([&](const Vec& v) { return mol.velocity_window(norm(v), Ld.delta); });
    for (Eigen::Index i = 0; i < S; ++i) {
        if (I[i] <= 0) continue;
        for (Eigen::Index l = 0; l < S; ++l) c.C4 = std::max(c.C4, std::abs(Ld.gain(i, l)) / (w[l] * I[i]));
    }
    c.C5 = gradient_l1_norm(Ld.gain, g);
    Field env = g.sample([&](const Vec& v) { return std::exp(-norm2(v)) * std::pow(japanese(norm(v)), gamma); });
    env = env.cwiseQuotient(weight_field(g, Lm.weight));
    for (Eigen::Index i = 0; i < S; ++i)
        for (Eigen::Index l = 0; l < S; ++l) c.C6 = std::max(c.C6, std::abs(Lm.conv(i, l)) / (w[l] * env[i]));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    for (std::size_t t = 0; t < samples; ++t) {
        Field x(S);
        for (Eigen::Index i = 0; i < S; ++i) x[i] = N01(rng);
        Field y = Lm.conv * x;
        double n1 = l1_norm(g, x);
        ++c.C6_samples;
        for (Eigen::Index i = 0; i < S; ++i)
            if (std::abs(y[i]) > c.C6 * n1 * env[i] * (1 + 1e-12)) {
                ++c.C6_violations;
                break;
            }
    }
    c.C7 = gradient_l1_norm(Lm.conv, g);
    return c;
}

}  // namespace boltzgap
