#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "kernels.hpp"
#include "linalg.hpp"
#include "linearized.hpp"
#include "velocity_space.hpp"

namespace boltzgap {

enum class EigClass { null, discrete, band };

inline const char* to_string(EigClass c) {
    switch (c) {
        case EigClass::null: return "null";
        case EigClass::discrete: return "discrete";
        case EigClass::band: return "band";
    }
    return "?";
}

struct SpectrumOptions {
    enum class Mode { automatic, symmetric, general } mode = Mode::automatic;
    double symmetric_defect_limit = 0.1;  // automatic: symmetrize only below this global defect
    double tol_null = -1;                 // < 0: 1e-3 * nu0
    double shell_fraction = 0.2;          // outer part of the box used for the band surrogate
    double shell_mass = 0.5;
    bool vectors = true;
    bool left_vectors = false;
};

struct SpectrumReport {
    std::vector<std::complex<double>> values;  // sorted by decreasing real part
    std::vector<EigClass> classes;
    CMatrix vectors;       // right eigenvectors in the h variable, same order
    CMatrix left_vectors;  // general mode only, when requested
    bool symmetrized = false;
    double symmetry_defect = 0;
    double tol_null = 0;
    std::size_t null_count = 0;
    double gap = 0;         // -max Re over the non-null part
    double band_onset = -INFINITY;
    double null_span_angle_deg = 90;
    double max_imag = 0;
    std::vector<double> shell_fraction;
};

namespace detail {

inline double shell_mass_fraction(const Eigen::Ref<const CVector>& h, const Field& W, const std::vector<char>& shell) {
    double tot = 0, out = 0;
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        double m = W[i] * std::norm(h[i]);
        tot += m;
        if (shell[std::size_t(i)]) out += m;
    }
    return tot > 0 ? out / tot : 0;
}

}  // namespace detail

// Spectrum of the discrete L (acting on h). Symmetric mode symmetrizes in
// L^2(M) first and uses the self-adjoint solver.
inline SpectrumReport spectrum(const Eigen::MatrixXd& A, const VelocityGrid& g, double nu0,
                               const SpectrumOptions& opt = {}) {
    SpectrumReport r;
    Field W = l2m_weights(g);
    r.symmetry_defect = symmetry_defect(A, W);
    bool sym = opt.mode == SpectrumOptions::Mode::symmetric ||
               (opt.mode == SpectrumOptions::Mode::automatic && r.symmetry_defect <= opt.symmetric_defect_limit);
    r.symmetrized = sym;
    r.tol_null = opt.tol_null > 0 ? opt.tol_null : 1e-3 * nu0;
    const auto S = A.rows();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(S));
    std::iota(idx.begin(), idx.end(), 0);
    CVector vals;
    CMatrix vecs, lvecs;
    if (sym) {
        Field s = W.array().sqrt();
        Eigen::MatrixXd Sm = s.asDiagonal() * A * s.cwiseInverse().asDiagonal();
        Sm = 0.5 * (Sm + Sm.transpose()).eval();
        auto e = sym_eig(Sm, opt.vectors);
        vals = e.values.cast<std::complex<double>>();
        if (opt.vectors) vecs = (s.cwiseInverse().asDiagonal() * e.vectors).cast<std::complex<double>>();
    } else {
        auto e = gen_eig(A, opt.vectors, opt.left_vectors);
        vals = e.values;
        vecs = std::move(e.right);
        lvecs = std::move(e.left);
    }
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return vals[a].real() > vals[b].real(); });
    r.values.resize(std::size_t(S));
    for (Eigen::Index i = 0; i < S; ++i) {
        r.values[std::size_t(i)] = vals[idx[std::size_t(i)]];
        r.max_imag = std::max(r.max_imag, std::abs(vals[idx[std::size_t(i)]].imag()));
    }
    if (opt.vectors) {
        r.vectors.resize(S, S);
        for (Eigen::Index i = 0; i < S; ++i) r.vectors.col(i) = vecs.col(idx[std::size_t(i)]);
    }
    if (opt.left_vectors && !sym) {
        r.left_vectors.resize(S, S);
        for (Eigen::Index i = 0; i < S; ++i) r.left_vectors.col(i) = lvecs.col(idx[std::size_t(i)]);
    }
    r.classes.assign(std::size_t(S), EigClass::discrete);
    r.gap = INFINITY;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        if (std::abs(r.values[i]) <= r.tol_null) {
            r.classes[i] = EigClass::null;
            ++r.null_count;
        } else {
            r.gap = std::min(r.gap, -r.values[i].real());
        }
    }
    if (opt.vectors) {
        auto shell = g.outer_shell(opt.shell_fraction);
        r.shell_fraction.resize(r.values.size());
        for (std::size_t i = 0; i < r.values.size(); ++i) {
            r.shell_fraction[i] = detail::shell_mass_fraction(r.vectors.col(Eigen::Index(i)), W, shell);
            if (r.classes[i] != EigClass::null && r.shell_fraction[i] > opt.shell_mass)
                r.band_onset = std::max(r.band_onset, r.values[i].real());
        }
        for (std::size_t i = 0; i < r.values.size(); ++i)
            if (r.classes[i] == EigClass::discrete && r.values[i].real() <= r.band_onset) r.classes[i] = EigClass::band;
        // largest principal angle between the null eigenvectors and span{1, v, |v|^2} in L^2(M)
        std::vector<Eigen::Index> nul;
        for (std::size_t i = 0; i < r.values.size(); ++i)
            if (r.classes[i] == EigClass::null) nul.push_back(Eigen::Index(i));
        if (!nul.empty()) {
            Field s = W.array().sqrt();
            Eigen::MatrixXd Vn(S, Eigen::Index(nul.size()));
            for (std::size_t c = 0; c < nul.size(); ++c) Vn.col(Eigen::Index(c)) = s.cwiseProduct(r.vectors.col(nul[c]).real());
            Eigen::MatrixXd P = s.asDiagonal() * invariants(g);
            auto ang = principal_angles(Vn, P);
            r.null_span_angle_deg = ang.maxCoeff() * 180.0 / pi;
            if (nul.size() != std::size_t(P.cols())) r.null_span_angle_deg = 90;
        }
    }
    return r;
}

struct GapCheck {
    double lambda = 0, nu0 = 0, kernel_bound = 0, reference_bound = 0;
    bool above_bound = false, below_nu0 = false;
};

// reference_bound: the explicit constant with c_b = 1, i.e. for b == 1
inline GapCheck gap_check(const SpectrumReport& sp, const CollisionKernelSpec& k, double nu0) {
    GapCheck c;
    c.lambda = sp.gap;
    c.nu0 = nu0;
    c.kernel_bound = explicit_gap_lower_bound(k);
    c.reference_bound = explicit_gap_lower_bound(1.0, k.c_phi, k.gamma);
    c.above_bound = c.lambda >= c.kernel_bound;
    c.below_nu0 = c.lambda < nu0;
    return c;
}

struct TransferRow {
    std::complex<double> lambda;
    double residual = 0;  // ||L_m psi - lambda psi||_1 / ||psi||_1
    std::complex<double> nearest;
    double mismatch = 0;  // |lambda - nearest| / max(|lambda|, gap)
};

struct TransferReport {
    std::vector<TransferRow> rows;
    double max_residual = 0, max_mismatch = 0;
    std::size_t unmatched_weighted = 0;  // eigenvalues of L_m above onset without partner
    double onset = 0;
};

// Each eigenpair of L above the band onset moved to g = m^{-1} M h and tested
// against the weighted matrix; the weighted spectrum is matched back.
inline TransferReport eigenvector_transfer_check(const SpectrumReport& sp, const VelocityGrid& g,
                                                 const Eigen::MatrixXd& Am, const WeightFunction& m,
                                                 double eps_match) {
    TransferReport t;
    t.onset = std::isfinite(sp.band_onset) ? sp.band_onset : -INFINITY;
    Field D = maxwellian_field(g).array() / weight_field(g, m).array();  // g = D h
    const Field& w = g.weights();
    auto l1 = [&](const CVector& x) { return (w.array() * x.array().abs()).sum(); };
    auto em = gen_eig(Am);
    std::vector<std::complex<double>> mu(em.values.data(), em.values.data() + em.values.size());
    double gap = sp.gap;
    for (std::size_t i = 0; i < sp.values.size(); ++i) {
        if (sp.classes[i] == EigClass::band) continue;
        TransferRow r;
        r.lambda = sp.values[i];
        CVector psi = D.cast<std::complex<double>>().cwiseProduct(sp.vectors.col(Eigen::Index(i)));
        CVector res = Am.cast<std::complex<double>>() * psi - r.lambda * psi;
        r.residual = l1(res) / l1(psi);
        double best = INFINITY;
        for (auto z : mu)
            if (std::abs(z - r.lambda) < best) {
                best = std::abs(z - r.lambda);
                r.nearest = z;
            }
        r.mismatch = best / std::max(std::abs(r.lambda), gap);
        t.max_residual = std::max(t.max_residual, r.residual);
        t.max_mismatch = std::max(t.max_mismatch, r.mismatch);
        t.rows.push_back(r);
    }
    for (auto z : mu) {
        if (z.real() <= t.onset) continue;
        double best = INFINITY;
        for (std::size_t i = 0; i < sp.values.size(); ++i) best = std::min(best, std::abs(z - sp.values[i]));
        if (best / std::max(std::abs(z), gap) > eps_match) ++t.unmatched_weighted;
    }
    return t;
}

// Projection onto the invariant directions for the weighted operator:
// V0 = (M/m) phi, U0 = w m phi, Pi0 = V0 (U0^T V0)^{-1} U0^T.
struct NullProjector {
    Eigen::MatrixXd V, U;  // U already contains (U^T V)^{-T}
    Field apply(const Field& x) const { return V * (U.transpose() * x); }
};

inline NullProjector weighted_null_projector(const VelocityGrid& g, const WeightFunction* m) {
    Eigen::MatrixXd P = invariants(g);
    Field mv = m ? weight_field(g, *m) : Field::Ones(Eigen::Index(g.size()));
    Field M = maxwellian_field(g);
    NullProjector p;
    p.V = (M.array() / mv.array()).matrix().asDiagonal() * P;
    Eigen::MatrixXd U0 = (g.weights().array() * mv.array()).matrix().asDiagonal() * P;
    Eigen::MatrixXd G = U0.transpose() * p.V;
    p.U = U0 * G.inverse().transpose();
    return p;
}

// Same projector built from the computed null eigenvectors of a symmetrized
// spectrum: the discrete null space only approximates span{1, v, |v|^2}, and
// near-null modes left in the complement would not decay.
inline NullProjector spectral_null_projector(const SpectrumReport& sp, const VelocityGrid& g, const WeightFunction* m) {
    if (!sp.symmetrized || sp.vectors.cols() == 0) throw DomainError("null projector needs a symmetrized spectrum with vectors");
    std::vector<Eigen::Index> nul;
    for (std::size_t i = 0; i < sp.values.size(); ++i)
        if (sp.classes[i] == EigClass::null) nul.push_back(Eigen::Index(i));
    const auto S = sp.vectors.rows();
    Eigen::MatrixXd Phi(S, Eigen::Index(nul.size()));
    for (std::size_t c = 0; c < nul.size(); ++c) Phi.col(Eigen::Index(c)) = sp.vectors.col(nul[c]).real();
    Field M = maxwellian_field(g);
    Field D = m ? Field(weight_field(g, *m).cwiseQuotient(M)) : Field(M.cwiseInverse());
    // g = D^{-1} h; left vectors of the symmetrized operator in h are W Phi
    NullProjector p;
    p.V = D.cwiseInverse().asDiagonal() * Phi;
    Eigen::MatrixXd U0 = (D.array() * l2m_weights(g).array()).matrix().asDiagonal() * Phi;
    Eigen::MatrixXd G = U0.transpose() * p.V;
    p.U = U0 * G.inverse().transpose();
    return p;
}

struct SemigroupRow {
    double t = 0, upper = 0, lower = 0;
};

struct SemigroupReport {
    std::vector<SemigroupRow> rows;
    double mu_hat = 0, C10 = 0, fit_from = 0;
    std::size_t violations = 0;
};

// ||exp(t A)(I - Pi0)|| in L^1 for t on a uniform ladder; A acts on g.
inline SemigroupReport semigroup_decay(const Eigen::MatrixXd& A, const VelocityGrid& g, const NullProjector& pi0,
                                       double dt, int steps, double fit_from) {
    SemigroupReport rep;
    rep.fit_from = fit_from;
    const auto S = A.rows();
    const Field& w = g.weights();
    Eigen::MatrixXd E = (dt * A).exp();
    Eigen::MatrixXd X = Eigen::MatrixXd::Identity(S, S) - pi0.V * pi0.U.transpose();  // I - Pi0
    Eigen::MatrixXd Q = X;                                                          // holds exp(tA) X
    std::vector<double> col0(static_cast<std::size_t>(S));
    for (Eigen::Index l = 0; l < S; ++l) col0[std::size_t(l)] = (w.array() * X.col(l).array().abs()).sum();
    for (int k = 0; k <= steps; ++k) {
        if (k > 0) Q = (E * Q).eval();
        SemigroupRow r;
        r.t = k * dt;
        for (Eigen::Index l = 0; l < S; ++l) {
            double c = (w.array() * Q.col(l).array().abs()).sum();
            r.upper = std::max(r.upper, c / w[l]);
            if (col0[std::size_t(l)] > 1e-14 * w[l]) r.lower = std::max(r.lower, c / col0[std::size_t(l)]);
        }
        rep.rows.push_back(r);
    }
    // log-linear fit of the upper curve over t >= fit_from
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (auto& r : rep.rows)
        if (r.t >= fit_from && r.upper > 0) {
            double y = std::log(r.upper);
            sx += r.t;
            sy += y;
            sxx += r.t * r.t;
            sxy += r.t * y;
            ++cnt;
        }
    if (cnt >= 2) rep.mu_hat = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    for (auto& r : rep.rows) rep.C10 = std::max(rep.C10, r.upper * std::exp(rep.mu_hat * r.t));
    for (auto& r : rep.rows)
        if (r.upper > rep.C10 * std::exp(-rep.mu_hat * r.t) * (1 + 1e-12)) ++rep.violations;
    return rep;
}

struct ResolventRow {
    std::complex<double> xi;
    double l1_weighted = 0;  // ||(L_m - xi)^{-1}(I - Pi0)||_{L^1}
    double l2m = 0;          // ||(L - xi)^{-1}|| on the orthogonal complement of the null space, L^2(M)
    double dist = 0;         // dist(xi, spectrum without the null cluster)
    bool in_sector = false;
};

struct ResolventReport {
    std::vector<ResolventRow> rows;
    double C8 = 0, C9 = 0, a = 0, b = 0;
    std::size_t violations_cmp = 0, violations_sector = 0;
    double worst_identity = 0;  // max |l2m * dist - 1|
    double mu = 0;
};

// arg(xi - mu) in [-3pi/4, 3pi/4] and Re xi <= -mu/2
inline bool in_sector(std::complex<double> xi, double mu) {
    return std::abs(std::arg(xi - mu)) <= 0.75 * pi + 1e-12 && xi.real() <= -mu / 2 + 1e-12;
}

// Sector samples: rays from mu at angles in (pi/2, 3pi/4] clipped to Re xi <= -mu/2, both half planes.
inline std::vector<std::complex<double>> sector_samples(double mu, double rmax, int per_ray) {
    std::vector<std::complex<double>> out;
    for (double ang : {0.75 * pi, 0.68 * pi, 0.6 * pi, 0.55 * pi})
        for (int k = 0; k < per_ray; ++k) {
            // Re(mu + r e^{i ang}) <= -mu/2  <=>  r >= 1.5 mu / -cos(ang)
            double rmin = 1.5 * mu / -std::cos(ang);
            double r = rmin * std::pow(rmax / rmin, double(k) / std::max(1, per_ray - 1));
            for (int sgn : {1, -1}) out.push_back(mu + r * std::polar(1.0, sgn * ang));
        }
    return out;
}

// Norm of (S - xi)^{-1} restricted by the orthogonal projector Pc, by power
// iteration on R^H R.
inline double restricted_inverse_norm(const Eigen::PartialPivLU<CMatrix>& lu, const CMatrix& Pc, int iters,
                                      std::mt19937_64& rng) {
    const auto n = Pc.rows();
    std::normal_distribution<double> N01;
    CVector x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = {N01(rng), N01(rng)};
    x = Pc * x;
    x.normalize();
    double est = 0;
    for (int it = 0; it < iters; ++it) {
        CVector y = lu.solve(x);
        CVector z = Pc * CVector(lu.transpose().solve(CVector(y.conjugate()))).conjugate();
        double ny = y.norm();
        est = ny;
        double nz = z.norm();
        if (nz == 0) break;
        x = z / nz;
    }
    return est;
}

// Am: weighted operator on g (L^1); Ssym: symmetric-frame matrix of the
// self-adjoint L; sigma: its spectrum without the null cluster.
inline ResolventReport resolvent_scan(const Eigen::MatrixXd& Am, const VelocityGrid& g, const NullProjector& pi0,
                                      const Eigen::MatrixXd& Ssym, const Eigen::MatrixXd& null_basis_sym,
                                      const std::vector<double>& sigma, const std::vector<std::complex<double>>& xis,
                                      double mu, int power_iters = 60, std::uint64_t seed = 1) {
    ResolventReport rep;
    rep.mu = mu;
    const auto S = Am.rows();
    const Field& w = g.weights();
    CMatrix X = (Eigen::MatrixXd::Identity(S, S) - pi0.V * pi0.U.transpose()).cast<std::complex<double>>();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(null_basis_sym);
    Eigen::MatrixXd Qn = qr.householderQ() * Eigen::MatrixXd::Identity(S, null_basis_sym.cols());
    CMatrix Pc = (Eigen::MatrixXd::Identity(S, S) - Qn * Qn.transpose()).cast<std::complex<double>>();
    std::mt19937_64 rng(seed);
    for (auto xi : xis) {
        ResolventRow r;
        r.xi = xi;
        r.in_sector = in_sector(xi, mu);
        CMatrix B = Am.cast<std::complex<double>>();
        B.diagonal().array() -= xi;
        Eigen::PartialPivLU<CMatrix> lu(B);
        CMatrix R = lu.solve(X);
        for (Eigen::Index l = 0; l < S; ++l) r.l1_weighted = std::max(r.l1_weighted, (w.array() * R.col(l).array().abs()).sum() / w[l]);
        CMatrix C = Ssym.cast<std::complex<double>>();
        C.diagonal().array() -= xi;
        Eigen::PartialPivLU<CMatrix> lu2(C);
        r.l2m = restricted_inverse_norm(lu2, Pc, power_iters, rng);
        r.dist = INFINITY;
        for (double s : sigma) r.dist = std::min(r.dist, std::abs(xi - s));
        rep.worst_identity = std::max(rep.worst_identity, std::abs(r.l2m * r.dist - 1));
        rep.rows.push_back(r);
    }
    // (C8, C9): slope from least squares over sector points, intercept raised to cover all
    std::vector<const ResolventRow*> sec;
    for (auto& r : rep.rows)
        if (r.in_sector) sec.push_back(&r);
    auto fit = [&](auto xsel, auto ysel, double& c0, double& c1) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto* r : sec) {
            double x = xsel(*r), y = ysel(*r);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double n = double(sec.size());
        c1 = n > 1 && (n * sxx - sx * sx) > 0 ? std::max(0.0, (n * sxy - sx * sy) / (n * sxx - sx * sx)) : 0;
        c0 = 0;
        for (auto* r : sec) c0 = std::max(c0, ysel(*r) - c1 * xsel(*r));
    };
    fit([](const ResolventRow& r) { return r.l2m; }, [](const ResolventRow& r) { return r.l1_weighted; }, rep.C8,
        rep.C9);
    fit([mu](const ResolventRow& r) { return 1.0 / std::abs(r.xi - mu); },
        [](const ResolventRow& r) { return r.l1_weighted; }, rep.a, rep.b);
    for (auto* r : sec) {
        if (r->l1_weighted > (rep.C8 + rep.C9 * r->l2m) * (1 + 1e-12)) ++rep.violations_cmp;
        if (r->l1_weighted > (rep.a + rep.b / std::abs(r->xi - mu)) * (1 + 1e-12)) ++rep.violations_sector;
    }
    return rep;
}

// Spectral projector onto an eigenvalue cluster of a non-symmetric A, built
// from right and left eigenvectors (sp from general mode with left vectors).
struct ClusterProjector {
    CMatrix V, Uh;  // Pi = V Uh
    CVector apply(const CVector& x) const { return V * (Uh * x); }
};

inline ClusterProjector cluster_projector(const SpectrumReport& sp, const std::vector<std::size_t>& members,
                                          const Field& W) {
    const auto S = sp.vectors.rows();
    ClusterProjector p;
    p.V.resize(S, Eigen::Index(members.size()));
    CMatrix U(S, Eigen::Index(members.size()));
    for (std::size_t c = 0; c < members.size(); ++c) {
        p.V.col(Eigen::Index(c)) = sp.vectors.col(Eigen::Index(members[c]));
        if (sp.symmetrized)
            U.col(Eigen::Index(c)) = W.cast<std::complex<double>>().cwiseProduct(sp.vectors.col(Eigen::Index(members[c])));
        else
            U.col(Eigen::Index(c)) = sp.left_vectors.col(Eigen::Index(members[c]));
    }
    CMatrix G = U.adjoint() * p.V;
    p.Uh = G.inverse() * U.adjoint();
    return p;
}

// Indices of eigenvalues within rel_tol of the leading non-null eigenvalue.
inline std::vector<std::size_t> gap_cluster(const SpectrumReport& sp, double rel_tol = 1e-2) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < sp.values.size(); ++i)
        if (sp.classes[i] != EigClass::null && std::abs(sp.values[i].real() + sp.gap) <= rel_tol * sp.gap)
            out.push_back(i);
    return out;
}

}  // namespace boltzgap
