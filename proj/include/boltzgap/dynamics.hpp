#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "collision.hpp"
#include "linearized.hpp"
#include "spectral.hpp"
#include "velocity_space.hpp"

namespace boltzgap {

struct SolverConfig {
    double dt = 0.05;
    double t_end = 3.0;
    enum class Scheme { rk4, lawson_rk4 } scheme = Scheme::lawson_rk4;
    bool project = true;
    int snapshot_stride = 0;  // 0: no snapshots
    double pair_cutoff = 1e-8;
    double negativity_tol = 1e-6;  // min f < -tol * max f aborts
    WeightFunction weight = WeightFunction::stretched_exponential(0.5, 0.2);
    WeightFunction exp_weight = WeightFunction::stretched_exponential(0.5, 0.2);  // exp moment uses exp(a|v|^s)
};

struct TrajectoryRow {
    double t = 0, l1 = 0, l1_m = 0, l1_m2 = 0, H = 0, D = 0, mass = 0, energy = 0, exp_moment = 0, correction = 0;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    std::vector<double> snapshot_times;
    std::vector<Field> snapshots;
    Maxwellian equilibrium;
    double max_correction = 0;
};

inline double exp_moment(const VelocityGrid& g, const Field& f, double a, double s) {
    double acc = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        acc += g.weight(i) * f[Eigen::Index(i)] * std::exp(a * std::pow(norm(g.node(i)), s));
    return acc;
}

// Right-hand side around a Maxwellian E: f = E + g,
//   Q(f, f) = E L(g/E) + Q(g, g),  Q(E, E) = 0.
// Both parts use the conservative weak form; a prebuilt L is conjugated to the
// f variable instead.
class Evolver {
public:
    Evolver(const VelocityGrid& g, const CollisionKernelSpec& k, const SphereQuadrature& sq, SolverConfig cfg,
            const Maxwellian& expansion, const LinearizedOperatorMatrix* prebuilt = nullptr, int order = 2)
        : g_(g), cfg_(cfg), E_(expansion), collide_(g, k, sq, make_cfg(cfg, order)) {
        Field Ev = maxwellian_field(g, E_);
        Ev_ = Ev;
        if (prebuilt)
            B_ = Ev.asDiagonal() * prebuilt->full() * Ev.cwiseInverse().asDiagonal();
        else
            B_ = collide_.linear_conservative(Ev);
        max_rate_ = B_.diagonal().cwiseAbs().maxCoeff();
        if (cfg_.scheme == SolverConfig::Scheme::rk4 && cfg_.dt > 0.5 / max_rate_)
            throw DomainError("solver.dt exceeds the explicit stability bound 0.5/max(nu) = " +
                              std::to_string(0.5 / max_rate_));
        if (cfg_.scheme == SolverConfig::Scheme::lawson_rk4) {
            Eh_ = (0.5 * cfg_.dt * B_).exp();
            Ef_ = Eh_ * Eh_;
        }
    }

    const Eigen::MatrixXd& linear_part() const { return B_; }
    double max_rate() const { return max_rate_; }

    Field quadratic(const Field& gp) { return collide_.q_conservative(gp, gp); }
    Field rhs(const Field& gp) { return B_ * gp + quadratic(gp); }

    Trajectory integrate(const Field& f0) {
        Trajectory tr;
        tr.equilibrium = E_;
        Field gp = f0 - Ev_;
        Eigen::MatrixXd P = invariants(g_);
        Eigen::VectorXd target = P.transpose() * g_.weights().cwiseProduct(gp);
        Field minv = weight_field(g_, cfg_.weight).cwiseInverse();
        Field minv2 = minv.cwiseProduct(minv);
        const double dt = cfg_.dt;
        const int steps = int(std::ceil(cfg_.t_end / dt - 1e-9));
        for (int n = 0; n <= steps; ++n) {
            Field f = Ev_ + gp;
            check(f, n * dt);
            Field qn = quadratic(gp);
            Field full = B_ * gp + qn;
            TrajectoryRow r;
            r.t = n * dt;
            r.l1 = l1_norm(g_, gp);
            r.l1_m = weighted_norm(g_, gp, minv, 1);
            r.l1_m2 = weighted_norm(g_, gp, minv2, 1);
            r.H = h_functional(g_, f.cwiseMax(0.0));
            CollisionOperator::Entropy e{};
            for (Eigen::Index i = 0; i < f.size(); ++i)
                if (f[i] > 0) e.D -= g_.weight(std::size_t(i)) * full[i] * std::log(f[i]);
            r.D = e.D;
            auto mo = moments(g_, f);
            r.mass = mo.mass;
            r.energy = mo.energy;
            r.exp_moment = exp_moment(g_, f, cfg_.exp_weight.a, cfg_.exp_weight.s);
            if (cfg_.snapshot_stride > 0 && (n % cfg_.snapshot_stride == 0 || n == steps)) {
                tr.snapshot_times.push_back(r.t);
                tr.snapshots.push_back(f);
            }
            if (n == steps) {
                tr.rows.push_back(r);
                break;
            }
            Field next = cfg_.scheme == SolverConfig::Scheme::rk4 ? step_rk4(gp, full) : step_lawson(gp, qn);
            if (cfg_.project) {
                double c = 0;
                next = project_invariants(g_, next, &c, &target);
                r.correction = c;
                tr.max_correction = std::max(tr.max_correction, c);
            }
            tr.rows.push_back(r);
            gp = next;
        }
        return tr;
    }

private:
    static CollisionOperatorConfig make_cfg(const SolverConfig& c, int order) {
        CollisionOperatorConfig o;
        o.scheme = CollisionOperatorConfig::Scheme::conservative;
        o.order = order;
        o.pair_cutoff = c.pair_cutoff;
        o.project = false;
        return o;
    }

    void check(const Field& f, double t) const {
        if (!f.allFinite()) throw NumericalError("non-finite values at t = " + std::to_string(t));
        if (f.minCoeff() < -cfg_.negativity_tol * f.maxCoeff())
            throw NumericalError("negative mass beyond tolerance at t = " + std::to_string(t));
    }

    Field step_rk4(const Field& u, const Field& k1) {
        const double h = cfg_.dt;
        Field k2 = rhs(u + 0.5 * h * k1);
        Field k3 = rhs(u + 0.5 * h * k2);
        Field k4 = rhs(u + h * k3);
        return u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }

    // integrating factor RK4 with the exact linear flow
    Field step_lawson(const Field& u, const Field& k1) {
        const double h = cfg_.dt;
        Field eu = Eh_ * u;
        Field k2 = quadratic(Eh_ * (u + 0.5 * h * k1));
        Field k3 = quadratic(eu + 0.5 * h * k2);
        Field k4 = quadratic(Ef_ * u + h * (Eh_ * k3));
        return Ef_ * u + h / 6 * (Ef_ * k1 + 2 * (Eh_ * (k2 + k3)) + k4);
    }

    const VelocityGrid& g_;
    SolverConfig cfg_;
    Maxwellian E_;
    CollisionOperator collide_;
    Field Ev_;
    Eigen::MatrixXd B_, Eh_, Ef_;
    double max_rate_ = 0;
};

struct DecayFit {
    double mu = 0, C = 0, r2 = 0, decades = 0;
    std::size_t points = 0;
};

// log y ~ log C - mu t over t in [t0, t1] with y > floor
inline DecayFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y, double t0, double t1,
                               double floor = 0) {
    DecayFit f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, ymin = INFINITY, ymax = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (floor <= 0 && t[i] >= t0 && t[i] <= t1 && !(y[i] > 0))
            throw DomainError("fit_decay_rate: nonpositive value in the fit window");
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] >= t0 && t[i] <= t1 && y[i] > floor) {
            double ly = std::log(y[i]);
            sx += t[i];
            sy += ly;
            sxx += t[i] * t[i];
            sxy += t[i] * ly;
            ymin = std::min(ymin, y[i]);
            ymax = std::max(ymax, y[i]);
            ++n;
        }
    f.points = n;
    if (n < 2) return f;
    double d = n * sxx - sx * sx;
    double slope = (n * sxy - sx * sy) / d;
    double icpt = (sy - slope * sx) / n;
    f.mu = -slope;
    f.C = std::exp(icpt);
    double ss_tot = 0, ss_res = 0, ybar = sy / n;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] >= t0 && t[i] <= t1 && y[i] > floor) {
            double ly = std::log(y[i]);
            ss_tot += (ly - ybar) * (ly - ybar);
            ss_res += (ly - icpt - slope * t[i]) * (ly - icpt - slope * t[i]);
        }
    f.r2 = ss_tot > 0 ? 1 - ss_res / ss_tot : 1;
    f.decades = std::log10(ymax / ymin);
    return f;
}

// Near-equilibrium data f0 = M + eps M exp(-|v|^2/4) (p(v) - sum c_a phi_a)
// with p a random polynomial of degree <= 3 and c chosen so that the
// perturbation carries no mass, momentum or energy; scaled so that
// max |f0/M - 1| = eps.
inline Field near_equilibrium(const VelocityGrid& g, double eps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    const int N = g.dimension();
    std::vector<std::array<int, 3>> monos;
    for (int a = 0; a <= 3; ++a)
        for (int b = 0; b <= 3 - a; ++b)
            for (int c = 0; c <= (N == 3 ? 3 - a - b : 0); ++c) monos.push_back({a, b, c});
    std::vector<double> coef;
    for (std::size_t i = 0; i < monos.size(); ++i) coef.push_back(N01(rng));
    Field M = maxwellian_field(g);
    Field env = g.sample([](const Vec& v) { return std::exp(-norm2(v) / 4); });
    Field p = g.sample([&](const Vec& v) {
        double s = 0;
        for (std::size_t i = 0; i < monos.size(); ++i)
            s += coef[i] * std::pow(v[0], monos[i][0]) * std::pow(v[1], monos[i][1]) * std::pow(v[2], monos[i][2]);
        return s;
    });
    Eigen::MatrixXd P = invariants(g);
    Field base = M.cwiseProduct(env);
    Eigen::MatrixXd WP = g.weights().asDiagonal() * P;
    Eigen::MatrixXd G = WP.transpose() * base.asDiagonal() * P;
    Eigen::VectorXd rhs = WP.transpose() * base.cwiseProduct(p);
    Eigen::VectorXd c = G.ldlt().solve(rhs);
    Field h = env.cwiseProduct(p - P * c);
    h *= eps / h.cwiseAbs().maxCoeff();
    return M + M.cwiseProduct(h);
}

// Mixture of `parts` random Maxwellians (positive everywhere).
inline Field random_positive_field(const VelocityGrid& g, std::mt19937_64& rng, int parts = 3) {
    std::uniform_real_distribution<double> U(0, 1);
    Field f = Field::Zero(Eigen::Index(g.size()));
    for (int p = 0; p < parts; ++p) {
        Maxwellian m;
        m.dim = g.dimension();
        m.rho = 0.5 + U(rng);
        m.T = 0.35 + 0.35 * U(rng);
        for (int d = 0; d < g.dimension(); ++d) m.u[d] = 1.2 * (U(rng) - 0.5);
        f += maxwellian_field(g, m);
    }
    return f;
}

struct MomentRow {
    double p = 0, m = 0, z = 0, tail_fraction = 0;
    bool flagged = false;
};

// m_p = int f |v|^{sp}, z_p = m_p / Gamma(p + 1/2), p = 0, 1/2, ..., p_max
inline std::vector<MomentRow> moment_table(const VelocityGrid& g, const Field& f, double s, double p_max,
                                           double gamma, double tail_limit = 1e-2) {
    if (!(s > 0 && s < gamma / 2)) throw DomainError("moment exponent s must lie in (0, gamma/2)");
    auto shell = g.outer_shell(0.2);
    std::vector<MomentRow> out;
    for (double p = 0; p <= p_max + 1e-12; p += 0.5) {
        MomentRow r;
        r.p = p;
        double tail = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double c = g.weight(i) * f[Eigen::Index(i)] * std::pow(norm(g.node(i)), s * p);
            r.m += c;
            if (shell[i]) tail += std::abs(c);
        }
        r.z = r.m / std::tgamma(p + 0.5);
        r.tail_fraction = r.m != 0 ? tail / std::abs(r.m) : 0;
        r.flagged = r.tail_fraction > tail_limit;
        out.push_back(r);
    }
    return out;
}

struct PovznerRow {
    double p = 0, alpha = 0, alpha_full = 0, max_abs_K = 0;
};

// K_p = 1/2 int (|v'|^{sp} + |v'_*|^{sp} - |v|^{sp} - |v_*|^{sp}) b dsigma on random pairs.
// alpha      = sup (K_p + |v|^{sp} + |v_*|^{sp}) / (|v|^2 + |v_*|^2)^{sp/2}
// alpha_full = sup int (|v'|^{sp} + |v'_*|^{sp}) b dsigma / (|v|^2 + |v_*|^2)^{sp/2}
inline std::vector<PovznerRow> povzner_check(const CollisionKernelSpec& k, const SphereQuadrature& sq,
                                             std::size_t samples, double s, const std::vector<double>& ps,
                                             std::uint64_t seed, double radius = 5.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01;
    std::uniform_real_distribution<double> U(0, 1);
    const int N = k.dimension;
    std::vector<PovznerRow> out;
    for (double p : ps) out.push_back({p, 0, 0, 0});
    std::vector<Vec> sig;
    auto rnd_vec = [&]() {
        Vec x{0, 0, 0};
        for (int d = 0; d < N; ++d) x[d] = N01(rng);
        double r = radius * std::pow(U(rng), 1.0 / N);
        return (r / norm(x)) * x;
    };
    for (std::size_t t = 0; t < samples; ++t) {
        Vec v = rnd_vec(), vs = rnd_vec();
        if (t % 10 == 0) vs = Vec{0, 0, 0};  // include the extremal configuration
        Vec u = v - vs;
        double ul = norm(u);
        if (ul < 1e-12) continue;
        sq.directions((1.0 / ul) * u, sig);
        Vec mid = 0.5 * (v + vs);
        double E = norm2(v) + norm2(vs);
        for (auto& row : out) {
            double e = s * row.p;
            double gainp = 0, ell = 0;
            for (std::size_t q = 0; q < sq.size(); ++q) {
                double bw = sq.w[q] * k.b(sq.cos_t[q]);
                Vec vp = mid + (0.5 * ul) * sig[q], vps = mid - (0.5 * ul) * sig[q];
                gainp += bw * (std::pow(norm(vp), e) + std::pow(norm(vps), e));
                ell += bw;
            }
            double pre = std::pow(norm(v), e) + std::pow(norm(vs), e);
            double K = 0.5 * (gainp - ell * pre);
            double scale = std::pow(E, e / 2);
            row.alpha = std::max(row.alpha, (K + pre) / scale);
            row.alpha_full = std::max(row.alpha_full, gainp / scale);
            row.max_abs_K = std::max(row.max_abs_K, std::abs(K) / scale);
        }
    }
    return out;
}

struct GronwallCheck {
    double C12 = 0;
    std::size_t violations = 0;  // of y(t) <= a e^{-mu t} y0 + b int e^{-mu(t-s)} y^{3/2}
    bool finite = false;
};

inline GronwallCheck gronwall_certificate(const std::vector<double>& t, const std::vector<double>& y, double mu,
                                          double a, double b) {
    GronwallCheck c;
    if (y.empty() || !(y[0] > 0)) return c;
    double integral = 0;  // int_0^t e^{mu s} y(s)^{3/2} ds, trapezoid
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0)
            integral += 0.5 * (t[i] - t[i - 1]) *
                        (std::exp(mu * t[i]) * std::pow(y[i], 1.5) + std::exp(mu * t[i - 1]) * std::pow(y[i - 1], 1.5));
        double bound = std::exp(-mu * t[i]) * (a * y[0] + b * integral);
        if (y[i] > bound * (1 + 1e-9)) ++c.violations;
        c.C12 = std::max(c.C12, y[i] * std::exp(mu * t[i]) / y[0]);
    }
    c.finite = std::isfinite(c.C12);
    return c;
}

// C11 estimate: max ||Gamma(g,g)||_1 / (||g||_1^{3/2} ||g||_{L^1(m^{-1})}^{1/2}),
// Gamma(g, g) = m^{-1} Q(mg, mg).
inline double bilinear_gamma_constant(CollisionOperator& Q, const WeightFunction& m, const std::vector<Field>& gs) {
    const VelocityGrid& g = Q.grid();
    Field mv = weight_field(g, m);
    double best = 0;
    for (const auto& x : gs) {
        Field mg = mv.cwiseProduct(x);
        Field G = Q.q_conservative(mg, mg).cwiseQuotient(mv);
        double num = l1_norm(g, G);
        double den = std::pow(l1_norm(g, x), 1.5) * std::sqrt(weighted_norm(g, x, mv.cwiseInverse(), 1));
        best = std::max(best, num / den);
    }
    return best;
}

struct ProfileReport {
    std::vector<double> t, leading, remainder;  // L^1 norms of phi_1 and R
    DecayFit leading_fit, remainder_fit;
    double max_leading_l2m_inv = 0;  // largest ||phi_1||_{L^2(M^{-1})}
};

// f - M = M h split into phi_1 = M Pi_1 h and R = M (h - Pi_1 h) with Pi_1 the
// spectral projector of the gap cluster; h series given at times t.
inline ProfileReport asymptotic_profile(const std::vector<double>& t, const std::vector<Field>& h,
                                        const ClusterProjector& P, const VelocityGrid& g, double fit_from,
                                        double floor = 1e-13) {
    ProfileReport r;
    Field M = maxwellian_field(g);
    for (std::size_t i = 0; i < t.size(); ++i) {
        Field ph = P.apply(h[i].cast<std::complex<double>>()).real();
        Field lead = M.cwiseProduct(ph), rem = M.cwiseProduct(h[i] - ph);
        r.t.push_back(t[i]);
        r.leading.push_back(l1_norm(g, lead));
        r.remainder.push_back(l1_norm(g, rem));
        r.max_leading_l2m_inv = std::max(r.max_leading_l2m_inv, weighted_norm(g, lead, M.cwiseInverse(), 2));
    }
    double t1 = t.empty() ? 0 : t.back();
    r.leading_fit = fit_decay_rate(r.t, r.leading, fit_from, t1, floor);
    r.remainder_fit = fit_decay_rate(r.t, r.remainder, fit_from, t1, floor);
    return r;
}

}  // namespace boltzgap
