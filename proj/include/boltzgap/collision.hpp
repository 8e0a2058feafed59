#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gain_stencil.hpp"
#include "interpolation.hpp"
#include "kernels.hpp"
#include "velocity_space.hpp"

namespace boltzgap {

struct CollisionOperatorConfig {
    int order = 2;
    // pointwise: Q+ evaluated at nodes with interpolated post-collisional values.
    // conservative: weak form, gain mass deposited back on the lattice.
    enum class Scheme { pointwise, conservative } scheme = Scheme::pointwise;
    // pointwise only: interpolate f/M (then multiply by M) or f itself
    enum class Reference { plain, maxwellian } reference = Reference::maxwellian;
    bool project = true;
    double pair_cutoff = 0;  // conservative only: skip pairs with |f_a g_b| below cutoff * max|f| max|g|
    double loss_sign = 1;    // -1 injects a sign error in Q- (mutation smoke test)
};

struct CollisionResult {
    Field q, gain, loss;
    Eigen::VectorXd defects_before, defects_after;  // per invariant, relative
    double correction_norm = 0;                      // L^1 norm of the projection shift
};

// Minimal L^2(M^{-1}) shift making the N+2 invariant moments of q vanish.
inline Field project_invariants(const VelocityGrid& g, const Field& q, double* shift_l1 = nullptr,
                                const Eigen::VectorXd* target = nullptr) {
    Eigen::MatrixXd P = invariants(g);
    Field M = maxwellian_field(g);
    Eigen::MatrixXd WP = g.weights().asDiagonal() * P;
    Eigen::VectorXd mom = WP.transpose() * q;
    if (target) mom -= *target;
    Eigen::MatrixXd G = WP.transpose() * M.asDiagonal() * P;
    Eigen::VectorXd c = G.ldlt().solve(mom);
    Field shift = -(M.array() * (P * c).array()).matrix();
    if (shift_l1) *shift_l1 = l1_norm(g, shift);
    return q + shift;
}

class CollisionOperator {
public:
    CollisionOperator(const VelocityGrid& g, const CollisionKernelSpec& k, const SphereQuadrature& sq,
                      CollisionOperatorConfig cfg = {})
        : g_(g), k_(k), sq_(sq), cfg_(cfg) {
        if (k.dimension != g.dimension() || sq.dimension != g.dimension())
            throw DomainError("kernel, sphere and grid dimensions differ");
        if (!g.uniform()) throw DomainError("collision operator needs a uniform grid");
        ell_ = sq.angular_mass([&](double x) { return k.b(x); });
        bw_.resize(sq.size());
        for (std::size_t q = 0; q < sq.size(); ++q) bw_[q] = sq.w[q] * k.b(sq.cos_t[q]);
        M_ = maxwellian_field(g);
    }

    const CollisionOperatorConfig& config() const { return cfg_; }
    CollisionOperatorConfig& config() { return cfg_; }
    double ell_quad() const { return ell_; }

    // sum_j w_j Phi(|v_i - v_j|) g_j ell
    Field loss_rate(const Field& gfield) const {
        const auto S = static_cast<Eigen::Index>(g_.size());
        Field out = Field::Zero(S);
        const Field& w = g_.weights();
        for (Eigen::Index i = 0; i < S; ++i) {
            double s = 0;
            for (Eigen::Index j = 0; j < S; ++j)
                if (i != j) s += w[j] * k_.phi(norm(g_.node(std::size_t(i)) - g_.node(std::size_t(j)))) * gfield[j];
            out[i] = s * ell_;
        }
        return out;
    }

    Field q_minus(const Field& gfield, const Field& f) const {
        return cfg_.loss_sign * f.cwiseProduct(loss_rate(gfield));
    }

    Field collision_frequency() const { return loss_rate(M_); }

    // pointwise Q+(g, f)(v_i) = sum_j w_j Phi sum_k w_k b_k g(v'_*) f(v')
    Field q_plus_pointwise(const Field& gfield, const Field& f) const {
        const auto S = static_cast<Eigen::Index>(g_.size());
        const Field& w = g_.weights();
        const bool rel = cfg_.reference == CollisionOperatorConfig::Reference::maxwellian;
        Field gi = rel ? Field(gfield.array() / M_.array()) : gfield;
        Field fi = rel ? Field(f.array() / M_.array()) : f;
        Field out = Field::Zero(S);
        std::vector<Vec> sig;
        for (Eigen::Index i = 0; i < S; ++i) {
            const Vec& v = g_.node(std::size_t(i));
            double acc = 0;
            for (Eigen::Index j = 0; j < S; ++j) {
                if (i == j) continue;
                const Vec& vs = g_.node(std::size_t(j));
                Vec u = v - vs;
                double ul = norm(u);
                sq_.directions((1.0 / ul) * u, sig);
                Vec mid = 0.5 * (v + vs);
                double inner = 0;
                for (std::size_t q = 0; q < sq_.size(); ++q) {
                    if (bw_[q] == 0) continue;
                    Vec vp = mid + (0.5 * ul) * sig[q], vps = mid - (0.5 * ul) * sig[q];
                    inner += bw_[q] * interpolate(g_, fi, vp, cfg_.order) * interpolate(g_, gi, vps, cfg_.order);
                }
                // relative to M: M(v')M(v'_*) = M(v)M(v_*)
                if (rel) inner *= M_[i] * M_[j];
                acc += w[j] * k_.phi(ul) * inner;
            }
            out[i] = acc;
        }
        return out;
    }

    // weak form; gain of pair (a, b) is deposited around v'_{ab} with the
    // transposed interpolation stencil. Returns Q+(g, f) - Q-(g, f).
    Field q_conservative(const Field& gfield, const Field& f, Field* gain_out = nullptr, Field* loss_out = nullptr) {
        if (!table_) table_ = std::make_unique<GainStencilTable>(
                         g_, sq_, [this](double x) { return k_.b(x); }, cfg_.order, GainPoints::prime_only);
        const auto S = static_cast<Eigen::Index>(g_.size());
        const Field& w = g_.weights();
        std::vector<Eigen::Index> order_g(S);
        std::iota(order_g.begin(), order_g.end(), 0);
        std::sort(order_g.begin(), order_g.end(),
                  [&](auto x, auto y) { return std::abs(gfield[x]) > std::abs(gfield[y]); });
        double fmax = f.cwiseAbs().maxCoeff(), gmax = gfield.cwiseAbs().maxCoeff();
        double thr = cfg_.pair_cutoff * fmax * gmax;
        Field gain = Field::Zero(S), loss = Field::Zero(S);
        for (Eigen::Index a = 0; a < S; ++a) {
            double fa = f[a];
            if (fa == 0) continue;
            auto pa = g_.coords(std::size_t(a));
            for (Eigen::Index b : order_g) {
                double gb = gfield[b];
                if (std::abs(fa * gb) <= thr || gb == 0) break;
                if (a == b) continue;
                auto pb = g_.coords(std::size_t(b));
                double c = w[a] * w[b] * k_.phi(norm(g_.node(std::size_t(a)) - g_.node(std::size_t(b)))) * fa * gb;
                const auto& st = table_->get(pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2]);
                apply_stencil(st, g_, pa, std::size_t(a), c, gain.data());
                loss[a] += cfg_.loss_sign * c * ell_;
            }
        }
        gain.array() /= w.array();
        loss.array() /= w.array();
        if (gain_out) *gain_out = gain;
        if (loss_out) *loss_out = loss;
        return gain - loss;
    }

    // Matrix of g -> Q(E, g) + Q(g, E) in the same weak form as q_conservative.
    // Nothing is divided by E, so tails far below E stay well conditioned.
    Eigen::MatrixXd linear_conservative(const Field& E) {
        if (!table_) table_ = std::make_unique<GainStencilTable>(
                         g_, sq_, [this](double x) { return k_.b(x); }, cfg_.order, GainPoints::prime_only);
        const auto S = static_cast<Eigen::Index>(g_.size());
        const Field& w = g_.weights();
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(S, S);
        for (Eigen::Index a = 0; a < S; ++a) {
            auto pa = g_.coords(std::size_t(a));
            for (Eigen::Index b = 0; b < S; ++b) {
                if (a == b) continue;
                auto pb = g_.coords(std::size_t(b));
                double c = w[a] * w[b] * k_.phi(norm(g_.node(std::size_t(a)) - g_.node(std::size_t(b))));
                const auto& st = table_->get(pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2]);
                // pair weight E_a g_b + g_a E_b
                apply_stencil(st, g_, pa, std::size_t(a), c * E[a], B.col(b).data());
                B(a, b) -= cfg_.loss_sign * c * E[a] * ell_;
                apply_stencil(st, g_, pa, std::size_t(a), c * E[b], B.col(a).data());
                B(a, a) -= cfg_.loss_sign * c * E[b] * ell_;
            }
        }
        return w.cwiseInverse().asDiagonal() * B;
    }

    // Q(f, f) with invariant defects before/after projection
    CollisionResult q(const Field& f) {
        CollisionResult r;
        Field gain, loss;
        if (cfg_.scheme == CollisionOperatorConfig::Scheme::conservative) {
            r.q = q_conservative(f, f, &gain, &loss);
        } else {
            gain = q_plus_pointwise(f, f);
            loss = q_minus(f, f);
            r.q = gain - loss;
        }
        r.defects_before = conservation_defects(r.q, gain, loss);
        r.gain = gain;
        r.loss = loss;
        if (cfg_.project) {
            r.q = project_invariants(g_, r.q, &r.correction_norm);
            r.defects_after = conservation_defects(r.q, gain, loss);
        } else {
            r.defects_after = r.defects_before;
        }
        return r;
    }

    // |int Q phi| / int (|Q+| + |Q-|)|phi| for phi in 1, v_1..v_N, |v|^2
    Eigen::VectorXd conservation_defects(const Field& q, const Field& gain, const Field& loss) const {
        Eigen::MatrixXd P = invariants(g_);
        Field wv = g_.weights();
        Eigen::VectorXd num = P.transpose() * wv.cwiseProduct(q);
        Eigen::VectorXd den =
            P.cwiseAbs().transpose() * wv.cwiseProduct(gain.cwiseAbs() + loss.cwiseAbs());
        Eigen::VectorXd out(num.size());
        for (Eigen::Index a = 0; a < num.size(); ++a) out[a] = std::abs(num[a]) / std::max(den[a], 1e-300);
        return out;
    }

    struct Entropy {
        double D = 0;
        std::size_t clamped = 0;
    };

    // D(f) = -sum w Q(f,f) log f; nodes with f <= floor use log(floor)
    Entropy entropy_production(const Field& f, const Field& qf, double floor = 1e-300) const {
        Entropy e;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            double x = f[i];
            if (x <= floor) {
                ++e.clamped;
                x = floor;
            }
            e.D -= g_.weight(std::size_t(i)) * qf[i] * std::log(x);
        }
        return e;
    }
    Entropy entropy_production(const Field& f) {
        auto r = q(f);
        return entropy_production(f, r.q);
    }

    const VelocityGrid& grid() const { return g_; }
    const CollisionKernelSpec& kernel() const { return k_; }
    const SphereQuadrature& sphere() const { return sq_; }

private:
    const VelocityGrid& g_;
    CollisionKernelSpec k_;
    const SphereQuadrature& sq_;
    CollisionOperatorConfig cfg_;
    double ell_ = 0;
    std::vector<double> bw_;
    Field M_;
    std::unique_ptr<GainStencilTable> table_;
};

struct FrequencyBounds {
    double nu0 = 0, n0 = 0, n1 = 0;
};

// nu0 = min nu; n0, n1 bound nu / <v>^gamma from below and above
inline FrequencyBounds frequency_bounds(const VelocityGrid& g, const Field& nu, double gamma) {
    FrequencyBounds b;
    b.nu0 = nu.minCoeff();
    b.n0 = INFINITY;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double r = nu[Eigen::Index(i)] / std::pow(japanese(norm(g.node(i))), gamma);
        b.n0 = std::min(b.n0, r);
        b.n1 = std::max(b.n1, r);
    }
    return b;
}

}  // namespace boltzgap
