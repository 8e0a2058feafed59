#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "boltzgap/dynamics.hpp"

using namespace boltzgap;

namespace {
struct Small2D {
    VelocityGrid g{2, 15, 4.0};
    CollisionKernelSpec k = make_kernel(2, 0.5, 1.0, AngularProfile::constant(), true);
    SphereQuadrature sq = SphereQuadrature::circle(32);
    LinearizedOperatorMatrix L = assemble_L(g, k, sq);
};
Small2D& small() {
    static Small2D s;
    return s;
}
SolverConfig short_run(double t_end) {
    SolverConfig c;
    c.scheme = SolverConfig::Scheme::rk4;
    c.dt = 0.02;
    c.t_end = t_end;
    return c;
}
}  // namespace

TEST(DecayFit, ExactExponential) {
    std::vector<double> t, y;
    for (int i = 0; i <= 50; ++i) {
        t.push_back(0.1 * i);
        y.push_back(std::exp(-2 * t.back()));
    }
    auto f = fit_decay_rate(t, y, 0, 5);
    EXPECT_NEAR(f.mu, 2.0, 1e-12);
    EXPECT_NEAR(f.C, 1.0, 1e-12);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    EXPECT_EQ(f.points, 51u);
    EXPECT_NEAR(f.decades, 10 / std::log(10.0), 1e-9);
}

TEST(DecayFit, NoisyExponential) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> N01;
    std::vector<double> t, y;
    for (int i = 0; i <= 200; ++i) {
        t.push_back(0.05 * i);
        y.push_back(3 * std::exp(-0.5 * t.back()) * (1 + 0.01 * N01(rng)));
    }
    auto f = fit_decay_rate(t, y, 0, 10);
    EXPECT_NEAR(f.mu, 0.5, 5e-3);
    EXPECT_NEAR(f.C, 3.0, 0.05);
    EXPECT_GT(f.r2, 0.99);
}

TEST(DecayFit, RejectsNonPositiveValues) {
    std::vector<double> t{0, 1, 2}, y{1, 0, 0.5};
    EXPECT_THROW(fit_decay_rate(t, y, 0, 2), DomainError);
    EXPECT_EQ(fit_decay_rate(t, y, 0, 2, 1e-300).points, 2u);
}

TEST(Gronwall, PureExponentialIsCertified) {
    std::vector<double> t, y;
    for (int i = 0; i <= 40; ++i) {
        t.push_back(0.1 * i);
        y.push_back(0.2 * std::exp(-0.8 * t.back()));
    }
    auto c = gronwall_certificate(t, y, 0.8, 1.0, 0.0);
    EXPECT_TRUE(c.finite);
    EXPECT_EQ(c.violations, 0u);
    EXPECT_NEAR(c.C12, 1.0, 1e-12);
    auto bad = gronwall_certificate(t, y, 1.5, 1.0, 0.0);
    EXPECT_GT(bad.violations, 0u);
}

TEST(InitialData, NearEquilibriumCarriesNoInvariants) {
    VelocityGrid g(2, 21, 5.0);
    Field f0 = near_equilibrium(g, 0.05, 3);
    Field M = maxwellian_field(g);
    Eigen::VectorXd mom = invariants(g).transpose() * g.weights().cwiseProduct(f0 - M);
    EXPECT_LE(mom.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR((f0.cwiseQuotient(M) - Field::Ones(M.size())).cwiseAbs().maxCoeff(), 0.05, 1e-12);
    EXPECT_GT(f0.minCoeff(), 0.0);
}

TEST(Moments, MaxwellianMoments3D) {
    VelocityGrid g(3, 25, 6.0);
    Field M = maxwellian_field(g);
    // s p = 1: int |v| exp(-|v|^2) dv = 2 pi
    auto rows = moment_table(g, M, 0.25, 4, 1.0);
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_NEAR(rows[0].m, std::pow(pi, 1.5), 1e-8);
    // the kink of |v| at the origin limits the trapezoid rule to O(h^2)
    EXPECT_NEAR(rows[8].m / (2 * pi), 1.0, 5e-3);
    EXPECT_FALSE(rows[8].flagged);
    EXPECT_NEAR(rows[0].z, rows[0].m / std::sqrt(pi), 1e-12);
    EXPECT_THROW(moment_table(g, M, 0.5, 4, 1.0), DomainError);
    EXPECT_NEAR(exp_moment(g, M, 0.0, 1.0), std::pow(pi, 1.5), 1e-8);
}

TEST(Povzner, EnergyExponentHasNoDefect) {
    auto k = hard_sphere_kernel(3);
    auto sq = SphereQuadrature::product(12, 16);
    auto rows = povzner_check(k, sq, 200, 0.5, {4.0, 6.0}, 1);
    // s p = 2: |v'|^2 + |v'_*|^2 = |v|^2 + |v_*|^2
    EXPECT_LE(rows[0].max_abs_K, 1e-12);
    EXPECT_NEAR(rows[0].alpha_full, 1.0, 1e-12);
    // s p = 3: strict gain of the pre-collisional sum is bounded by the total
    EXPECT_GT(rows[1].max_abs_K, 0.0);
    EXPECT_LT(rows[1].alpha_full, 1.0);
}

TEST(Evolver, MaxwellianStaysPut) {
    auto& s = small();
    Evolver ev(s.g, s.k, s.sq, short_run(0.2), Maxwellian::standard(2), &s.L);
    auto tr = ev.integrate(maxwellian_field(s.g));
    ASSERT_EQ(tr.rows.size(), 11u);
    for (auto& r : tr.rows) EXPECT_EQ(r.l1, 0.0);
    EXPECT_NEAR(tr.rows.back().mass, pi, 1e-6);
}

TEST(Evolver, ShiftedMaxwellianIsNearlyStationary) {
    auto& s = small();
    Maxwellian E = Maxwellian::standard(2);
    E.u = {0.3, -0.2, 0};
    Field f0 = maxwellian_field(s.g, E);
    Evolver ev(s.g, s.k, s.sq, short_run(0.2), Maxwellian::standard(2), &s.L);
    auto tr = ev.integrate(f0);
    double d0 = tr.rows.front().l1;
    for (auto& r : tr.rows) EXPECT_NEAR(r.l1, d0, 0.05 * d0);
    EXPECT_NEAR(tr.rows.back().mass, tr.rows.front().mass, 1e-10);
    EXPECT_NEAR(tr.rows.back().energy, tr.rows.front().energy, 1e-10);
}

TEST(Evolver, PerturbationRelaxes) {
    auto& s = small();
    Field f0 = near_equilibrium(s.g, 0.1, 5);
    auto c = short_run(1.0);
    c.snapshot_stride = 25;
    Evolver ev(s.g, s.k, s.sq, c, Maxwellian::standard(2), &s.L);
    auto tr = ev.integrate(f0);
    EXPECT_LT(tr.rows.back().l1, 0.5 * tr.rows.front().l1);
    EXPECT_LT(tr.rows.back().H, tr.rows.front().H);
    ASSERT_EQ(tr.snapshot_times.size(), 3u);
    EXPECT_DOUBLE_EQ(tr.snapshot_times.back(), 1.0);
}

TEST(Evolver, ExplicitStepBudget) {
    auto& s = small();
    auto c = short_run(0.1);
    c.dt = 0.5;
    EXPECT_THROW(Evolver(s.g, s.k, s.sq, c, Maxwellian::standard(2), &s.L), DomainError);
}

TEST(Bilinear, GammaPreservesInvariants) {
    auto& s = small();
    CollisionOperatorConfig cc;
    cc.scheme = CollisionOperatorConfig::Scheme::conservative;
    cc.pair_cutoff = 1e-12;
    CollisionOperator Q(s.g, s.k, s.sq, cc);
    auto m = WeightFunction::stretched_exponential(0.5, 0.2);
    Field mv = weight_field(s.g, m);
    Field M = maxwellian_field(s.g);
    Field x = (near_equilibrium(s.g, 0.1, 7) - M).cwiseQuotient(mv);
    Field mg = mv.cwiseProduct(x);
    Field G = Q.q_conservative(mg, mg).cwiseQuotient(mv);
    // int m Gamma(g, g) phi = int Q(mg, mg) phi
    Eigen::MatrixXd P = invariants(s.g);
    Eigen::VectorXd mom = P.transpose() * s.g.weights().cwiseProduct(mv.cwiseProduct(G));
    Eigen::VectorXd scale = P.cwiseAbs().transpose() * s.g.weights().cwiseProduct(mv.cwiseProduct(G.cwiseAbs()));
    for (Eigen::Index a = 0; a < mom.size(); ++a) EXPECT_LE(std::abs(mom[a]), 1e-3 * scale[a]);
    double C11 = bilinear_gamma_constant(Q, m, {x});
    EXPECT_TRUE(std::isfinite(C11));
    EXPECT_GT(C11, 0.0);
}
