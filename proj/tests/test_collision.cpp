#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "boltzgap/collision.hpp"
#include "boltzgap/dynamics.hpp"
#include "boltzgap/linearized.hpp"

using namespace boltzgap;

namespace {
struct Small2D {
    VelocityGrid g{2, 15, 4.0};
    CollisionKernelSpec k = make_kernel(2, 0.5, 1.0, AngularProfile::constant(), true);
    SphereQuadrature sq = SphereQuadrature::circle(32);
};
Small2D& small() {
    static Small2D s;
    return s;
}
CollisionOperatorConfig conservative(double loss_sign = 1) {
    CollisionOperatorConfig c;
    c.scheme = CollisionOperatorConfig::Scheme::conservative;
    c.pair_cutoff = 1e-12;
    c.loss_sign = loss_sign;
    return c;
}
}  // namespace

TEST(Collision, GainOfMaxwellianIsFrequencyTimesM) {
    auto& s = small();
    CollisionOperator Q(s.g, s.k, s.sq);
    Field M = maxwellian_field(s.g);
    Field gain = Q.q_plus_pointwise(M, M);
    Field nuM = Q.collision_frequency().cwiseProduct(M);
    // f/M = 1 is reproduced except where stencils are cut by the box edge
    for (std::size_t i = 0; i < s.g.size(); ++i)
        if (norm(s.g.node(i)) <= 1.5) EXPECT_NEAR(gain[Eigen::Index(i)], nuM[Eigen::Index(i)], 1e-6 * nuM[Eigen::Index(i)] + 1e-14);
}

TEST(Collision, FrequencyAtOriginHardSphere3D) {
    VelocityGrid g(3, 15, 5.0);
    auto k = hard_sphere_kernel(3);
    auto sq = SphereQuadrature::product(8, 8);
    CollisionOperator Q(g, k, sq);
    Field nu = Q.collision_frequency();
    double nu0 = nu[Eigen::Index(g.index(7, 7, 7))];
    // int |v_*| exp(-|v_*|^2) dv_* = 2 pi
    EXPECT_NEAR(nu0 / (2 * pi), 1.0, 0.02);
    EXPECT_NEAR(nu.minCoeff(), nu0, 1e-12);
}

TEST(Collision, FrequencyGrowsRadially) {
    auto& s = small();
    CollisionOperator Q(s.g, s.k, s.sq);
    Field nu = Q.collision_frequency();
    // along the first axis from the centre outward
    for (int a = 8; a < 15; ++a)
        EXPECT_GT(nu[Eigen::Index(s.g.index(a, 7))], nu[Eigen::Index(s.g.index(a - 1, 7))]);
}

TEST(Collision, MaxwellianIsStationary) {
    auto& s = small();
    CollisionOperator Q(s.g, s.k, s.sq, conservative());
    Field M = maxwellian_field(s.g);
    auto r = Q.q(M);
    double scale = r.gain.cwiseAbs().maxCoeff();
    EXPECT_LE(r.q.cwiseAbs().maxCoeff(), 0.05 * scale);
}

TEST(Collision, ConservesInvariantsOnRandomFields) {
    auto& s = small();
    CollisionOperator Q(s.g, s.k, s.sq, conservative());
    std::mt19937_64 rng(11);
    for (int t = 0; t < 3; ++t) {
        Field f = random_positive_field(s.g, rng, 2);
        auto r = Q.q(f);
        EXPECT_LE(r.defects_before.maxCoeff(), 1e-3);
        EXPECT_LE(r.defects_after.maxCoeff(), 1e-10);
        auto e = Q.entropy_production(f, r.q);
        EXPECT_GT(e.D, 0.0);
    }
}

TEST(Collision, SignErrorInLossIsCaught) {
    auto& s = small();
    CollisionOperator Q(s.g, s.k, s.sq, conservative(-1));
    std::mt19937_64 rng(11);
    auto r = Q.q(random_positive_field(s.g, rng, 2));
    EXPECT_GT(r.defects_before[0], 0.5);
}

TEST(Collision, ProjectionRemovesInvariantMoments) {
    auto& s = small();
    Field q = s.g.sample([](const Vec& v) { return std::exp(-norm2(v)) * (1 + v[0] + norm2(v)); });
    double shift = 0;
    Field p = project_invariants(s.g, q, &shift);
    Eigen::VectorXd mom = invariants(s.g).transpose() * s.g.weights().cwiseProduct(p);
    EXPECT_LE(mom.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(shift, 0.0);
}

TEST(Collision, FrequencyBoundsBracketGrowth) {
    auto& s = small();
    CollisionOperator Q(s.g, s.k, s.sq);
    auto b = frequency_bounds(s.g, Q.collision_frequency(), s.k.gamma);
    EXPECT_GT(b.nu0, 0.0);
    EXPECT_LE(b.n0, b.n1);
    EXPECT_GT(b.n0, 0.0);
}

TEST(Collision, LinearWeakFormMatchesBilinear) {
    auto& s = small();
    auto cfg = conservative();
    cfg.pair_cutoff = 0;
    cfg.project = false;
    CollisionOperator Q(s.g, s.k, s.sq, cfg);
    Field M = maxwellian_field(s.g);
    Eigen::MatrixXd B = Q.linear_conservative(M);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    Field x = s.g.sample([&](const Vec&) { return nd(rng); });
    Field y = Q.q_conservative(x, M) + Q.q_conservative(M, x);
    EXPECT_LE((B * x - y).cwiseAbs().maxCoeff(), 1e-12 * y.cwiseAbs().maxCoeff());
    // isospectral to the assembled linearization
    Eigen::MatrixXd A = assemble_L(s.g, s.k, s.sq).full();
    auto top = [](const Eigen::MatrixXd& X) {
        auto ev = Eigen::EigenSolver<Eigen::MatrixXd>(X, false).eigenvalues();
        std::vector<double> re(std::size_t(ev.size()));
        for (Eigen::Index i = 0; i < ev.size(); ++i) re[std::size_t(i)] = ev[i].real();
        std::sort(re.rbegin(), re.rend());
        return re;
    };
    auto ra = top(A), rb = top(B);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(ra[i], rb[i], 1e-9 + 1e-9 * std::abs(ra[i]));
}

TEST(Collision, DimensionMismatchRejected) {
    auto& s = small();
    auto k3 = hard_sphere_kernel(3);
    EXPECT_THROW(CollisionOperator(s.g, k3, s.sq), DomainError);
}
