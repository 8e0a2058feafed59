#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "boltzgap/quadrature.hpp"
#include "boltzgap/velocity_space.hpp"

using namespace boltzgap;

namespace {
const VelocityGrid& grid3() {
    static VelocityGrid g(3, 25, 6.0);
    return g;
}
}  // namespace

TEST(Quadrature, GaussLegendreExactForPolynomials) {
    auto r = gauss_legendre(5, -1, 1);
    double s = 0;
    for (std::size_t i = 0; i < r.size(); ++i) s += r.w[i] * std::pow(r.x[i], 8);
    EXPECT_NEAR(s, 2.0 / 9.0, 1e-14);
}

TEST(Grid, Layout) {
    VelocityGrid g(2, 5, 2.0);
    EXPECT_EQ(g.size(), 25u);
    EXPECT_DOUBLE_EQ(g.spacing(), 1.0);
    auto c = g.coords(g.index(3, 1));
    EXPECT_EQ(c[0], 3);
    EXPECT_EQ(c[1], 1);
    EXPECT_DOUBLE_EQ(g.node(g.index(3, 1))[0], 1.0);
    EXPECT_DOUBLE_EQ(g.weights().sum(), 16.0);
    EXPECT_THROW(VelocityGrid(4, 5, 1.0), DomainError);
    EXPECT_THROW(VelocityGrid(3, 1, 1.0), DomainError);
}

TEST(Maxwellian, StandardMoments) {
    const auto& g = grid3();
    Field M = maxwellian_field(g);
    auto m = moments(g, M);
    double rho = std::pow(pi, 1.5);
    EXPECT_NEAR(m.mass, rho, 1e-9 * rho);
    EXPECT_NEAR(norm(m.momentum), 0.0, 1e-12);
    EXPECT_NEAR(m.energy, 1.5 * 0.5 * rho, 1e-9);
    auto fit = maxwellian_from_moments(m, 3);
    EXPECT_NEAR(fit.T, 0.5, 1e-10);
    EXPECT_NEAR(rho, 5.568, 1e-3);
}

TEST(Maxwellian, ScalingAndShift) {
    const auto& g = grid3();
    Field M = maxwellian_field(g);
    auto m2 = maxwellian_from_moments(moments(g, 2 * M), 3);
    EXPECT_NEAR(m2.rho, 2 * std::pow(pi, 1.5), 1e-8);
    EXPECT_NEAR(m2.T, 0.5, 1e-10);
    Vec u0{0.4, -0.3, 0.2};
    Field Ms = g.sample([&](const Vec& v) { return std::exp(-norm2(v - u0)); });
    auto ms = maxwellian_from_moments(moments(g, Ms), 3);
    for (int d = 0; d < 3; ++d) EXPECT_NEAR(ms.u[d], u0[d], 1e-9);
}

TEST(Norms, MaxwellianNorms) {
    const auto& g = grid3();
    Field M = maxwellian_field(g);
    double rho = std::pow(pi, 1.5);
    EXPECT_NEAR(l1_norm(g, M), rho, 1e-9);
    EXPECT_EQ(l1_norm(g, Field::Zero(M.size())), 0.0);
    // ||M||^2_{L^2(M^{-1})} = int M
    double n2 = weighted_norm(g, M, M.cwiseInverse(), 2);
    EXPECT_NEAR(n2 * n2, rho, 1e-9);
}

TEST(Entropy, HFunctional) {
    const auto& g = grid3();
    Field M = maxwellian_field(g);
    EXPECT_NEAR(h_functional(g, M), -1.5 * std::pow(pi, 1.5), 1e-8);
    EXPECT_NEAR(h_functional(g, Field::Ones(M.size())), 0.0, 1e-15);
    Field neg = M;
    neg[0] = -1;
    EXPECT_THROW(h_functional(g, neg), DomainError);
}

TEST(Entropy, MaxwellianMinimizesH) {
    VelocityGrid g(2, 41, 6.0);
    Field M = maxwellian_field(g);
    Eigen::MatrixXd P = invariants(g);
    Field W = g.weights().cwiseProduct(M);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N01;
    double H0 = h_functional(g, M);
    for (int t = 0; t < 20; ++t) {
        // perturbation with vanishing invariant moments
        Field p = g.sample([&, a = N01(rng), b = N01(rng), c = N01(rng)](const Vec& v) {
            return 0.2 * std::exp(-norm2(v) / 4) * (a * v[0] * v[0] * v[1] + b * std::pow(v[0], 4) + c * v[1]);
        });
        Eigen::VectorXd coef = (P.transpose() * W.asDiagonal() * P).ldlt().solve(P.transpose() * W.cwiseProduct(p));
        Field h = p - P * coef;
        h *= 0.5 / h.cwiseAbs().maxCoeff();
        Field f = M.cwiseProduct(Field::Ones(M.size()) + h);
        EXPECT_GE(h_functional(g, f), H0 - 1e-12);
    }
}

TEST(Weight, Admissibility) {
    auto m = WeightFunction::stretched_exponential(0.5, 0.2);
    EXPECT_NO_THROW(m.check_admissible(1.0));
    EXPECT_THROW(m.check_admissible(0.3), DomainError);
    EXPECT_THROW(WeightFunction::stretched_exponential(-1, 0.1).check_admissible(1.0), DomainError);
    EXPECT_NEAR(m(Vec{1, 0, 0}), std::exp(-0.5), 1e-15);
}

TEST(Sphere, QuadratureMass) {
    auto s3 = SphereQuadrature::product(16, 32);
    EXPECT_NEAR(s3.total(), 4 * pi, 1e-12);
    auto s2 = SphereQuadrature::circle(64);
    EXPECT_NEAR(s2.total(), 2 * pi, 1e-12);
    std::vector<Vec> dirs;
    s3.directions(Vec{0, 0.6, 0.8}, dirs);
    for (auto& d : dirs) EXPECT_NEAR(norm(d), 1.0, 1e-13);
}
