#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "boltzgap/linearized.hpp"

using namespace boltzgap;

namespace {
struct Small2D {
    VelocityGrid g{2, 15, 4.0};
    CollisionKernelSpec k = make_kernel(2, 0.5, 1.0, AngularProfile::constant(), true);
    SphereQuadrature sq = SphereQuadrature::circle(32);
    LinearizedOperatorMatrix L = assemble_L(g, k, sq);
    Eigen::MatrixXd A = L.full();
};
Small2D& small() {
    static Small2D s;
    return s;
}
bool bulk(const VelocityGrid& g, std::size_t i) { return norm(g.node(i)) <= 2.0; }
}  // namespace

TEST(Linearized, InvariantsAreInTheKernel) {
    auto& s = small();
    Eigen::MatrixXd R = s.A * invariants(s.g);
    double nu0 = s.L.nu.minCoeff();
    for (std::size_t i = 0; i < s.g.size(); ++i)
        if (bulk(s.g, i))
            for (Eigen::Index c = 0; c < R.cols(); ++c) EXPECT_LE(std::abs(R(Eigen::Index(i), c)), 1e-4 * nu0);
}

TEST(Linearized, FrequencyMatchesConvolutionRowSums) {
    auto& s = small();
    EXPECT_LE((s.L.nu - s.L.conv.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-12 * s.L.nu.maxCoeff());
    EXPECT_GT(s.L.nu.minCoeff(), 0.0);
}

TEST(Linearized, DirichletFormIsNonPositive) {
    auto& s = small();
    Field W = l2m_weights(s.g);
    auto sym = symmetrize(s.A, W);
    EXPECT_LE(symmetry_defect(sym.A, W), 1e-12);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N01;
    Eigen::MatrixXd P = invariants(s.g);
    double nu0 = s.L.nu.minCoeff();
    for (int t = 0; t < 20; ++t) {
        Field h(s.A.rows());
        for (auto& x : h) x = N01(rng);
        // mix in collision invariants, which should sit at the top of the form
        h += 3 * N01(rng) * P.col(0) + N01(rng) * P.col(1) + N01(rng) * P.col(3);
        double q = h.dot(W.cwiseProduct(sym.A * h)) / h.dot(W.cwiseProduct(h));
        EXPECT_LE(q, 1e-3 * nu0);
    }
}

TEST(Linearized, ConjugationToWeight) {
    auto& s = small();
    auto m = WeightFunction::stretched_exponential(0.5, 0.2);
    auto Lc = assemble_L_m(s.g, s.k, s.sq, m);
    EXPECT_TRUE(Lc.weighted);
    EXPECT_LE(conjugation_defect(Lc.full(), s.A, s.g, m), 1e-13);
    // m^{-1} M times an invariant is annihilated
    Field Mm = maxwellian_field(s.g).cwiseQuotient(weight_field(s.g, m));
    Field r = Lc.full() * Mm;
    for (std::size_t i = 0; i < s.g.size(); ++i)
        if (bulk(s.g, i)) EXPECT_LE(std::abs(r[Eigen::Index(i)]), 1e-4 * s.L.nu.minCoeff() * Mm[Eigen::Index(i)]);
}

TEST(Linearized, DirectWeightedAssemblyAgreesInTheBulk) {
    auto& s = small();
    auto m = WeightFunction::stretched_exponential(0.5, 0.2);
    AssemblyOptions o;
    o.reference = AssemblyOptions::Reference::weight;
    auto Ld = assemble_L_m(s.g, s.k, s.sq, m, o);
    Eigen::MatrixXd Ac = conjugate_to_weight(s.L, s.g, m).full(), Ad = Ld.full();
    // entries differ where D = m/M is large; compare actions on smooth fields
    Field Mm0 = maxwellian_field(s.g).cwiseQuotient(weight_field(s.g, m));
    for (auto psi : {+[](const Vec& v) { return std::cos(v[0]); }, +[](const Vec& v) { return v[0] * v[1] + 0.3 * v[1]; }}) {
        Field x = Mm0.cwiseProduct(s.g.sample(psi));
        Field yc = Ac * x, yd = Ad * x;
        double diff = 0, ref = 0;
        for (std::size_t i = 0; i < s.g.size(); ++i)
            if (bulk(s.g, i)) {
                diff = std::max(diff, std::abs(yc[Eigen::Index(i)] - yd[Eigen::Index(i)]) / Mm0[Eigen::Index(i)]);
                ref = std::max(ref, std::abs(yc[Eigen::Index(i)]) / Mm0[Eigen::Index(i)]);
            }
        EXPECT_LE(diff, 0.1 * ref);
    }
    Field Mm = maxwellian_field(s.g).cwiseQuotient(weight_field(s.g, m));
    Field r = Ad * Mm;
    for (std::size_t i = 0; i < s.g.size(); ++i)
        if (bulk(s.g, i)) EXPECT_LE(std::abs(r[Eigen::Index(i)]), 0.1 * s.L.nu.maxCoeff() * Mm[Eigen::Index(i)]);
}

TEST(Linearized, InadmissibleWeightRejected) {
    auto& s = small();
    EXPECT_THROW(assemble_L_m(s.g, s.k, s.sq, WeightFunction::stretched_exponential(0.5, 0.3)), DomainError);
}

TEST(Linearized, MollifiedGainVanishesOutsideWindow) {
    auto& s = small();
    const double delta = 0.5;
    auto Lp = assemble_L_plus_delta(s.g, s.k, s.sq, delta);
    Mollifier mol(2);
    std::size_t zero_rows = 0;
    for (std::size_t i = 0; i < s.g.size(); ++i)
        if (mol.velocity_window(norm(s.g.node(i)), delta) == 0) {
            ++zero_rows;
            EXPECT_EQ(Lp.gain.row(Eigen::Index(i)).cwiseAbs().maxCoeff(), 0.0);
        }
    EXPECT_GT(zero_rows, 0u);
    EXPECT_EQ(Lp.nu.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Linearized, CarlemanFormAgreesWithStencilAssembly) {
    auto& s = small();
    auto Lp = assemble_L_plus_delta(s.g, s.k, s.sq, 0.5);
    auto Lc = carleman_L_plus_delta(s.g, s.k, 0.5);
    EXPECT_LE((Lp.gain - Lc.gain).cwiseAbs().sum() / Lp.gain.cwiseAbs().sum(), 0.15);
    Field zero = Field::Zero(Lc.size());
    EXPECT_EQ((Lc.gain * zero).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Linearized, OperatorNormsOfDiagonal) {
    VelocityGrid g(2, 5, 1.0);
    Field w = g.weights();
    Eigen::MatrixXd D = Eigen::MatrixXd::Identity(g.size(), g.size()) * 2.0;
    EXPECT_NEAR(l1_operator_norm(D, w), 2.0, 1e-14);
    EXPECT_NEAR(l2_operator_norm(D, w), 2.0, 1e-12);
}
