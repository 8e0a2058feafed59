#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "boltzgap/spectral.hpp"

using namespace boltzgap;

namespace {
struct Small2D {
    VelocityGrid g{2, 15, 4.0};
    CollisionKernelSpec k = make_kernel(2, 0.5, 1.0, AngularProfile::constant(), true);
    SphereQuadrature sq = SphereQuadrature::circle(32);
    LinearizedOperatorMatrix L = assemble_L(g, k, sq);
    Eigen::MatrixXd A = L.full();
    double nu0 = L.nu.minCoeff();
    SpectrumReport sp = spectrum(A, g, nu0);
};
Small2D& small() {
    static Small2D s;
    return s;
}
}  // namespace

TEST(Spectrum, DiagonalOperator) {
    VelocityGrid g(2, 5, 2.0);
    const Eigen::Index S = Eigen::Index(g.size());
    Field d(S);
    for (Eigen::Index i = 0; i < S; ++i) d[i] = i < 4 ? 0.0 : -double(i - 3);
    SpectrumOptions o;
    o.tol_null = 1e-8;
    auto sp = spectrum(Eigen::MatrixXd(d.asDiagonal()), g, 1.0, o);
    EXPECT_TRUE(sp.symmetrized);
    EXPECT_EQ(sp.null_count, 4u);
    EXPECT_DOUBLE_EQ(sp.gap, 1.0);
    for (std::size_t i = 1; i < sp.values.size(); ++i) EXPECT_GE(sp.values[i - 1].real(), sp.values[i].real());
    EXPECT_NEAR(sp.values.back().real(), -21.0, 1e-12);
}

TEST(Spectrum, GeneralModeRecoversSimilarityTransform) {
    VelocityGrid g(2, 5, 2.0);
    const Eigen::Index S = Eigen::Index(g.size());
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N01;
    Eigen::MatrixXd T(S, S);
    for (Eigen::Index i = 0; i < S; ++i)
        for (Eigen::Index j = 0; j < S; ++j) T(i, j) = (i == j ? 3.0 : 0.0) + 0.2 * N01(rng);
    Field d(S);
    for (Eigen::Index i = 0; i < S; ++i) d[i] = -0.5 * double(i);
    Eigen::MatrixXd A = T * d.asDiagonal() * T.inverse();
    SpectrumOptions o;
    o.mode = SpectrumOptions::Mode::general;
    o.tol_null = 1e-8;
    auto sp = spectrum(A, g, 1.0, o);
    EXPECT_FALSE(sp.symmetrized);
    EXPECT_EQ(sp.null_count, 1u);
    EXPECT_NEAR(sp.gap, 0.5, 1e-10);
    for (Eigen::Index i = 0; i < S; ++i) {
        EXPECT_NEAR(sp.values[std::size_t(i)].real(), -0.5 * double(i), 1e-9);
        EXPECT_NEAR(sp.values[std::size_t(i)].imag(), 0.0, 1e-9);
    }
}

TEST(Spectrum, LinearizedOperatorHasInvariantNullSpace) {
    auto& s = small();
    EXPECT_EQ(s.sp.null_count, 4u);
    EXPECT_LT(s.sp.null_span_angle_deg, 1.0);
    EXPECT_GT(s.sp.gap, 0.0);
    EXPECT_LT(s.sp.gap, s.nu0);
    auto c = gap_check(s.sp, s.k, s.nu0);
    EXPECT_TRUE(c.above_bound);
    EXPECT_TRUE(c.below_nu0);
    EXPECT_GT(c.reference_bound, c.kernel_bound);
}

TEST(Spectrum, TransferToWeightedSpace) {
    auto& s = small();
    auto m = WeightFunction::stretched_exponential(0.5, 0.2);
    Eigen::MatrixXd Am = conjugate_to_weight(s.L, s.g, m).full();
    auto t = eigenvector_transfer_check(s.sp, s.g, Am, m, 1e-2);
    ASSERT_FALSE(t.rows.empty());
    // the null rows carry m^{-1} M times an invariant
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (std::abs(t.rows[i].lambda) <= s.sp.tol_null) EXPECT_LE(t.rows[i].residual, 1e-2 * s.nu0);
    EXPECT_LE(t.max_mismatch, 1e-2);
}

TEST(Spectrum, NullProjectorIsAProjection) {
    VelocityGrid g(2, 11, 4.0);
    auto m = WeightFunction::stretched_exponential(0.5, 0.2);
    auto p = weighted_null_projector(g, &m);
    Eigen::MatrixXd P = p.V * p.U.transpose();
    EXPECT_LE((P * P - P).cwiseAbs().maxCoeff(), 1e-10 * P.cwiseAbs().maxCoeff());
    Field x = p.V.col(2);
    EXPECT_LE((p.apply(x) - x).cwiseAbs().maxCoeff(), 1e-10 * x.cwiseAbs().maxCoeff());
}

TEST(Spectrum, SpectralNullProjectorSplitsEigenvectors) {
    VelocityGrid g(2, 21, 4.0);
    auto k = make_kernel(2, 0.5, 1.0, AngularProfile::constant(), true);
    auto L = assemble_L(g, k, SphereQuadrature::circle(32));
    auto m = WeightFunction::stretched_exponential(0.5, 0.2);
    SpectrumOptions o;
    o.mode = SpectrumOptions::Mode::symmetric;
    auto sp = spectrum(L.full(), g, L.nu.minCoeff(), o);
    auto p = spectral_null_projector(sp, g, &m);
    ASSERT_EQ(p.V.cols(), 4);
    Eigen::MatrixXd P = p.V * p.U.transpose();
    EXPECT_LE((P * P - P).cwiseAbs().maxCoeff(), 1e-10 * P.cwiseAbs().maxCoeff());
    Field D = weight_field(g, m).cwiseQuotient(maxwellian_field(g));
    // non-null eigenvectors moved to the weighted scaling are annihilated
    for (std::size_t i = 0; i < sp.values.size(); i += 25) {
        if (sp.classes[i] == EigClass::null) continue;
        Field x = D.cwiseInverse().cwiseProduct(Field(sp.vectors.col(Eigen::Index(i)).real()));
        EXPECT_LE(p.apply(x).cwiseAbs().maxCoeff(), 1e-9 * x.cwiseAbs().maxCoeff());
    }
}

TEST(Semigroup, ScalarDecayIsExact) {
    VelocityGrid g(2, 7, 3.0);
    const Eigen::Index S = Eigen::Index(g.size());
    Eigen::MatrixXd A = -0.7 * Eigen::MatrixXd::Identity(S, S);
    auto p = weighted_null_projector(g, nullptr);
    auto rep = semigroup_decay(A, g, p, 0.1, 20, 0.0);
    ASSERT_EQ(rep.rows.size(), 21u);
    EXPECT_NEAR(rep.rows[0].lower, 1.0, 1e-12);
    EXPECT_NEAR(rep.mu_hat, 0.7, 1e-9);
    EXPECT_NEAR(rep.C10, rep.rows[0].upper, 1e-9 * rep.C10);
    EXPECT_EQ(rep.violations, 0u);
}

TEST(Resolvent, SymmetricIdentity) {
    VelocityGrid g(2, 5, 2.0);
    const Eigen::Index S = Eigen::Index(g.size());
    Field d(S);
    std::vector<double> sigma;
    for (Eigen::Index i = 0; i < S; ++i) {
        d[i] = -1.0 * i * i;
        if (i > 0) sigma.push_back(d[i]);
    }
    Eigen::MatrixXd Sm = d.asDiagonal();
    Eigen::MatrixXd nb = Eigen::MatrixXd::Zero(S, 1);
    nb(0, 0) = 1;
    auto p = weighted_null_projector(g, nullptr);
    double mu = 0.5;
    auto xis = sector_samples(mu, 50.0, 4);
    for (auto xi : xis) EXPECT_TRUE(in_sector(xi, mu));
    EXPECT_FALSE(in_sector({0.0, 0.0}, mu));
    auto rep = resolvent_scan(Sm, g, p, Sm, nb, sigma, xis, mu, 200);
    // power iteration converges slowly where neighbouring singular values crowd
    EXPECT_LE(rep.worst_identity, 5e-3);
    EXPECT_EQ(rep.violations_cmp, 0u);
    EXPECT_EQ(rep.violations_sector, 0u);
}

TEST(Cluster, ProjectorFromLeftVectors) {
    VelocityGrid g(2, 5, 2.0);
    const Eigen::Index S = Eigen::Index(g.size());
    std::mt19937_64 rng(9);
    std::normal_distribution<double> N01;
    Eigen::MatrixXd T = 3 * Eigen::MatrixXd::Identity(S, S);
    for (Eigen::Index i = 0; i < S; ++i)
        for (Eigen::Index j = 0; j < S; ++j) T(i, j) += 0.2 * N01(rng);
    Field d(S);
    for (Eigen::Index i = 0; i < S; ++i) d[i] = i == 0 ? 0.0 : (i <= 2 ? -1.0 : -2.0 - i);
    Eigen::MatrixXd A = T * d.asDiagonal() * T.inverse();
    SpectrumOptions o;
    o.mode = SpectrumOptions::Mode::general;
    o.left_vectors = true;
    o.tol_null = 1e-8;
    auto sp = spectrum(A, g, 1.0, o);
    auto members = gap_cluster(sp);
    ASSERT_EQ(members.size(), 2u);
    auto P = cluster_projector(sp, members, l2m_weights(g));
    CMatrix Pm = P.V * P.Uh;
    EXPECT_LE((Pm * Pm - Pm).cwiseAbs().maxCoeff(), 1e-8);
    CMatrix Ac = A.cast<std::complex<double>>();
    EXPECT_LE((Ac * Pm - Pm * Ac).cwiseAbs().maxCoeff(), 1e-8);
}
