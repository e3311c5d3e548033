#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cvmdi/gaussian.hpp"
#include "mc_helpers.hpp"

using namespace cvmdi;
using namespace cvmdi::gaussian;

namespace {

CovMatrix thermal(double v) { return CovMatrix(Matrix::Identity(2, 2) * v); }

// Mixed two-mode state with correlations in both quadratures.
CovMatrix noisy_pair() {
    return apply_loss_noise(apply_loss_noise(tmsv_cm(4.0), 1, 0.7, 0.2), 0, 0.9, 0.05);
}

// Dense oracle: moduli of the eigenvalues of iΩM, pairwise deduplicated.
std::vector<double> dense_spectrum(const Matrix& m) {
    const SymplecticForm omega(static_cast<std::size_t>(m.rows() / 2));
    const Eigen::MatrixXcd a = std::complex<double>(0, 1) * (omega.matrix() * m).cast<std::complex<double>>();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a);
    std::vector<double> mags;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) mags.push_back(std::abs(es.eigenvalues()(i)));
    std::sort(mags.rbegin(), mags.rend());
    std::vector<double> out;
    for (std::size_t i = 0; i < mags.size(); i += 2) out.push_back(mags[i]);
    return out;
}

double g_long(long double nu) {
    const long double p = (nu + 1) / 2, m = (nu - 1) / 2;
    return static_cast<double>(p * std::log2(p) - (m > 0 ? m * std::log2(m) : 0.0L));
}

}  // namespace

TEST(SymplecticForm, IsAntisymmetricAndSquaresToMinusIdentity) {
    for (std::size_t n : {1u, 2u, 5u}) {
        const SymplecticForm w(n);
        EXPECT_TRUE((w.matrix().transpose() + w.matrix()).isZero(0));
        EXPECT_TRUE((w.matrix() * w.matrix() + Matrix::Identity(2 * n, 2 * n)).isZero(0));
    }
}

TEST(CovMatrix, RejectsAsymmetricAndUnphysicalInput) {
    Matrix m = Matrix::Identity(2, 2);
    m(0, 1) = 0.1;
    EXPECT_THROW(CovMatrix{m}, DomainError);
    EXPECT_THROW(CovMatrix(Matrix::Identity(2, 2) * 0.5), NumericalError);
    EXPECT_THROW(CovMatrix(Matrix::Identity(3, 3)), DomainError);
}

TEST(Tmsv, UnitVarianceIsTwoVacua) {
    EXPECT_TRUE(tmsv_cm(1.0).matrix().isApprox(Matrix::Identity(4, 4)));
}

TEST(Tmsv, BaselineModulationBlocks) {
    const auto cm = tmsv_cm(7.5);
    const double c = std::sqrt(55.25);
    EXPECT_TRUE(cm.block(0, 0).isApprox(7.5 * Matrix::Identity(2, 2)));
    EXPECT_TRUE(cm.block(1, 1).isApprox(7.5 * Matrix::Identity(2, 2)));
    EXPECT_NEAR(cm(0, 2), c, 1e-12);
    EXPECT_NEAR(cm(1, 3), -c, 1e-12);
    EXPECT_EQ(cm(0, 3), 0.0);
}

TEST(Tmsv, IsPure) {
    for (double nu : symplectic_eigenvalues(tmsv_cm(2.0))) EXPECT_NEAR(nu, 1.0, 1e-9);
}

TEST(Tmsv, RejectsSubVacuumVariance) { EXPECT_THROW(tmsv_cm(0.99), DomainError); }

TEST(LossNoise, VacuumStaysVacuum) {
    EXPECT_TRUE(apply_loss_noise(CovMatrix::vacuum(1), 0, 0.56, 0.0).matrix().isApprox(Matrix::Identity(2, 2)));
}

TEST(LossNoise, IdentityChannel) {
    const auto cm = thermal(7.5);
    EXPECT_TRUE(apply_loss_noise(cm, 0, 1.0, 0.0).approx_equal(cm, 0.0));
}

TEST(LossNoise, VacuumWithExcessNoiseMatchesMonteCarlo) {
    const auto out = apply_loss_noise(CovMatrix::vacuum(1), 0, 0.5, 0.1);
    EXPECT_NEAR(out(0, 0), 1.05, 1e-15);
    EXPECT_NEAR(out(1, 1), 1.05, 1e-15);
    EXPECT_EQ(out(0, 1), 0.0);
    // Sample space: x_out = √τ·x_in + √(1-τ)·x_env + √τ·n, with n of variance ξ.
    std::mt19937_64 eng(7);
    std::normal_distribution<double> z;
    const std::size_t n = 1'000'000;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::sqrt(0.5) * z(eng) + std::sqrt(0.5) * z(eng) + std::sqrt(0.5 * 0.1) * z(eng);
        s2 += x * x;
    }
    const double v = s2 / n;
    EXPECT_NEAR(v, out(0, 0), 3.0 * 1.05 * std::sqrt(2.0 / n));
}

TEST(LossNoise, RejectsInvalidTransmissivity) {
    EXPECT_THROW(apply_loss_noise(CovMatrix::vacuum(1), 0, 0.0, 0.0), DomainError);
    EXPECT_THROW(apply_loss_noise(CovMatrix::vacuum(1), 0, 1.1, 0.0), DomainError);
    EXPECT_THROW(apply_loss_noise(CovMatrix::vacuum(1), 0, 0.5, -0.1), DomainError);
    EXPECT_THROW(apply_loss_noise(CovMatrix::vacuum(1), 1, 0.5, 0.0), DomainError);
}

TEST(Beamsplitter, VacuaAreInvariant) {
    EXPECT_TRUE(apply_beamsplitter(CovMatrix::vacuum(2), 0, 1, 0.5).matrix().isApprox(Matrix::Identity(4, 4)));
}

TEST(Beamsplitter, FullTransmissionIsPassthrough) {
    const auto cm = direct_sum(thermal(3.0), CovMatrix::vacuum(1));
    EXPECT_TRUE(apply_beamsplitter(cm, 0, 1, 1.0).approx_equal(cm, 1e-15));
}

TEST(Beamsplitter, BalancedMixingOfThermalAndVacuum) {
    const auto out = apply_beamsplitter(direct_sum(thermal(3.0), CovMatrix::vacuum(1)), 0, 1, 0.5);
    // Output variances: (3 + 1)/2 each; cross term ±(3 - 1)/2.
    EXPECT_TRUE(out.block(0, 0).isApprox(2.0 * Matrix::Identity(2, 2)));
    EXPECT_TRUE(out.block(1, 1).isApprox(2.0 * Matrix::Identity(2, 2)));
    EXPECT_NEAR(std::abs(out(0, 2)), 1.0, 1e-12);
}

TEST(Beamsplitter, RejectsInvalidArguments) {
    const auto cm = CovMatrix::vacuum(2);
    EXPECT_THROW(apply_beamsplitter(cm, 0, 0, 0.5), DomainError);
    EXPECT_THROW(apply_beamsplitter(cm, 0, 1, 1.5), DomainError);
    EXPECT_THROW(apply_beamsplitter(cm, 0, 1, -0.1), DomainError);
}

TEST(Homodyne, ProductStateLeavesOtherModesUnchanged) {
    const auto out = condition_on_homodyne(direct_sum(thermal(3.0), thermal(5.0)), 1, Quadrature::X);
    EXPECT_TRUE(out.matrix().isApprox(3.0 * Matrix::Identity(2, 2)));
}

TEST(Homodyne, TmsvClosedForm) {
    for (double mu : {1.5, 7.5, 30.0}) {
        const auto out = condition_on_homodyne(tmsv_cm(mu), 1, Quadrature::X);
        EXPECT_NEAR(out(0, 0), 1.0 / mu, 1e-12);
        EXPECT_NEAR(out(1, 1), mu, 1e-12);
        EXPECT_NEAR(out(0, 1), 0.0, 1e-12);
    }
}

TEST(Homodyne, VacuumTmsv) {
    EXPECT_TRUE(condition_on_homodyne(tmsv_cm(1.0), 1, Quadrature::P).matrix().isApprox(Matrix::Identity(2, 2)));
}

TEST(Homodyne, RequiresTwoModes) { EXPECT_THROW(condition_on_homodyne(thermal(2.0), 0, Quadrature::X), DomainError); }

TEST(Heterodyne, ProductStateLeavesOtherModesUnchanged) {
    const auto out = condition_on_heterodyne(direct_sum(thermal(3.0), thermal(5.0)), 1);
    EXPECT_TRUE(out.matrix().isApprox(3.0 * Matrix::Identity(2, 2)));
}

TEST(Heterodyne, TmsvCollapsesToVacuum) {
    for (double mu : {1.0, 2.0, 7.5})
        EXPECT_TRUE(condition_on_heterodyne(tmsv_cm(mu), 1).matrix().isApprox(Matrix::Identity(2, 2), 1e-12));
}

TEST(SymplecticEigenvalues, VacuumAndThermal) {
    for (double nu : symplectic_eigenvalues(CovMatrix::vacuum(3))) EXPECT_NEAR(nu, 1.0, 1e-12);
    const auto t = symplectic_eigenvalues(thermal(4.2));
    ASSERT_EQ(t.size(), 1u);
    EXPECT_NEAR(t[0], 4.2, 1e-12);
}

TEST(SymplecticEigenvalues, LossyTmsvMatchesDenseOracle) {
    const auto cm = apply_loss_noise(tmsv_cm(7.5), 1, 0.56, 0.0);
    const auto nu = symplectic_eigenvalues(cm);
    const auto oracle = dense_spectrum(cm.matrix());
    ASSERT_EQ(nu.size(), oracle.size());
    for (std::size_t i = 0; i < nu.size(); ++i) EXPECT_NEAR(nu[i], oracle[i], 1e-9);
}

TEST(SymplecticEigenvalues, RejectsNonSymmetricInput) {
    Matrix m = Matrix::Identity(4, 4) * 2.0;
    m(0, 3) = 0.3;
    EXPECT_THROW(symplectic_eigenvalues(m), DomainError);
}

TEST(Entropy, GFunctionValues) {
    EXPECT_EQ(g_von_neumann(1.0), 0.0);
    EXPECT_EQ(g_von_neumann(1.0 - 5e-10), 0.0);
    EXPECT_NEAR(g_von_neumann(3.0), 2.0, 1e-14);
    EXPECT_NEAR(g_von_neumann(2.0), g_long(2.0L), 1e-14);
    EXPECT_NEAR(g_von_neumann(2.0), 1.377444, 1e-6);
    EXPECT_THROW(g_von_neumann(0.9), DomainError);
}

TEST(Entropy, GIsIncreasingAndApproachesLogLimit) {
    double prev = g_von_neumann(1.0);
    for (double nu = 1.01; nu < 50.0; nu *= 1.07) {
        const double v = g_von_neumann(nu);
        EXPECT_GT(v, prev);
        prev = v;
    }
    EXPECT_NEAR(g_von_neumann(1e3) - std::log2(std::exp(1.0) * 1e3 / 2.0), 0.0, 1e-3);
}

// ---------------------------------------------------------------- properties

TEST(GaussianProperties, ConditioningPreservesPurity) {
    std::mt19937_64 eng(11);
    std::uniform_real_distribution<double> u(0.05, 0.95), mu(1.2, 20.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto cm = direct_sum(tmsv_cm(mu(eng)), tmsv_cm(mu(eng)));
        cm = apply_beamsplitter(cm, 1, 2, u(eng));
        cm = apply_beamsplitter(cm, 0, 3, u(eng));
        const std::size_t mode = static_cast<std::size_t>(trial % 4);
        for (const auto& c : {condition_on_homodyne(cm, mode, trial % 2 ? Quadrature::P : Quadrature::X),
                              condition_on_heterodyne(cm, mode)}) {
            for (double nu : symplectic_eigenvalues(c)) EXPECT_NEAR(nu, 1.0, 1e-8);
        }
    }
}

TEST(GaussianProperties, LossChannelsCompose) {
    const auto cm = tmsv_cm(7.5);
    for (double t1 : {0.2, 0.56, 0.9})
        for (double t2 : {0.3, 0.8, 1.0}) {
            const auto a = apply_loss_noise(apply_loss_noise(cm, 1, t1, 0.0), 1, t2, 0.0);
            const auto b = apply_loss_noise(cm, 1, t1 * t2, 0.0);
            EXPECT_TRUE(a.approx_equal(b, 1e-10));
        }
}

TEST(GaussianProperties, BeamsplitterPreservesSymplecticSpectrum) {
    const auto cm = direct_sum(noisy_pair(), thermal(2.5));
    const auto before = symplectic_eigenvalues(cm);
    for (int k = 1; k <= 9; ++k) {
        const double t = 0.1 * k;
        for (auto [i, j] : {std::pair{0u, 1u}, std::pair{1u, 2u}, std::pair{0u, 2u}}) {
            const auto after = symplectic_eigenvalues(apply_beamsplitter(cm, i, j, t));
            ASSERT_EQ(after.size(), before.size());
            for (std::size_t n = 0; n < before.size(); ++n) EXPECT_NEAR(after[n], before[n], 1e-9);
        }
    }
}

TEST(GaussianProperties, HomodyneMatchesMonteCarloSlices) {
    const auto cm = apply_beamsplitter(noisy_pair(), 0, 1, 0.3);
    const std::size_t n = 1'000'000;
    const auto x = mc::sample_gaussian(cm.matrix(), n, 21);
    for (auto q : {Quadrature::X, Quadrature::P}) {
        const auto cond = condition_on_homodyne(cm, 1, q);
        const Eigen::Index col = quad_index(1, q);
        const double sd = std::sqrt(cm(col, col));
        // Outcome independence: two different outcome slices give the same state.
        for (double outcome : {0.0, 1.0}) {
            std::vector<Eigen::Index> rows;
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                if (std::abs(x(i, col) - outcome * sd) < 0.05 * sd) rows.push_back(i);
            Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), 2);
            for (std::size_t r = 0; r < rows.size(); ++r) s.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]).head(2);
            const auto emp = mc::sample_cov(s);
            for (Eigen::Index a = 0; a < 2; ++a)
                for (Eigen::Index b = 0; b < 2; ++b) {
                    const double se = mc::cov_se(cond(a, a), cond(b, b), cond(a, b), rows.size());
                    EXPECT_NEAR(emp(a, b), cond(a, b), 3.0 * se) << "entry " << a << b << " outcome " << outcome;
                }
        }
    }
}

TEST(GaussianProperties, HeterodyneMatchesMonteCarloRegression) {
    const auto cm = noisy_pair();
    const std::size_t n = 1'000'000;
    // Heterodyne record of mode 1: its quadratures plus one unit of vacuum each.
    Matrix ext = Matrix::Zero(6, 6);
    ext.topLeftCorner(4, 4) = cm.matrix();
    ext.bottomRightCorner(2, 2) = Matrix::Identity(2, 2);
    auto x = mc::sample_gaussian(ext, n, 5);
    Eigen::MatrixXd rec(n, 2);
    rec.col(0) = x.col(2) + x.col(4);
    rec.col(1) = x.col(3) + x.col(5);
    const Eigen::MatrixXd a = x.leftCols(2);
    // Residual of the least-squares fit of mode 0 on the record.
    const Eigen::MatrixXd coef = (rec.transpose() * rec).ldlt().solve(rec.transpose() * a);
    const auto emp = mc::sample_cov(a - rec * coef);
    const auto cond = condition_on_heterodyne(cm, 1);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j)
            EXPECT_NEAR(emp(i, j), cond(i, j), 3.0 * mc::cov_se(cond(i, i), cond(j, j), cond(i, j), n));
}
