#pragma once

// Covariance-matrix algebra for Gaussian states.
//
// Conventions (used everywhere in this library):
//   * shot-noise units: [x, p] = 2i, so the vacuum quadrature variance is 1 and
//     the vacuum covariance matrix is the identity;
//   * quadrature ordering (x1, p1, x2, p2, ...); the index helpers below are the
//     only place that knows this.
// Displacement vectors are not tracked: every operation here is independent of
// first moments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cvmdi/error.hpp"

namespace cvmdi::gaussian {

using Matrix = Eigen::MatrixXd;

enum class Quadrature { X = 0, P = 1 };

inline Eigen::Index quad_index(std::size_t mode, Quadrature q) {
    return static_cast<Eigen::Index>(2 * mode + static_cast<std::size_t>(q));
}
inline Eigen::Index x_index(std::size_t mode) { return quad_index(mode, Quadrature::X); }

/// Relative tolerance of every validity check, scaled by the largest diagonal entry.
inline constexpr double kValidityTol = 1e-9;
inline constexpr double kSymmetryTol = 1e-12;

class SymplecticForm {
public:
    explicit SymplecticForm(std::size_t n_modes) : n_(n_modes), omega_(Matrix::Zero(2 * n_modes, 2 * n_modes)) {
        cvmdi::detail::require(n_modes > 0, "SymplecticForm: n_modes must be positive");
        for (std::size_t k = 0; k < n_modes; ++k) {
            omega_(x_index(k), x_index(k) + 1) = 1.0;
            omega_(x_index(k) + 1, x_index(k)) = -1.0;
        }
    }
    std::size_t n_modes() const { return n_; }
    const Matrix& matrix() const { return omega_; }

private:
    std::size_t n_;
    Matrix omega_;
};

namespace detail {

inline double scale_of(const Matrix& m) {
    return std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
}

inline void check_symmetric(const Matrix& m) {
    if (m.rows() != m.cols() || m.rows() == 0 || m.rows() % 2 != 0)
        throw DomainError("covariance matrix must be square with even, non-zero dimension");
    if (!m.allFinite()) throw DomainError("covariance matrix has non-finite entries");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTol * scale_of(m)) throw DomainError("covariance matrix is not symmetric");
}

// Spectrum of iΩM computed through the Hermitian matrix i·S·Ω·S with S = M^{1/2};
// both share eigenvalues ±ν_k. M must be positive definite.
inline std::vector<double> symplectic_spectrum(const Matrix& m) {
    const Eigen::Index dim = m.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");
    if (es.eigenvalues().minCoeff() <= 0.0) throw NumericalError("covariance matrix is not positive definite");
    const Matrix sqrt_m = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    const SymplecticForm omega(static_cast<std::size_t>(dim / 2));
    const Eigen::MatrixXcd h = std::complex<double>(0.0, 1.0) * (sqrt_m * omega.matrix() * sqrt_m).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> hs(h, Eigen::EigenvaluesOnly);
    if (hs.info() != Eigen::Success) throw NumericalError("eigen-decomposition failed");

    std::vector<double> mags(static_cast<std::size_t>(dim));
    for (Eigen::Index k = 0; k < dim; ++k) mags[static_cast<std::size_t>(k)] = std::abs(hs.eigenvalues()(k));
    std::sort(mags.begin(), mags.end(), std::greater<>());

    const double tol = kValidityTol * scale_of(m);
    std::vector<double> nu;
    nu.reserve(mags.size() / 2);
    for (std::size_t k = 0; k < mags.size(); k += 2) {
        if (std::abs(mags[k] - mags[k + 1]) > tol * std::max(1.0, mags[k]))
            throw NumericalError("symplectic eigenvalues do not pair up");
        nu.push_back(0.5 * (mags[k] + mags[k + 1]));
    }
    return nu;
}

}  // namespace detail

/// Covariance matrix of an n-mode Gaussian state. Construction validates
/// symmetry and the uncertainty principle (all symplectic eigenvalues ≥ 1).
class CovMatrix {
public:
    explicit CovMatrix(Matrix m) : m_(std::move(m)) {
        detail::check_symmetric(m_);
        m_ = 0.5 * (m_ + m_.transpose()).eval();
        const auto nu = detail::symplectic_spectrum(m_);
        if (nu.back() < 1.0 - kValidityTol * detail::scale_of(m_))
            throw NumericalError("unphysical covariance matrix: symplectic eigenvalue " + std::to_string(nu.back()) + " < 1");
    }

    static CovMatrix vacuum(std::size_t n_modes) {
        cvmdi::detail::require(n_modes > 0, "vacuum: n_modes must be positive");
        return CovMatrix(Matrix::Identity(2 * n_modes, 2 * n_modes));
    }

    std::size_t n_modes() const { return static_cast<std::size_t>(m_.rows() / 2); }
    const Matrix& matrix() const { return m_; }
    double operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

    /// 2×2 block coupling modes i and j.
    Matrix block(std::size_t i, std::size_t j) const { return m_.block<2, 2>(x_index(i), x_index(j)); }

    bool approx_equal(const CovMatrix& o, double tol) const {
        return m_.rows() == o.m_.rows() && (m_ - o.m_).cwiseAbs().maxCoeff() <= tol;
    }

private:
    Matrix m_;
};

inline void check_mode(const CovMatrix& cm, std::size_t mode, const char* op) {
    if (mode >= cm.n_modes()) throw DomainError(std::string(op) + ": mode index out of range");
}

/// Two-mode squeezed vacuum with local variance mu (entanglement-based
/// equivalent of Gaussian modulation with variance mu - 1).
inline CovMatrix tmsv_cm(double mu) {
    if (!(mu >= 1.0)) throw DomainError("tmsv_cm: mu must be >= 1");
    const double c = std::sqrt(mu * mu - 1.0);
    Matrix m = Matrix::Zero(4, 4);
    m.diagonal().setConstant(mu);
    m(0, 2) = m(2, 0) = c;
    m(1, 3) = m(3, 1) = -c;
    return CovMatrix(std::move(m));
}

inline CovMatrix direct_sum(const CovMatrix& a, const CovMatrix& b) {
    const Eigen::Index na = a.matrix().rows(), nb = b.matrix().rows();
    Matrix m = Matrix::Zero(na + nb, na + nb);
    m.topLeftCorner(na, na) = a.matrix();
    m.bottomRightCorner(nb, nb) = b.matrix();
    return CovMatrix(std::move(m));
}

/// Reduced state of the listed modes, in the listed order.
inline CovMatrix reduce(const CovMatrix& cm, const std::vector<std::size_t>& modes) {
    cvmdi::detail::require(!modes.empty(), "reduce: no modes selected");
    const auto k = static_cast<Eigen::Index>(modes.size());
    Matrix m(2 * k, 2 * k);
    for (Eigen::Index r = 0; r < k; ++r) {
        check_mode(cm, modes[static_cast<std::size_t>(r)], "reduce");
        for (Eigen::Index c = 0; c < k; ++c)
            m.block<2, 2>(2 * r, 2 * c) = cm.block(modes[static_cast<std::size_t>(r)], modes[static_cast<std::size_t>(c)]);
    }
    return CovMatrix(std::move(m));
}

/// Thermal-loss channel on one mode: V -> τV + (1 - τ + τξ)·I, cross blocks scaled by √τ.
inline CovMatrix apply_loss_noise(const CovMatrix& cm, std::size_t mode, double tau, double xi_in) {
    check_mode(cm, mode, "apply_loss_noise");
    if (!(tau > 0.0 && tau <= 1.0)) throw DomainError("apply_loss_noise: tau must be in (0, 1]");
    if (!(xi_in >= 0.0)) throw DomainError("apply_loss_noise: excess noise must be >= 0");
    Matrix m = cm.matrix();
    const Eigen::Index r = x_index(mode);
    const double s = std::sqrt(tau);
    m.middleRows(r, 2) *= s;
    m.middleCols(r, 2) *= s;
    m.block<2, 2>(r, r) += (1.0 - tau + tau * xi_in) * Eigen::Matrix2d::Identity();
    return CovMatrix(std::move(m));
}

/// Classical Gaussian displacement noise of the given variance on both quadratures.
inline CovMatrix add_noise(const CovMatrix& cm, std::size_t mode, double variance) {
    check_mode(cm, mode, "add_noise");
    if (!(variance >= 0.0)) throw DomainError("add_noise: variance must be >= 0");
    Matrix m = cm.matrix();
    m.block<2, 2>(x_index(mode), x_index(mode)) += variance * Eigen::Matrix2d::Identity();
    return CovMatrix(std::move(m));
}

/// Beamsplitter of transmittance t between modes i and j:
///   a_i -> √t a_i + √(1-t) a_j,   a_j -> -√(1-t) a_i + √t a_j.
inline CovMatrix apply_beamsplitter(const CovMatrix& cm, std::size_t i, std::size_t j, double t) {
    check_mode(cm, i, "apply_beamsplitter");
    check_mode(cm, j, "apply_beamsplitter");
    if (i == j) throw DomainError("apply_beamsplitter: modes must differ");
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("apply_beamsplitter: t must be in [0, 1]");
    const Eigen::Index dim = cm.matrix().rows();
    Matrix s = Matrix::Identity(dim, dim);
    const double a = std::sqrt(t), b = std::sqrt(1.0 - t);
    for (Eigen::Index q = 0; q < 2; ++q) {
        const Eigen::Index ii = x_index(i) + q, jj = x_index(j) + q;
        s(ii, ii) = a;
        s(ii, jj) = b;
        s(jj, ii) = -b;
        s(jj, jj) = a;
    }
    return CovMatrix(s * cm.matrix() * s.transpose());
}

namespace detail {
inline std::vector<Eigen::Index> remaining_indices(const CovMatrix& cm, std::size_t mode) {
    std::vector<Eigen::Index> idx;
    for (std::size_t k = 0; k < cm.n_modes(); ++k) {
        if (k == mode) continue;
        idx.push_back(x_index(k));
        idx.push_back(x_index(k) + 1);
    }
    return idx;
}
}  // namespace detail

/// State of the other modes after homodyne detection of one quadrature of
/// `mode`: A - C (ΠBΠ)⁺ Cᵀ. The projected block is a scalar, so the
/// pseudo-inverse is 1/B_qq (or zero when B_qq vanishes and nothing couples).
inline CovMatrix condition_on_homodyne(const CovMatrix& cm, std::size_t mode, Quadrature q) {
    check_mode(cm, mode, "condition_on_homodyne");
    if (cm.n_modes() < 2) throw DomainError("condition_on_homodyne: need at least two modes");
    const auto keep = detail::remaining_indices(cm, mode);
    const auto k = static_cast<Eigen::Index>(keep.size());
    const Eigen::Index mq = quad_index(mode, q);
    const Matrix& m = cm.matrix();
    Matrix a(k, k);
    Eigen::VectorXd c(k);
    for (Eigen::Index r = 0; r < k; ++r) {
        c(r) = m(keep[r], mq);
        for (Eigen::Index s = 0; s < k; ++s) a(r, s) = m(keep[r], keep[s]);
    }
    const double b = m(mq, mq);
    const double tol = kValidityTol * detail::scale_of(m);
    if (b <= tol) {
        if (c.cwiseAbs().maxCoeff() > tol)
            throw NumericalError("condition_on_homodyne: singular measured quadrature with non-zero coupling");
        return CovMatrix(std::move(a));
    }
    return CovMatrix(a - c * c.transpose() / b);
}

/// State of the other modes after heterodyne detection of `mode`: A - C (B + I)⁻¹ Cᵀ.
inline CovMatrix condition_on_heterodyne(const CovMatrix& cm, std::size_t mode) {
    check_mode(cm, mode, "condition_on_heterodyne");
    if (cm.n_modes() < 2) throw DomainError("condition_on_heterodyne: need at least two modes");
    const auto keep = detail::remaining_indices(cm, mode);
    const auto k = static_cast<Eigen::Index>(keep.size());
    const Matrix& m = cm.matrix();
    const Eigen::Index mx = x_index(mode);
    Matrix a(k, k), c(k, 2);
    for (Eigen::Index r = 0; r < k; ++r) {
        c.row(r) = m.block(keep[r], mx, 1, 2);
        for (Eigen::Index s = 0; s < k; ++s) a(r, s) = m(keep[r], keep[s]);
    }
    const Eigen::Matrix2d bi = m.block<2, 2>(mx, mx) + Eigen::Matrix2d::Identity();
    const Eigen::LLT<Eigen::Matrix2d> llt(bi);
    if (llt.info() != Eigen::Success) throw NumericalError("condition_on_heterodyne: B + I not positive definite");
    return CovMatrix(a - c * llt.solve(c.transpose()));
}

/// Symplectic eigenvalues in descending order.
inline std::vector<double> symplectic_eigenvalues(const CovMatrix& cm) {
    return detail::symplectic_spectrum(cm.matrix());
}

/// Raw-matrix overload; rejects non-symmetric input with a DomainError.
inline std::vector<double> symplectic_eigenvalues(const Matrix& m) {
    detail::check_symmetric(m);
    return detail::symplectic_spectrum(0.5 * (m + m.transpose()));
}

/// Bosonic entropy function (bits) of one symplectic eigenvalue.
inline double g_von_neumann(double nu) {
    if (!(nu >= 1.0 - kValidityTol)) throw DomainError("g_von_neumann: nu must be >= 1");
    if (nu <= 1.0) return 0.0;
    const double plus = 0.5 * (nu + 1.0), minus = 0.5 * (nu - 1.0);
    return plus * std::log2(plus) - minus * std::log2(minus);
}

/// von Neumann entropy (bits).
inline double entropy(const CovMatrix& cm) {
    double s = 0.0;
    for (double nu : symplectic_eigenvalues(cm)) s += g_von_neumann(std::max(nu, 1.0));
    return s;
}

}  // namespace cvmdi::gaussian
