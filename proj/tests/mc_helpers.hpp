#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace cvmdi::mc {

/// Draws rows of zero-mean Gaussian vectors with covariance `cov`.
inline Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& cov, std::size_t n, std::uint64_t seed) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd L = llt.matrixL();
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), cov.rows());
    Eigen::VectorXd w(cov.rows());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = z(eng);
        out.row(i) = (L * w).transpose();
    }
    return out;
}

/// Sample covariance (1/n) of the columns.
inline Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& x) {
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd c = x.rowwise() - mu;
    return (c.transpose() * c) / static_cast<double>(x.rows());
}

/// Standard error of a sample covariance entry for Gaussian data.
inline double cov_se(double sxx, double syy, double sxy, std::size_t n) {
    return std::sqrt((sxx * syy + sxy * sxy) / static_cast<double>(n));
}

}  // namespace cvmdi::mc
