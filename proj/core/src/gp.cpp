#include "htp/gp.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

#include "htp/errors.hpp"

namespace htp {

CholeskyFactor::CholeskyFactor(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("CholeskyFactor: matrix must be square");
  constexpr std::array<double, 4> kJitter{0.0, 1e-10, 1e-8, 1e-6};
  for (double jitter : kJitter) {
    Eigen::MatrixXd shifted = a;
    shifted.diagonal().array() += jitter;
    llt_.compute(shifted);
    if (llt_.info() == Eigen::Success && llt_.matrixLLT().diagonal().minCoeff() > 0.0) {
      jitter_ = jitter;
      return;
    }
  }
  throw NumericalError("matrix is not positive definite even after adding 1e-6 jitter");
}

Eigen::MatrixXd CholeskyFactor::inverse() const {
  return llt_.solve(Eigen::MatrixXd::Identity(size(), size()));
}

double CholeskyFactor::log_determinant() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

GaussianPosterior gp_posterior_at_training(const Eigen::MatrixXd& k_tilde, const Eigen::MatrixXd& k,
                                           const Eigen::VectorXd& y, Eigen::Index i) {
  const Eigen::Index n = k.rows();
  if (k_tilde.rows() != n || k_tilde.cols() != n || y.size() != n) {
    throw std::invalid_argument("gp_posterior_at_training: dimension mismatch");
  }
  if (i < 0 || i >= n) throw std::invalid_argument("gp_posterior_at_training: index out of range");
  const CholeskyFactor chol(k);
  const Eigen::VectorXd row = k_tilde.row(i).transpose();
  const Eigen::VectorXd weights = chol.solve(row);
  GaussianPosterior post;
  post.mean = Eigen::VectorXd::Constant(1, weights.dot(y));
  post.covariance = Eigen::MatrixXd::Constant(1, 1, std::max(0.0, k(i, i) - row.dot(weights)));
  return post;
}

GaussianPosterior gp_predict(const CholeskyFactor& k, const Eigen::VectorXd& k_star, double k_ss,
                             const Eigen::VectorXd& z_obs) {
  if (k_star.size() != k.size() || z_obs.size() != k.size()) {
    throw std::invalid_argument("gp_predict: dimension mismatch");
  }
  const Eigen::VectorXd weights = k.solve(k_star);
  const double variance = std::clamp(k_ss - k_star.dot(weights), 0.0, k_ss);
  GaussianPosterior post;
  post.mean = Eigen::VectorXd::Constant(1, weights.dot(z_obs));
  post.covariance = Eigen::MatrixXd::Constant(1, 1, variance);
  return post;
}

GaussianPosterior gp_predict(const Eigen::MatrixXd& k, const Eigen::VectorXd& k_star, double k_ss,
                             const Eigen::VectorXd& z_obs) {
  return gp_predict(CholeskyFactor(k), k_star, k_ss, z_obs);
}

}  // namespace htp
