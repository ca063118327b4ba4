#ifndef HTP_GP_HPP_
#define HTP_GP_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace htp {

/// Cholesky factor of a symmetric positive definite matrix. If the plain
/// factorization fails, 1e-10, 1e-8 and 1e-6 are added to the diagonal in
/// turn; NumericalError is thrown if all attempts fail.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(const Eigen::MatrixXd& a);

  Eigen::Index size() const { return llt_.rows(); }
  double jitter() const { return jitter_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }
  Eigen::MatrixXd inverse() const;
  double log_determinant() const;
  Eigen::MatrixXd lower() const { return llt_.matrixL(); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

/// Gaussian posterior over one or more latent values.
struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  double scalar_mean() const { return mean(0); }
  double scalar_variance() const { return covariance(0, 0); }
};

/// Posterior of z(x_i) at a training location:
///   mu_i = K~(x_i, X) K^{-1} y,  s_i^2 = K(x_i, x_i) - K~(x_i, X) K^{-1} K~(X, x_i).
GaussianPosterior gp_posterior_at_training(const Eigen::MatrixXd& k_tilde, const Eigen::MatrixXd& k,
                                           const Eigen::VectorXd& y, Eigen::Index i);

/// Predictive distribution at one test point given observations z_obs.
GaussianPosterior gp_predict(const Eigen::MatrixXd& k, const Eigen::VectorXd& k_star, double k_ss,
                             const Eigen::VectorXd& z_obs);
GaussianPosterior gp_predict(const CholeskyFactor& k, const Eigen::VectorXd& k_star, double k_ss,
                             const Eigen::VectorXd& z_obs);

}  // namespace htp

#endif  // HTP_GP_HPP_
