#include "htp/process.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "htp/normal.hpp"
#include "htp/quadrature.hpp"

namespace htp {

HtpPrior HtpPrior::from_kernel(const KernelSpec& kernel, const Points& x, const CopulaTransform& transform,
                               bool strict_copula) {
  kernel.validate();
  transform.validate();
  HtpPrior prior;
  prior.covariance = kernel_matrix(kernel, x);
  prior.transform = transform;
  prior.strict_copula = strict_copula;
  prior.kernel = kernel;
  prior.locations = x;
  return prior;
}

HtpPrior HtpPrior::from_covariance(const Eigen::MatrixXd& k, const CopulaTransform& transform,
                                   bool strict_copula) {
  transform.validate();
  if (k.rows() != k.cols()) throw std::invalid_argument("HtpPrior: covariance must be square");
  HtpPrior prior;
  prior.covariance = k;
  prior.transform = transform;
  prior.strict_copula = strict_copula;
  return prior;
}

Eigen::MatrixXd htp_sample(const HtpPrior& prior, int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("htp_sample: count must be nonnegative");
  const CholeskyFactor chol(prior.covariance);
  const Eigen::MatrixXd lower = chol.lower();
  const Eigen::Index n = prior.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd draws(count, n);
  Eigen::VectorXd xi(n);
  for (int s = 0; s < count; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) xi(i) = gauss(rng);
    const Eigen::VectorXd z = lower * xi;
    for (Eigen::Index i = 0; i < n; ++i) draws(s, i) = warp(prior.transform, z(i));
  }
  return draws;
}

double htp_log_density(const HtpPrior& prior, const Eigen::VectorXd& f) {
  const Eigen::Index n = prior.size();
  if (f.size() != n) throw std::invalid_argument("htp_log_density: dimension mismatch");
  const double sigma2 = prior.transform.sigma2;
  if (prior.strict_copula) {
    const double dev = (prior.covariance.diagonal().array() - sigma2).abs().maxCoeff();
    if (dev > 1e-8) {
      throw std::invalid_argument("htp_log_density: diag(K) must equal the copula variance sigma2");
    }
  }
  const CholeskyFactor chol(prior.covariance);
  Eigen::VectorXd z(n);
  double log_marginals = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    z(i) = unwarp(prior.transform, f(i));
    log_marginals += log_pdf(prior.transform.marginal, f(i));
  }
  const double quad = z.dot(chol.solve(z)) - z.squaredNorm() / sigma2;
  const double log_det = chol.log_determinant() - n * std::log(sigma2);
  return log_marginals - 0.5 * log_det - 0.5 * quad;
}

double HprPredictive::median() const { return warp(transform, z_mean()); }

double HprPredictive::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("HprPredictive::quantile: q must lie in (0, 1)");
  return warp(transform, z_mean() + std::sqrt(z_variance()) * normal::quantile(q));
}

double HprPredictive::density(double f) const {
  const double z = unwarp(transform, f);
  const double sd = std::sqrt(z_variance());
  const WarpDerivatives d = warp_derivatives(transform, z);
  const double r = (z - z_mean()) / sd;
  return std::exp(-0.5 * r * r) / (sd * std::sqrt(2.0 * std::numbers::pi)) / d.d1;
}

double HprPredictive::mean_monte_carlo(int samples, std::uint64_t seed) const {
  if (samples < 1) throw std::invalid_argument("mean_monte_carlo: samples must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(z_mean(), std::sqrt(z_variance()));
  double acc = 0.0;
  for (int s = 0; s < samples; ++s) acc += warp(transform, gauss(rng));
  return acc / samples;
}

double HprPredictive::mean_quadrature(int nodes) const {
  const QuadratureRule rule = gauss_hermite_normal(nodes);
  const double sd = std::sqrt(z_variance());
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    acc += rule.weights[i] * warp(transform, z_mean() + sd * rule.nodes[i]);
  }
  return acc;
}

HprPredictive hpr_predict_latent(const HtpPrior& prior, const Eigen::VectorXd& z_obs,
                                 const Eigen::VectorXd& x_star) {
  if (!prior.kernel) throw std::invalid_argument("hpr_predict: prior was built without a kernel");
  if (x_star.size() != prior.locations.cols()) throw std::invalid_argument("hpr_predict: dimension mismatch");
  const Points star = x_star.transpose();
  const Eigen::VectorXd k_star = cross_kernel(*prior.kernel, prior.locations, star).col(0);
  const double k_ss = prior.kernel->sigma2 + prior.kernel->noise;
  HprPredictive out;
  out.z_posterior = gp_predict(prior.covariance, k_star, k_ss, z_obs);
  out.transform = prior.transform;
  return out;
}

HprPredictive hpr_predict(const HtpPrior& prior, const Eigen::VectorXd& f_obs, const Eigen::VectorXd& x_star) {
  Eigen::VectorXd z_obs(f_obs.size());
  for (Eigen::Index i = 0; i < f_obs.size(); ++i) z_obs(i) = unwarp(prior.transform, f_obs(i));
  return hpr_predict_latent(prior, z_obs, x_star);
}

}  // namespace htp
