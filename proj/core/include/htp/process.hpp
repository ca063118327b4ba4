#ifndef HTP_PROCESS_HPP_
#define HTP_PROCESS_HPP_

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "htp/gp.hpp"
#include "htp/kernels.hpp"
#include "htp/marginals.hpp"

namespace htp {

/// Heavy-tailed process prior on a finite set of locations:
/// z ~ N(0, K), f = warp(z).
///
/// With strict_copula the transform's sigma2 must equal every diagonal entry
/// of K, which is what makes the joint density a proper Gaussian copula with
/// marginals g_b. Classification relaxes this and treats the transform as a
/// plain monotone map.
struct HtpPrior {
  Eigen::MatrixXd covariance;
  CopulaTransform transform;
  bool strict_copula = true;
  std::optional<KernelSpec> kernel;  // needed for prediction at new points
  Points locations;

  static HtpPrior from_kernel(const KernelSpec& kernel, const Points& x, const CopulaTransform& transform,
                              bool strict_copula = true);
  static HtpPrior from_covariance(const Eigen::MatrixXd& k, const CopulaTransform& transform,
                                  bool strict_copula = true);

  Eigen::Index size() const { return covariance.rows(); }
};

/// count x n matrix of prior draws in f-space.
Eigen::MatrixXd htp_sample(const HtpPrior& prior, int count, std::uint64_t seed);

/// log p(f) = sum log g_b(f_i) - 1/2 log|K/sigma2| - 1/2 z^T (K^{-1} - I/sigma2) z,
/// z = unwarp(f). Requires diag(K) = sigma2 (tolerance 1e-8).
double htp_log_density(const HtpPrior& prior, const Eigen::VectorXd& f);

/// Predictive distribution at one test location. The z-space part is an
/// ordinary Gaussian; f-space summaries push it through warp.
struct HprPredictive {
  GaussianPosterior z_posterior;
  CopulaTransform transform;

  double z_mean() const { return z_posterior.scalar_mean(); }
  double z_variance() const { return z_posterior.scalar_variance(); }

  /// Median and quantiles are exact because warp is monotone.
  double median() const;
  double quantile(double q) const;
  /// Predictive density of f.
  double density(double f) const;
  /// E[f] by Monte-Carlo over z-samples.
  double mean_monte_carlo(int samples = 10000, std::uint64_t seed = 0) const;
  /// E[f] by Gauss-Hermite quadrature.
  double mean_quadrature(int nodes = 64) const;
};

/// Regression in f-space: observations are unwarped, then standard GP algebra.
HprPredictive hpr_predict(const HtpPrior& prior, const Eigen::VectorXd& f_obs,
                          const Eigen::VectorXd& x_star);

/// Same, with observations already in z-space.
HprPredictive hpr_predict_latent(const HtpPrior& prior, const Eigen::VectorXd& z_obs,
                                 const Eigen::VectorXd& x_star);

}  // namespace htp

#endif  // HTP_PROCESS_HPP_
