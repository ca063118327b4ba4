#ifndef HTP_MCMC_HPP_
#define HTP_MCMC_HPP_

#include <cstdint>
#include <functional>

#include <Eigen/Core>

#include "htp/hpc.hpp"

namespace htp {

// Reference sampler for the classification posterior exp{J(z)}:
// component-wise Metropolis-within-Gibbs with Gaussian random-walk
// proposals whose per-coordinate scales adapt toward 0.44 acceptance during
// burn-in and are frozen afterwards.

struct ChainConfig {
  int burn_in = 5000;          // sweeps
  int samples = 20000;         // retained draws per chain
  int thin = 1;                // sweeps between retained draws
  double proposal_scale = 0.5; // initial per-coordinate scale
  std::uint64_t seed = 0;
  int chains = 4;
  double target_acceptance = 0.44;
  bool include_likelihood = true;  // false samples the prior N(0, K)

  void validate() const;
};

struct ChainResult {
  Eigen::MatrixXd draws;          // (chains * samples) x dim, chain-major
  int chains = 0;
  int samples_per_chain = 0;
  Eigen::VectorXd acceptance;     // post-burn-in acceptance rate per chain
  Eigen::VectorXd proposal_scales;  // adapted scales of chain 0
  Eigen::VectorXd rhat;           // potential scale reduction per coordinate
  double max_rhat = 0.0;

  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
};

/// Throws std::invalid_argument when the latent size exceeds 30 and
/// NumericalError when a chain's acceptance stays below 0.01.
ChainResult sample_posterior(const HpcModel& model, const ChainConfig& config);

/// The same sampler on an arbitrary log density; each coordinate update
/// re-evaluates log_target in full.
ChainResult sample_metropolis_within_gibbs(const std::function<double(const Eigen::VectorXd&)>& log_target,
                                           const Eigen::VectorXd& start, const ChainConfig& config);

struct ChainPrediction {
  Eigen::VectorXd probabilities;
  Eigen::VectorXd standard_error;  // batch means over draws
};

/// Averages softmax(warp(z_*)) with one z_* ~ p(z_* | X, z, x_*) per draw.
ChainPrediction predictive_from_chain(const HpcModel& model, const ChainResult& chain, const Eigen::VectorXd& x_star,
                                      std::uint64_t seed = 0);

/// Gelman-Rubin R-hat of equally long chains stacked chain-major.
double potential_scale_reduction(const Eigen::VectorXd& stacked, int chains);

}  // namespace htp

#endif  // HTP_MCMC_HPP_
