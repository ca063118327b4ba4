#ifndef HTP_HPC_HPP_
#define HTP_HPC_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "htp/gp.hpp"
#include "htp/kernels.hpp"
#include "htp/marginals.hpp"

namespace htp {

// Multiclass heavy-tailed process classification.
//
// Latent vectors of length nC are stacked class-major:
//   z = (z_1^1 .. z_n^1, z_1^2 .. z_n^2, ..., z_1^C .. z_n^C).
// Block c has its own kernel K_c and transform (scale b_c); f = warp(z)
// elementwise and labels follow a softmax over f_i = (f_i^1 .. f_i^C).

struct HpcModel {
  int class_count = 0;
  std::vector<KernelSpec> kernels;         // one per class block
  std::vector<CopulaTransform> transforms; // one per class block
  Points inputs;                           // n x d
  std::vector<int> labels;                 // n entries in [0, class_count)

  static HpcModel make(const Points& inputs, std::vector<int> labels, int class_count,
                       const KernelSpec& kernel, const CopulaTransform& transform);

  Eigen::Index point_count() const { return inputs.rows(); }
  Eigen::Index latent_size() const { return point_count() * class_count; }

  /// Stacked 1-of-C targets y.
  Eigen::VectorXd targets() const;
  void validate() const;
};

/// Block-diagonal K with one Cholesky factor per class.
class BlockKernel {
 public:
  explicit BlockKernel(const HpcModel& model);

  int blocks() const { return static_cast<int>(factors_.size()); }
  Eigen::Index block_size() const { return block_size_; }
  const Eigen::MatrixXd& block(int c) const { return blocks_[c]; }
  const CholeskyFactor& factor(int c) const { return factors_[c]; }

  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  double log_determinant() const;
  Eigen::MatrixXd dense() const;
  Eigen::MatrixXd dense_inverse() const;

 private:
  Eigen::Index block_size_ = 0;
  std::vector<Eigen::MatrixXd> blocks_;
  std::vector<CholeskyFactor> factors_;
};

/// pi_i^c = exp(f_i^c) / sum_c' exp(f_i^c'), log-sum-exp stabilized.
Eigen::VectorXd softmax_likelihood(const Eigen::VectorXd& f_point);

/// J(z) = y^T f - sum_i log sum_c exp f_i^c - z^T K^{-1} z / 2 - log|K| / 2.
double log_posterior(const HpcModel& model, const Eigen::VectorXd& z);

struct PosteriorDerivatives {
  Eigen::VectorXd gradient;  // diag(f') (y - pi) - K^{-1} z
  Eigen::MatrixXd hessian;   // diag(f'') diag(y - pi) - diag(f') W diag(f') - K^{-1}
};

PosteriorDerivatives posterior_derivatives(const HpcModel& model, const Eigen::VectorXd& z);

enum class IndefinitePolicy { clip, error };

struct ModeOptions {
  double tolerance = 1e-6;  // on the max-norm of the gradient
  int max_iterations = 5000;
  double armijo = 1e-4;
  /// Precondition the ascent direction with K^{-1} + diag(f') W diag(f')
  /// (plus the concave part of the curvature term). Plain gradient ascent
  /// needs a number of steps proportional to the condition number of K.
  bool precondition = true;
  IndefinitePolicy indefinite = IndefinitePolicy::clip;
  double eigenvalue_floor = 1e-8;
};

struct LaplaceState {
  Eigen::VectorXd z_hat;
  Eigen::VectorXd f_hat;
  Eigen::VectorXd pi_hat;
  Eigen::VectorXd df_dz;    // f'
  Eigen::VectorXd d2f_dz2;  // f''
  Eigen::VectorXd d3f_dz3;  // f'''
  Eigen::VectorXd alpha;    // K^{-1} z_hat
  Eigen::MatrixXd Pi;       // nC x n stacked diag(pi^c)
  Eigen::MatrixXd W;        // diag(pi) - Pi Pi^T
  Eigen::MatrixXd hessian;  // Hessian of J at z_hat
  Eigen::MatrixXd posterior_covariance;  // (-hessian)^{-1}, eigen-clipped if needed
  double log_posterior = 0.0;
  double log_det_neg_hessian = 0.0;
  double log_marginal = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool hessian_clipped = false;
  double min_neg_hessian_eigenvalue = 0.0;  // NaN when -hessian factored directly
  std::string diagnostic;
};

/// Mode of J by (preconditioned) gradient ascent with Armijo backtracking.
/// Throws ConvergenceError when max_iterations is exhausted.
LaplaceState find_mode(const HpcModel& model, const Eigen::VectorXd& z0, const ModeOptions& options = {});
LaplaceState find_mode(const HpcModel& model, const ModeOptions& options = {});

/// log q(y|X) = J(z_hat) - 1/2 log|-H|; the 2 pi factors of the prior
/// normalizer and of the Laplace integral cancel.
double log_marginal_likelihood(const HpcModel& model, const LaplaceState& state);

enum class PredictiveMethod { monte_carlo, quadrature };

struct PredictOptions {
  PredictiveMethod method = PredictiveMethod::monte_carlo;
  int samples = 10000;
  std::uint64_t seed = 0;
  int quadrature_nodes = 20;  // per class dimension
};

struct ClassPrediction {
  Eigen::VectorXd probabilities;
  Eigen::VectorXd standard_error;  // zero for quadrature
  GaussianPosterior latent;        // q(z_* | X, y, x_*) over the C classes
};

/// Latent predictive q(z_*) = int p(z_*|z) q(z) dz for one test input.
GaussianPosterior latent_predictive(const HpcModel& model, const LaplaceState& state,
                                    const Eigen::VectorXd& x_star);

ClassPrediction laplace_predict(const HpcModel& model, const LaplaceState& state, const Eigen::VectorXd& x_star,
                                const PredictOptions& options = {});
ClassPrediction laplace_predict(const HpcModel& model, const LaplaceState& state, const Eigen::VectorXd& x_star,
                                int samples, std::uint64_t seed);

/// Expected softmax of warp(z) under a C-dimensional Gaussian on z.
ClassPrediction expected_softmax(const std::vector<CopulaTransform>& transforms, const GaussianPosterior& latent,
                                 const PredictOptions& options);

}  // namespace htp

#endif  // HTP_HPC_HPP_
