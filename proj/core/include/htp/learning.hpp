#ifndef HTP_LEARNING_HPP_
#define HTP_LEARNING_HPP_

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "htp/hpc.hpp"

namespace htp {

struct KernelParameterGradient {
  double sigma2 = 0.0;
  double lambda = 0.0;
  double noise = 0.0;
};

/// Total derivatives of log q(y|X) at a converged Laplace state. The mode's
/// own dependence on each parameter is included through the implicit
/// function theorem applied to z_hat = K diag(f') (y - pi).
struct EvidenceGradient {
  std::vector<KernelParameterGradient> kernel;  // per class block
  Eigen::VectorXd scale;                        // d/db_c per class block
};

EvidenceGradient evidence_gradients(const HpcModel& model, const LaplaceState& state);

struct FitOptions {
  bool learn_kernel = true;
  bool learn_noise = true;
  bool tie_kernels = true;  // one (sigma2, lambda, noise) shared by all blocks
  bool learn_scale = true;
  bool tie_scale = true;    // one b shared by all blocks
  double regularizer = 0.1; // weight of the l2 penalty on log-parameters
  int max_iterations = 50;
  double gradient_tolerance = 1e-4;
  double noise_floor = 1e-8;
  double log_bound = 9.0;   // |log p - center| is kept below this
  ModeOptions mode;
  /// Penalty centers in log space; defaults to the initial log-parameters.
  std::optional<Eigen::VectorXd> prior_center;
};

struct FitTrace {
  std::vector<double> objective;      // regularized objective per accepted iterate
  std::vector<double> log_marginal;   // unregularized evidence per accepted iterate
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

struct FitResult {
  HpcModel model;
  LaplaceState state;
  FitTrace trace;
  Eigen::VectorXd log_parameters;
  std::vector<std::string> parameter_names;
};

/// Maximizes log q(y|X) - regularizer * |phi - center|^2 over the log
/// parameters phi with L-BFGS and a monotone backtracking line search.
FitResult fit(const HpcModel& initial, const FitOptions& options = {});

/// Parameter layout used by fit, exposed for tests.
std::vector<std::string> parameter_names(const HpcModel& model, const FitOptions& options);
Eigen::VectorXd pack_log_parameters(const HpcModel& model, const FitOptions& options);
HpcModel unpack_log_parameters(const HpcModel& model, const FitOptions& options, const Eigen::VectorXd& phi);
Eigen::VectorXd log_parameter_gradient(const HpcModel& model, const FitOptions& options,
                                       const EvidenceGradient& gradient);

}  // namespace htp

#endif  // HTP_LEARNING_HPP_
