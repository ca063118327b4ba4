#ifndef HTP_KERNELS_HPP_
#define HTP_KERNELS_HPP_

#include <string_view>

#include <Eigen/Core>

namespace htp {

/// Points are stored row-wise: X(i, k) is coordinate k of point i.
using Points = Eigen::MatrixXd;

// von_mises:            sigma2 * exp(lambda * (sum_k cos(a_k - b_k) - d))
// squared_exponential:  sigma2 * exp(-lambda * |a - b|^2 / 2)
// The two coincide to second order for small angular differences.
enum class KernelFamily { von_mises, squared_exponential };

std::string_view to_string(KernelFamily family);
KernelFamily parse_kernel_family(std::string_view name);

struct KernelSpec {
  KernelFamily family = KernelFamily::von_mises;
  double sigma2 = 1.0;
  double lambda = 1.0;
  double noise = 1e-2;  // epsilon added to the diagonal

  void validate() const;
};

/// Noise-free kernel value k(a, b). Throws on dimension mismatch.
double kernel_eval(const KernelSpec& k, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b);

/// K~(X, X) without the noise term.
Eigen::MatrixXd kernel_matrix_noiseless(const KernelSpec& k, const Points& x);

/// K = K~(X, X) + noise * I.
Eigen::MatrixXd kernel_matrix(const KernelSpec& k, const Points& x);

/// K~(A, B), rows indexed by A.
Eigen::MatrixXd cross_kernel(const KernelSpec& k, const Points& a, const Points& b);

struct KernelGradients {
  Eigen::MatrixXd d_sigma2;
  Eigen::MatrixXd d_lambda;
  Eigen::MatrixXd d_noise;
};

/// Entrywise derivatives of kernel_matrix with respect to each parameter.
KernelGradients kernel_gradients(const KernelSpec& k, const Points& x);

}  // namespace htp

#endif  // HTP_KERNELS_HPP_
