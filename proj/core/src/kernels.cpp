#include "htp/kernels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace htp {
namespace {

// The exponent's multiplier of lambda: sum cos(diff) - d, or -|diff|^2 / 2.
double lambda_coefficient(KernelFamily family, const Eigen::Ref<const Eigen::VectorXd>& a,
                          const Eigen::Ref<const Eigen::VectorXd>& b) {
  double acc = 0.0;
  switch (family) {
    case KernelFamily::von_mises:
      // cos(t) - 1 = -2 sin^2(t/2), exact for small differences
      for (Eigen::Index k = 0; k < a.size(); ++k) {
        const double h = std::sin(0.5 * (a(k) - b(k)));
        acc -= 2.0 * h * h;
      }
      return acc;
    case KernelFamily::squared_exponential:
      return -0.5 * (a - b).squaredNorm();
  }
  throw std::invalid_argument("unknown kernel family");
}

Eigen::MatrixXd lambda_coefficients(const KernelSpec& k, const Points& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd coef(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    coef(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      coef(i, j) = coef(j, i) = lambda_coefficient(k.family, x.row(i).transpose(), x.row(j).transpose());
    }
  }
  return coef;
}

}  // namespace

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::von_mises: return "von_mises";
    case KernelFamily::squared_exponential: return "squared_exponential";
  }
  return "unknown";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "von_mises") return KernelFamily::von_mises;
  if (name == "squared_exponential") return KernelFamily::squared_exponential;
  throw std::invalid_argument("unknown kernel family '" + std::string(name) + "'");
}

void KernelSpec::validate() const {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("kernel sigma2 must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("kernel lambda must be >= 0");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw std::invalid_argument("kernel noise must be >= 0");
}

double kernel_eval(const KernelSpec& k, const Eigen::Ref<const Eigen::VectorXd>& a,
                   const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("kernel_eval: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
  return k.sigma2 * std::exp(k.lambda * lambda_coefficient(k.family, a, b));
}

Eigen::MatrixXd kernel_matrix_noiseless(const KernelSpec& k, const Points& x) {
  return k.sigma2 * (k.lambda * lambda_coefficients(k, x).array()).exp().matrix();
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& k, const Points& x) {
  Eigen::MatrixXd out = kernel_matrix_noiseless(k, x);
  out.diagonal().array() += k.noise;
  return out;
}

Eigen::MatrixXd cross_kernel(const KernelSpec& k, const Points& a, const Points& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("cross_kernel: dimension mismatch");
  Eigen::MatrixXd out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      out(i, j) = kernel_eval(k, a.row(i).transpose(), b.row(j).transpose());
    }
  }
  return out;
}

KernelGradients kernel_gradients(const KernelSpec& k, const Points& x) {
  const Eigen::MatrixXd coef = lambda_coefficients(k, x);
  const Eigen::MatrixXd shape = (k.lambda * coef.array()).exp().matrix();
  KernelGradients g;
  g.d_sigma2 = shape;
  g.d_lambda = k.sigma2 * shape.cwiseProduct(coef);
  g.d_noise = Eigen::MatrixXd::Identity(x.rows(), x.rows());
  return g;
}

}  // namespace htp
