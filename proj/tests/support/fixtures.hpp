#ifndef HTP_TESTS_FIXTURES_HPP_
#define HTP_TESTS_FIXTURES_HPP_

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include <htp/hpc.hpp>

namespace fixtures {

inline htp::Points random_angles(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  htp::Points x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) x(i, k) = u(rng);
  return x;
}

inline std::vector<int> random_labels(Eigen::Index n, int classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, classes - 1);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = pick(rng);
  return y;
}

inline htp::HpcModel random_model(Eigen::Index n, int classes, htp::MarginalFamily family, double b,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const htp::KernelSpec k{htp::KernelFamily::von_mises, 0.5 + 1.5 * u(rng), 0.3 + u(rng), 0.05 + 0.1 * u(rng)};
  const htp::CopulaTransform t{{family, b}, 1.0};
  return htp::HpcModel::make(random_angles(n, 2, rng), random_labels(n, classes, rng), classes, k, t);
}

/// Central difference of a scalar function.
inline double central(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline Eigen::VectorXd gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd p = x, q = x;
    p(k) += h;
    q(k) -= h;
    g(k) = (f(p) - f(q)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace fixtures

#endif  // HTP_TESTS_FIXTURES_HPP_
