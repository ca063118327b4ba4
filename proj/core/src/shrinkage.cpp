#include "htp/shrinkage.hpp"

#include <cmath>
#include <stdexcept>

#include "htp/gp.hpp"

namespace htp {

void IdealizedGeometry::validate() const {
  if (n <= 2) throw std::invalid_argument("idealized geometry needs n > 2");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("idealized geometry needs epsilon > 0");
}

Eigen::MatrixXd build_idealized_kernel_tilde(const IdealizedGeometry& geometry) {
  geometry.validate();
  const Eigen::Index m = geometry.dense_count();
  Eigen::MatrixXd kt = Eigen::MatrixXd::Zero(geometry.n, geometry.n);
  kt.topLeftCorner(m, m).setOnes();
  kt(m, m) = geometry.epsilon / (geometry.epsilon + geometry.n - 2);
  return kt;
}

Eigen::MatrixXd build_idealized_kernel(const IdealizedGeometry& geometry) {
  Eigen::MatrixXd k = build_idealized_kernel_tilde(geometry);
  k.diagonal().array() += geometry.epsilon;
  return k;
}

Eigen::MatrixXd build_idealized_kernel(int n, double epsilon) { return build_idealized_kernel({n, epsilon}); }

namespace {

void check_size(const Eigen::VectorXd& y, const IdealizedGeometry& geometry) {
  geometry.validate();
  if (y.size() != geometry.n) throw std::invalid_argument("measurement size does not match geometry");
}

PosteriorPair posterior_pair(const Eigen::MatrixXd& kt, const Eigen::MatrixXd& k, const Eigen::VectorXd& obs,
                             Eigen::Index d, Eigen::Index s) {
  const GaussianPosterior pd = gp_posterior_at_training(kt, k, obs, d);
  const GaussianPosterior ps = gp_posterior_at_training(kt, k, obs, s);
  return {pd.scalar_mean(), ps.scalar_mean(), pd.scalar_variance(), ps.scalar_variance()};
}

}  // namespace

double PosteriorPair::mean_gap() const { return std::abs(mean_dense - mean_sparse); }
double PosteriorPair::variance_gap() const { return std::abs(variance_dense - variance_sparse); }

double gp_set_sum_residual(const Eigen::VectorXd& y, const IdealizedGeometry& geometry) {
  check_size(y, geometry);
  return y.head(geometry.dense_count()).sum() - y(geometry.sparse_index());
}

double gp_set_kernel_residual(const Eigen::VectorXd& y, const IdealizedGeometry& geometry) {
  check_size(y, geometry);
  const Eigen::MatrixXd kt = build_idealized_kernel_tilde(geometry);
  const CholeskyFactor k(build_idealized_kernel(geometry));
  const Eigen::VectorXd alpha = k.solve(y);
  const Eigen::Index s = geometry.sparse_index();
  double worst = 0.0;
  for (Eigen::Index d = 0; d < geometry.dense_count(); ++d) {
    const double r = (kt.row(d) - kt.row(s)).dot(alpha);
    if (std::abs(r) > std::abs(worst)) worst = r;
  }
  return worst;
}

bool gp_set_membership(const Eigen::VectorXd& y, const IdealizedGeometry& geometry, double tol) {
  return std::abs(gp_set_sum_residual(y, geometry)) <= tol * (1.0 + y.lpNorm<1>());
}

bool gp_set_membership_kernel_form(const Eigen::VectorXd& y, const IdealizedGeometry& geometry, double tol) {
  const double scale = geometry.epsilon + geometry.n - 1;
  return std::abs(gp_set_kernel_residual(y, geometry)) * scale <= tol * (1.0 + y.lpNorm<1>());
}

Eigen::VectorXd project_to_gp_set(const Eigen::VectorXd& y, const IdealizedGeometry& geometry) {
  check_size(y, geometry);
  Eigen::VectorXd a = Eigen::VectorXd::Ones(geometry.n);
  a(geometry.sparse_index()) = -1.0;
  Eigen::VectorXd p = y - (a.dot(y) / a.squaredNorm()) * a;
  // exact on the sparse coordinate so the sum form holds to rounding of the sum
  p(geometry.sparse_index()) = p.head(geometry.dense_count()).sum();
  return p;
}

EqualPosteriorReport verify_equal_posteriors(const IdealizedGeometry& geometry, const Eigen::VectorXd& y,
                                             const CopulaTransform& transform, double tolerance) {
  check_size(y, geometry);
  transform.validate();
  if (!gp_set_membership(y, geometry)) throw std::invalid_argument("verify_equal_posteriors: y is not in the GP set");
  const Eigen::MatrixXd kt = build_idealized_kernel_tilde(geometry);
  const Eigen::MatrixXd k = build_idealized_kernel(geometry);
  const Eigen::Index s = geometry.sparse_index();

  EqualPosteriorReport report;
  report.tolerance = tolerance;
  report.gpr = posterior_pair(kt, k, y, 0, s);
  Eigen::VectorXd z(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) z(i) = unwarp(transform, warp(transform, y(i)));
  report.hpr = posterior_pair(kt, k, z, 0, s);
  auto equal = [&](const PosteriorPair& p) { return p.mean_gap() <= tolerance && p.variance_gap() <= tolerance; };
  report.gpr_equal = equal(report.gpr);
  report.hpr_equal = equal(report.hpr);
  return report;
}

ShrinkageReport verify_shrinkage_inequality(const IdealizedGeometry& geometry, const Eigen::VectorXd& y,
                                            const CopulaTransform& transform) {
  check_size(y, geometry);
  transform.validate();
  if (y.lpNorm<Eigen::Infinity>() == 0.0) throw std::invalid_argument("verify_shrinkage_inequality: y is zero");
  if (!gp_set_membership(y, geometry)) throw std::invalid_argument("verify_shrinkage_inequality: y is not in the GP set");
  const Eigen::Index m = geometry.dense_count();
  const double sign = y(0) > 0.0 ? 1.0 : -1.0;
  for (Eigen::Index d = 0; d < m; ++d) {
    if (!(y(d) * sign > 0.0)) {
      throw std::invalid_argument("verify_shrinkage_inequality: dense measurements must share a nonzero sign");
    }
  }

  ShrinkageReport r;
  r.shape = check_shrinkage_shape(transform);
  r.y = y;
  r.y_prime.resize(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) r.y_prime(i) = warp(transform, y(i));
  y.head(m).cwiseAbs().maxCoeff(&r.d_star);
  const Eigen::Index s = geometry.sparse_index();
  const double yd = y(r.d_star);
  const double ys = y(s);
  r.sparse_exceeds_dense = std::abs(yd) < std::abs(ys);
  r.lhs = std::abs(r.y_prime(s));
  r.rhs = std::abs(r.y_prime(r.d_star) / yd * ys);
  r.ratio = r.lhs / r.rhs;
  r.gap = r.lhs - r.rhs;
  r.strict = r.lhs > r.rhs * (1.0 + 1e-12);
  r.equality = std::abs(r.gap) <= 1e-12 * std::max(1.0, r.rhs);

  const Eigen::MatrixXd kt = build_idealized_kernel_tilde(geometry);
  const Eigen::MatrixXd k = build_idealized_kernel(geometry);
  r.gpr = posterior_pair(kt, k, y, r.d_star, s);
  Eigen::VectorXd z(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) z(i) = unwarp(transform, r.y_prime(i));
  r.hpr = posterior_pair(kt, k, z, r.d_star, s);
  return r;
}

nlohmann::json to_json(const ShrinkageReport& r, const IdealizedGeometry& geometry, const CopulaTransform& t) {
  auto pair = [](const PosteriorPair& p) {
    return nlohmann::json{{"mean_dense", p.mean_dense},
                          {"mean_sparse", p.mean_sparse},
                          {"variance_dense", p.variance_dense},
                          {"variance_sparse", p.variance_sparse}};
  };
  return nlohmann::json{
      {"n", geometry.n},
      {"epsilon", geometry.epsilon},
      {"family", std::string(to_string(t.marginal.family))},
      {"b", t.marginal.b},
      {"sigma2", t.sigma2},
      {"y", std::vector<double>(r.y.data(), r.y.data() + r.y.size())},
      {"y_prime", std::vector<double>(r.y_prime.data(), r.y_prime.data() + r.y_prime.size())},
      {"d_star", r.d_star},
      {"lhs", r.lhs},
      {"rhs", r.rhs},
      {"ratio", r.ratio},
      {"gap", r.gap},
      {"sparse_exceeds_dense", r.sparse_exceeds_dense},
      {"strict", r.strict},
      {"equality", r.equality},
      {"shape",
       {{"min_slope", r.shape.min_slope},
        {"min_curvature", r.shape.min_curvature},
        {"slope_above_one", r.shape.slope_above_one},
        {"convex", r.shape.convex}}},
      {"assumptions_hold", r.assumptions_hold()},
      {"gpr_posterior", pair(r.gpr)},
      {"hpr_posterior_z", pair(r.hpr)},
  };
}

}  // namespace htp
