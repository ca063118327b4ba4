#ifndef HTP_SHRINKAGE_HPP_
#define HTP_SHRINKAGE_HPP_

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "htp/marginals.hpp"

namespace htp {

// Idealized uneven sampling: n - 1 coincident "dense" locations D (indices
// 0..n-2) and one isolated "sparse" location s (index n-1).
//
//   K~(d, d') = 1,  K~(d, s) = 0,  K~(s, s) = eps / (eps + n - 2),  K = K~ + eps I
struct IdealizedGeometry {
  int n = 3;
  double epsilon = 1.0;

  void validate() const;
  Eigen::Index sparse_index() const { return n - 1; }
  Eigen::Index dense_count() const { return n - 1; }
};

Eigen::MatrixXd build_idealized_kernel_tilde(const IdealizedGeometry& geometry);
Eigen::MatrixXd build_idealized_kernel(const IdealizedGeometry& geometry);
Eigen::MatrixXd build_idealized_kernel(int n, double epsilon);

/// sum_{d in D} y_d - y_s.
double gp_set_sum_residual(const Eigen::VectorXd& y, const IdealizedGeometry& geometry);
/// (K~(x_d, X) - K~(x_s, X)) K^{-1} y, maximized in absolute value over d.
double gp_set_kernel_residual(const Eigen::VectorXd& y, const IdealizedGeometry& geometry);

/// Membership in the set of measurements giving equal posteriors at D and s.
/// The sum form uses |residual| <= tol (1 + |y|_1); the kernel-row form
/// applies the same test after undoing its 1 / (eps + n - 1) scaling.
bool gp_set_membership(const Eigen::VectorXd& y, const IdealizedGeometry& geometry, double tol = 1e-12);
bool gp_set_membership_kernel_form(const Eigen::VectorXd& y, const IdealizedGeometry& geometry,
                                   double tol = 1e-12);

/// Orthogonal projection onto {y : sum_D y_d = y_s}.
Eigen::VectorXd project_to_gp_set(const Eigen::VectorXd& y, const IdealizedGeometry& geometry);

/// Posterior of z at a dense index d and at s.
struct PosteriorPair {
  double mean_dense = 0.0;
  double mean_sparse = 0.0;
  double variance_dense = 0.0;
  double variance_sparse = 0.0;

  double mean_gap() const;
  double variance_gap() const;
};

struct EqualPosteriorReport {
  PosteriorPair gpr;  // observations y
  PosteriorPair hpr;  // observations warp(y), posterior in z-space
  double tolerance = 1e-10;
  bool gpr_equal = false;
  bool hpr_equal = false;
};

/// Requires y in the GP set (std::invalid_argument otherwise).
EqualPosteriorReport verify_equal_posteriors(const IdealizedGeometry& geometry, const Eigen::VectorXd& y,
                                             const CopulaTransform& transform, double tolerance = 1e-10);

struct ShrinkageReport {
  Eigen::VectorXd y;        // GPR measurement
  Eigen::VectorXd y_prime;  // warp(y)
  Eigen::Index d_star = 0;  // argmax_{d in D} |y_d|
  double lhs = 0.0;         // |y'_s|
  double rhs = 0.0;         // |y'_{d*} / y_{d*} * y_s|
  double ratio = 0.0;       // lhs / rhs
  double gap = 0.0;         // lhs - rhs
  PosteriorPair gpr;
  PosteriorPair hpr;
  ShapeCheck shape;
  bool sparse_exceeds_dense = false;  // |y_{d*}| < |y_s|
  bool strict = false;                // lhs > rhs (1 + 1e-12)
  bool equality = false;              // |lhs - rhs| <= 1e-12 max(1, rhs)

  bool assumptions_hold() const { return shape.holds(); }
};

/// Throws std::invalid_argument for zero y, y outside the GP set, or y whose
/// dense entries are not all nonzero with a common sign.
ShrinkageReport verify_shrinkage_inequality(const IdealizedGeometry& geometry, const Eigen::VectorXd& y,
                                            const CopulaTransform& transform);

nlohmann::json to_json(const ShrinkageReport& report, const IdealizedGeometry& geometry,
                       const CopulaTransform& transform);

}  // namespace htp

#endif  // HTP_SHRINKAGE_HPP_
