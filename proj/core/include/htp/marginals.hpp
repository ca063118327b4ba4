#ifndef HTP_MARGINALS_HPP_
#define HTP_MARGINALS_HPP_

#include <string>
#include <string_view>

namespace htp {

// Symmetric marginal families g_b with scale b. All are scale families,
// G_b(x) = G_1(x / b), which the warp derivatives below rely on.
//
//   laplace      g_b(x) = exp(-|x|/b) / (2b)
//   hypsec       g_b(x) = sech(pi x / 2b) / (2b)
//   student_t2   g_b(x) = 1 / (b (2 + (x/b)^2)^{3/2})   (scaled t, 2 dof)
//   gaussian     g_b(x) = N(x; 0, b^2)
enum class MarginalFamily { laplace, hypsec, student_t2, gaussian };

std::string_view to_string(MarginalFamily family);
MarginalFamily parse_marginal_family(std::string_view name);

struct MarginalSpec {
  MarginalFamily family = MarginalFamily::laplace;
  double b = 1.0;

  void validate() const;
};

double pdf(const MarginalSpec& m, double x);
double log_pdf(const MarginalSpec& m, double x);
double cdf(const MarginalSpec& m, double x);
/// Throws std::invalid_argument unless 0 < u < 1.
double quantile(const MarginalSpec& m, double u);

/// f = G_b^{-1}(Phi_{0,sigma2}(z)) and its inverse.
struct CopulaTransform {
  MarginalSpec marginal;
  double sigma2 = 1.0;

  void validate() const;
};

double warp(const CopulaTransform& t, double z);
double unwarp(const CopulaTransform& t, double f);

struct WarpDerivatives {
  double value = 0.0;  // f
  double d1 = 0.0;     // df/dz
  double d2 = 0.0;     // d2f/dz2
  double d3 = 0.0;     // d3f/dz3
  double d_b = 0.0;    // df/db at fixed z
};

/// Analytic derivatives of warp. Because every family is a scale family,
/// f, df/dz and d2f/dz2 are all proportional to b, so d(.)/db = (.)/b.
WarpDerivatives warp_derivatives(const CopulaTransform& t, double z);

/// Numerical check of the shape assumptions behind selective shrinkage:
/// slope above one on |z| <= z_max and convexity on [0, z_max].
struct ShapeCheck {
  double min_slope = 0.0;
  double min_curvature = 0.0;
  bool slope_above_one = false;
  bool convex = false;
  bool holds() const { return slope_above_one && convex; }
};

ShapeCheck check_shrinkage_shape(const CopulaTransform& t, double z_max = 6.0, int grid = 1201);

/// Smallest scale b* such that every b > b* passes check_shrinkage_shape
/// for this family at the given sigma2. Returns +inf if the warp is not
/// convex on [0, z_max] for any b (e.g. the gaussian family).
double shape_threshold_scale(MarginalFamily family, double sigma2 = 1.0, double z_max = 6.0);

}  // namespace htp

#endif  // HTP_MARGINALS_HPP_
