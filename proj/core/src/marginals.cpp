#include "htp/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

#include "htp/normal.hpp"

namespace htp {
namespace {

using std::numbers::ln2;
using std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

// Central/tail switch: below this centered probability w = 2G - 1 the
// quantile is evaluated from w, above it from the log upper tail.
constexpr double kCentralLimit = 0.5;

// Standardized (b = 1) pieces of a family, for s >= 0 unless noted.
//   centered(s)      w = 2 G_1(s) - 1
//   log_upper(s)     log(1 - G_1(s))
//   from_centered(w) inverse of centered
//   from_log_upper   inverse of log_upper
//   log_density(s)   log g_1(s), any sign
//   score(s)         g_1'(s) / g_1(s), any sign
//   score_slope(s)   d score / ds, any sign
struct Standardized {
  double (*centered)(double);
  double (*log_upper)(double);
  double (*from_centered)(double);
  double (*from_log_upper)(double);
  double (*log_density)(double);
  double (*score)(double);
  double (*score_slope)(double);
};

double sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// --- laplace ---------------------------------------------------------------
const Standardized kLaplace{
    [](double s) { return -std::expm1(-s); },
    [](double s) { return -ln2 - s; },
    [](double w) { return -std::log1p(-w); },
    [](double lt) { return -ln2 - lt; },
    [](double s) { return -ln2 - std::abs(s); },
    [](double s) { return -sign_of(s); },
    [](double) { return 0.0; },
};

// --- hyperbolic secant -------------------------------------------------------
// G_1(s) = (2/pi) atan(exp(pi s / 2)).
double hypsec_log_upper(double s) {
  const double a = 0.5 * pi * s;
  if (a > 20.0) {
    // atan(e^-a) = e^-a (1 - e^-2a / 3 + ...)
    return std::log(2.0 / pi) - a + std::log1p(-std::exp(-2.0 * a) / 3.0);
  }
  return std::log(2.0 / pi * std::atan(std::exp(-a)));
}

double hypsec_from_log_upper(double lt) {
  // a = -log tan(pi t / 2)
  const double y = 0.5 * pi * std::exp(lt);
  double log_tan;
  if (y < 1e-4) {
    log_tan = std::log(0.5 * pi) + lt + y * y / 3.0;
  } else {
    log_tan = std::log(std::tan(y));
  }
  return -2.0 / pi * log_tan;
}

const Standardized kHypsec{
    [](double s) { return 2.0 / pi * std::atan(std::sinh(0.5 * pi * s)); },
    hypsec_log_upper,
    [](double w) { return 2.0 / pi * std::asinh(std::tan(0.5 * pi * w)); },
    hypsec_from_log_upper,
    [](double s) {
      const double a = 0.5 * pi * std::abs(s);
      return -a - std::log1p(std::exp(-2.0 * a));
    },
    [](double s) { return -0.5 * pi * std::tanh(0.5 * pi * s); },
    [](double s) {
      const double sech = 1.0 / std::cosh(0.5 * pi * s);
      return -0.25 * pi * pi * sech * sech;
    },
};

// --- student-t inspired (t with 2 dof, scaled by 1/sqrt(2)) ----------------
// G_1(s) = 1/2 + s / (2 sqrt(2 + s^2)).
const Standardized kStudentT2{
    [](double s) { return s / std::hypot(kSqrt2, s); },
    [](double s) {
      const double r = std::hypot(kSqrt2, s);
      return -std::log(r) - std::log(r + s);
    },
    [](double w) { return w * kSqrt2 / std::sqrt((1.0 - w) * (1.0 + w)); },
    [](double lt) {
      const double t = std::exp(lt);
      return (1.0 - 2.0 * t) * std::exp(-0.5 * (ln2 + lt + std::log1p(-t)));
    },
    [](double s) { return -1.5 * std::log(2.0 + s * s); },
    [](double s) { return -3.0 * s / (2.0 + s * s); },
    [](double s) {
      const double q = 2.0 + s * s;
      return -3.0 * (2.0 - s * s) / (q * q);
    },
};

// --- gaussian ----------------------------------------------------------------
const Standardized kGaussian{
    [](double s) { return std::erf(s / kSqrt2); },
    [](double s) { return normal::log_upper_tail(s); },
    [](double w) { return kSqrt2 * boost::math::erf_inv(w); },
    [](double lt) { return normal::upper_quantile_from_log(lt); },
    [](double s) { return normal::log_pdf(s); },
    [](double s) { return -s; },
    [](double) { return -1.0; },
};

const Standardized& standardized(MarginalFamily family) {
  switch (family) {
    case MarginalFamily::laplace: return kLaplace;
    case MarginalFamily::hypsec: return kHypsec;
    case MarginalFamily::student_t2: return kStudentT2;
    case MarginalFamily::gaussian: return kGaussian;
  }
  throw std::invalid_argument("unknown marginal family");
}

// Standardized quantile for s >= 0 given both representations of the
// probability mass above s.
double standardized_quantile(const Standardized& fam, double w, double log_t) {
  if (w < kCentralLimit) return fam.from_centered(w);
  return fam.from_log_upper(log_t);
}

}  // namespace

std::string_view to_string(MarginalFamily family) {
  switch (family) {
    case MarginalFamily::laplace: return "laplace";
    case MarginalFamily::hypsec: return "hypsec";
    case MarginalFamily::student_t2: return "student_t2";
    case MarginalFamily::gaussian: return "gaussian";
  }
  return "unknown";
}

MarginalFamily parse_marginal_family(std::string_view name) {
  if (name == "laplace") return MarginalFamily::laplace;
  if (name == "hypsec") return MarginalFamily::hypsec;
  if (name == "student_t2") return MarginalFamily::student_t2;
  if (name == "gaussian") return MarginalFamily::gaussian;
  throw std::invalid_argument("unknown marginal family '" + std::string(name) +
                              "' (expected laplace, hypsec, student_t2 or gaussian)");
}

void MarginalSpec::validate() const {
  if (!(b > 0.0) || !std::isfinite(b)) throw std::invalid_argument("marginal scale b must be positive and finite");
  (void)standardized(family);
}

void CopulaTransform::validate() const {
  marginal.validate();
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw std::invalid_argument("copula variance sigma2 must be positive and finite");
  }
}

double log_pdf(const MarginalSpec& m, double x) {
  return standardized(m.family).log_density(x / m.b) - std::log(m.b);
}

double pdf(const MarginalSpec& m, double x) { return std::exp(log_pdf(m, x)); }

double cdf(const MarginalSpec& m, double x) {
  const auto& fam = standardized(m.family);
  const double s = std::abs(x) / m.b;
  const double w = fam.centered(s);
  // mass beyond |x|
  const double tail = w < kCentralLimit ? 0.5 - 0.5 * w : std::exp(fam.log_upper(s));
  return x >= 0.0 ? 1.0 - tail : tail;
}

double quantile(const MarginalSpec& m, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("quantile: u must lie in (0, 1)");
  const auto& fam = standardized(m.family);
  const double t = std::min(u, 1.0 - u);
  const double w = std::abs(2.0 * u - 1.0);
  const double s = standardized_quantile(fam, w, std::log(t));
  return u >= 0.5 ? m.b * s : -m.b * s;
}

double warp(const CopulaTransform& t, double z) {
  const double sigma = std::sqrt(t.sigma2);
  const MarginalSpec& m = t.marginal;
  if (m.family == MarginalFamily::gaussian) return m.b / sigma * z;
  if (z == 0.0) return 0.0;
  const double x = std::abs(z) / sigma;
  const double w = std::erf(x / kSqrt2);
  const double s = standardized_quantile(standardized(m.family), w, normal::log_upper_tail(x));
  return std::copysign(m.b * s, z);
}

double unwarp(const CopulaTransform& t, double f) {
  const double sigma = std::sqrt(t.sigma2);
  const MarginalSpec& m = t.marginal;
  if (m.family == MarginalFamily::gaussian) return sigma / m.b * f;
  if (f == 0.0) return 0.0;
  const auto& fam = standardized(m.family);
  const double s = std::abs(f) / m.b;
  const double w = fam.centered(s);
  const double x = w < kCentralLimit ? kSqrt2 * boost::math::erf_inv(w)
                                     : normal::upper_quantile_from_log(fam.log_upper(s));
  return std::copysign(sigma * x, f);
}

WarpDerivatives warp_derivatives(const CopulaTransform& t, double z) {
  const MarginalSpec& m = t.marginal;
  const double sigma = std::sqrt(t.sigma2);
  WarpDerivatives d;
  d.value = warp(t, z);
  d.d_b = d.value / m.b;
  if (m.family == MarginalFamily::gaussian) {
    d.d1 = m.b / sigma;
    return d;
  }
  const auto& fam = standardized(m.family);
  const double s = d.value / m.b;
  const double x = z / sigma;

  // f' = phi_sigma(z) / g_b(f)
  d.d1 = m.b / sigma * std::exp(normal::log_pdf(x) - fam.log_density(s));

  // f'' = f' A with A = -z/sigma2 - r(f) f', r = g_b'/g_b
  const double score = fam.score(s) / m.b;
  const double score_slope = fam.score_slope(s) / (m.b * m.b);
  const double a = -z / t.sigma2 - score * d.d1;
  d.d2 = d.d1 * a;
  const double a_prime = -1.0 / t.sigma2 - score_slope * d.d1 * d.d1 - score * d.d2;
  d.d3 = d.d2 * a + d.d1 * a_prime;
  return d;
}

ShapeCheck check_shrinkage_shape(const CopulaTransform& t, double z_max, int grid) {
  t.validate();
  if (grid < 3) throw std::invalid_argument("check_shrinkage_shape: grid too small");
  ShapeCheck check;
  check.min_slope = std::numeric_limits<double>::infinity();
  check.min_curvature = std::numeric_limits<double>::infinity();
  double curvature_scale = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double z = -z_max + 2.0 * z_max * i / (grid - 1);
    const WarpDerivatives d = warp_derivatives(t, z);
    check.min_slope = std::min(check.min_slope, d.d1);
    if (z >= 0.0) {
      check.min_curvature = std::min(check.min_curvature, d.d2);
      curvature_scale = std::max(curvature_scale, std::abs(d.d2));
    }
  }
  check.slope_above_one = check.min_slope > 1.0;
  // Gaussian warps have exactly zero curvature; treat that as not convex.
  check.convex = t.marginal.family != MarginalFamily::gaussian &&
                 check.min_curvature >= -1e-12 * std::max(1.0, curvature_scale);
  return check;
}

double shape_threshold_scale(MarginalFamily family, double sigma2, double z_max) {
  const CopulaTransform unit{{family, 1.0}, sigma2};
  const ShapeCheck check = check_shrinkage_shape(unit, z_max);
  if (!check.convex) return std::numeric_limits<double>::infinity();
  // slope scales linearly in b
  return 1.0 / check.min_slope;
}

}  // namespace htp
