#include "htp/normal.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>

namespace htp::normal {
namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

// Beyond this point erfc underflows; switch to the asymptotic expansion of log Q.
constexpr double kAsymptoticStart = 37.0;

// Below this log-probability exp() underflows to a denormal or zero.
constexpr double kLogUnderflow = -700.0;

double log_upper_tail_asymptotic(double x) {
  const double r = 1.0 / (x * x);
  // Q(x) ~ phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8 - 945/x^10)
  const double series =
      1.0 + r * (-1.0 + r * (3.0 + r * (-15.0 + r * (105.0 - 945.0 * r))));
  return -0.5 * x * x - kLogSqrtTwoPi - std::log(x) + std::log(series);
}

}  // namespace

double pdf(double x) { return std::exp(log_pdf(x)); }

double log_pdf(double x) { return -0.5 * x * x - kLogSqrtTwoPi; }

double cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double upper_tail(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double log_upper_tail(double x) {
  if (x >= kAsymptoticStart) return log_upper_tail_asymptotic(x);
  if (x < -5.0) return std::log1p(-0.5 * std::erfc(-x / kSqrt2));
  return std::log(0.5 * std::erfc(x / kSqrt2));
}

double quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("normal::quantile: u must lie in (0, 1)");
  if (u < 0.5) return -upper_quantile(u);
  if (u > 0.5) return upper_quantile(1.0 - u);
  return 0.0;
}

double upper_quantile(double t) {
  if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("normal::upper_quantile: t must lie in (0, 1)");
  if (t < 1e-300) return upper_quantile_from_log(std::log(t));
  return kSqrt2 * boost::math::erfc_inv(2.0 * t);
}

double upper_quantile_from_log(double log_t) {
  if (!(log_t < 0.0)) throw std::invalid_argument("normal::upper_quantile_from_log: log_t must be negative");
  if (log_t > kLogUnderflow) return upper_quantile(std::exp(log_t));

  // Newton on g(x) = log Q(x) - log_t, with g'(x) = -phi(x)/Q(x).
  double x = std::sqrt(-2.0 * log_t);
  x -= (std::log(x) + kLogSqrtTwoPi) / x;
  for (int it = 0; it < 50; ++it) {
    const double lq = log_upper_tail(x);
    const double slope = -std::exp(log_pdf(x) - lq);
    const double step = (lq - log_t) / slope;
    x -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * x) break;
  }
  return x;
}

}  // namespace htp::normal
