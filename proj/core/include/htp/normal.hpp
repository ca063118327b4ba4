#ifndef HTP_NORMAL_HPP_
#define HTP_NORMAL_HPP_

// Standard normal distribution helpers with tail-accurate forms.
//
// The "upper tail" Q(x) = 1 - Phi(x) is the quantity used throughout the
// warping code: for x > 0 it is computed without forming 1 - Phi(x), and the
// log forms stay finite long after Q(x) itself underflows.

namespace htp::normal {

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

double pdf(double x);
double log_pdf(double x);
double cdf(double x);

/// Q(x) = P(X > x) for X ~ N(0, 1).
double upper_tail(double x);

/// log Q(x); finite for every finite x.
double log_upper_tail(double x);

/// Inverse of Phi on (0, 1).
double quantile(double u);

/// x such that Q(x) = t, for t in (0, 1).
double upper_quantile(double t);

/// x such that log Q(x) = log_t, for log_t < 0. Works past underflow of t.
double upper_quantile_from_log(double log_t);

}  // namespace htp::normal

#endif  // HTP_NORMAL_HPP_
