#include <cmath>
#include <iostream>
#include <string>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include <htp/marginals.hpp>
#include <htp/normal.hpp>
#include <htp/quadrature.hpp>

namespace {

using htp::CopulaTransform;
using htp::MarginalFamily;
using htp::MarginalSpec;

const MarginalFamily kAll[] = {MarginalFamily::laplace, MarginalFamily::hypsec, MarginalFamily::student_t2,
                               MarginalFamily::gaussian};
const MarginalFamily kHeavy[] = {MarginalFamily::laplace, MarginalFamily::hypsec, MarginalFamily::student_t2};

// integral of the density over (lo, hi) via x = b tan(theta) and composite Gauss-Legendre
double integrate_density(const MarginalSpec& m, double lo, double hi) {
  const auto rule = htp::gauss_legendre(10);
  const double t0 = std::atan(lo / m.b), t1 = std::atan(hi / m.b);
  const int panels = 400;
  const double h = (t1 - t0) / panels;
  double s = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = t0 + (p + 0.5) * h;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double t = mid + 0.5 * h * rule.nodes[k];
      const double c = std::cos(t);
      s += 0.5 * h * rule.weights[k] * htp::pdf(m, m.b * std::tan(t)) * m.b / (c * c);
    }
  }
  return s;
}

TEST(Marginals, DensityExamples) {
  EXPECT_DOUBLE_EQ(htp::pdf({MarginalFamily::laplace, 1.0}, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(htp::pdf({MarginalFamily::hypsec, 1.0}, 0.0), 0.5);
  EXPECT_NEAR(htp::pdf({MarginalFamily::laplace, 2.0}, -2.0), 0.25 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(htp::pdf({MarginalFamily::laplace, 2.0}, -2.0), 0.09197, 5e-6);
}

TEST(Marginals, DensityIntegratesToOneAndIsSymmetric) {
  for (auto f : kAll) {
    for (double b : {0.5, 1.0, 3.0}) {
      const MarginalSpec m{f, b};
      const double inf = std::numeric_limits<double>::infinity();
      EXPECT_NEAR(integrate_density(m, -inf, inf), 1.0, 1e-9) << to_string(f) << " b=" << b;
      for (double x : {0.3, 1.7, 12.0}) {
        EXPECT_EQ(htp::pdf(m, x), htp::pdf(m, -x));
        EXPECT_NEAR(htp::log_pdf(m, x), std::log(htp::pdf(m, x)), 1e-13);
      }
    }
  }
}

TEST(Marginals, CdfExamples) {
  for (auto f : kAll) EXPECT_DOUBLE_EQ(htp::cdf({f, 2.5}, 0.0), 0.5);
  EXPECT_NEAR(htp::cdf({MarginalFamily::laplace, 1.0}, 1.0), 1.0 - 0.5 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(htp::cdf({MarginalFamily::laplace, 1.0}, 1.0), 0.81606, 5e-6);
  const MarginalSpec t{MarginalFamily::student_t2, 1.0};
  EXPECT_NEAR(htp::cdf(t, 1.0), 0.5 + 1.0 / (2.0 * std::sqrt(3.0)), 1e-15);
  EXPECT_NEAR(htp::cdf(t, 1.0), 0.78868, 5e-6);
  // the closed form agrees with quadrature of the density
  EXPECT_NEAR(0.5 + integrate_density(t, 0.0, 1.0), htp::cdf(t, 1.0), 1e-12);
  EXPECT_NEAR(0.5 + integrate_density({MarginalFamily::hypsec, 1.3}, 0.0, 2.0), htp::cdf({MarginalFamily::hypsec, 1.3}, 2.0),
              1e-12);
}

TEST(Marginals, QuantileExamples) {
  for (auto f : kAll) EXPECT_NEAR(htp::quantile({f, 1.7}, 0.5), 0.0, 1e-15);
  EXPECT_NEAR(htp::quantile({MarginalFamily::laplace, 1.0}, 0.75), std::log(2.0), 1e-14);
  EXPECT_NEAR(htp::quantile({MarginalFamily::hypsec, 1.0}, 0.75), 2.0 / M_PI * std::log(std::tan(3.0 * M_PI / 8.0)),
              1e-14);
  EXPECT_NEAR(htp::quantile({MarginalFamily::hypsec, 1.0}, 0.75), 0.561100, 5e-7);
  for (auto f : kAll) {
    EXPECT_THROW(htp::quantile({f, 1.0}, 0.0), std::invalid_argument);
    EXPECT_THROW(htp::quantile({f, 1.0}, 1.0), std::invalid_argument);
    EXPECT_THROW(htp::quantile({f, 1.0}, std::nan("")), std::invalid_argument);
  }
}

TEST(Marginals, QuantileInvertsCdfOnGrid) {
  // cdf is evaluated on the lower side, where it carries full relative precision;
  // symmetry covers x > 0
  for (auto f : kAll) {
    for (double b : {0.5, 1.0, 3.0, 10.0}) {
      const MarginalSpec m{f, b};
      for (int i = -200; i <= 200; ++i) {
        const double x = 10.0 * b * i / 200.0;
        const double lower = -std::abs(x);
        const double back = htp::quantile(m, htp::cdf(m, lower));
        EXPECT_NEAR(x >= 0 ? -back : back, x, 1e-8) << to_string(f) << " b=" << b << " x=" << x;
        EXPECT_NEAR(htp::cdf(m, x), 1.0 - htp::cdf(m, -x), 1e-15);
      }
    }
  }
}

TEST(Marginals, QuantileInvertsCdfWherePrecisionAllows) {
  for (auto f : kAll) {
    const MarginalSpec m{f, 1.0};
    for (double x : {0.1, 0.5, 1.0, 2.0}) {
      EXPECT_NEAR(htp::quantile(m, htp::cdf(m, x)), x, 1e-10) << to_string(f);
      EXPECT_NEAR(htp::cdf(m, htp::quantile(m, htp::cdf(m, x))), htp::cdf(m, x), 1e-10);
    }
  }
}

TEST(Marginals, InvalidSpecsRejected) {
  EXPECT_THROW((MarginalSpec{MarginalFamily::laplace, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((MarginalSpec{MarginalFamily::laplace, -1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((CopulaTransform{{MarginalFamily::laplace, 1.0}, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW(htp::parse_marginal_family("cauchy"), std::invalid_argument);
  for (auto f : kAll) EXPECT_EQ(htp::parse_marginal_family(to_string(f)), f);
}

TEST(Warp, Examples) {
  EXPECT_EQ(htp::warp({{MarginalFamily::laplace, 1.0}, 1.0}, 0.0), 0.0);
  EXPECT_NEAR(htp::warp({{MarginalFamily::gaussian, 2.0}, 1.0}, 1.5), 3.0, 1e-12);
  EXPECT_NEAR(htp::unwarp({{MarginalFamily::gaussian, 2.0}, 1.0}, 3.0), 1.5, 1e-12);
  const CopulaTransform t{{MarginalFamily::laplace, 1.0}, 1.0};
  const double oracle = -std::log(std::erfc(1.0 / std::sqrt(2.0)));  // -ln(2 (1 - Phi(1)))
  EXPECT_NEAR(htp::warp(t, 1.0), oracle, 1e-13);
  EXPECT_NEAR(htp::warp(t, 1.0), 1.147874, 5e-7);
  EXPECT_NEAR(htp::unwarp(t, oracle), 1.0, 1e-12);
  EXPECT_EQ(htp::unwarp(t, 0.0), 0.0);
}

TEST(Warp, OddIncreasingAndInvertible) {
  for (auto f : kAll) {
    for (double b : {0.5, 1.0, 3.0}) {
      for (double s2 : {0.25, 1.0, 4.0}) {
        const CopulaTransform t{{f, b}, s2};
        const double sigma = std::sqrt(s2);
        double prev = -std::numeric_limits<double>::infinity();
        for (int i = -600; i <= 600; ++i) {
          const double z = 6.0 * sigma * i / 600.0;
          const double w = htp::warp(t, z);
          EXPECT_GT(w, prev);
          prev = w;
          EXPECT_EQ(htp::warp(t, -z), -w);
          EXPECT_NEAR(htp::unwarp(t, w), z, 1e-8) << to_string(f) << " b=" << b << " z=" << z;
        }
      }
    }
  }
}

TEST(Warp, TailSafeBeyondDoubleResolutionOfPhi) {
  const CopulaTransform t{{MarginalFamily::laplace, 1.0}, 1.0};
  // laplace upper tail: f = -b log(2 Q(z))
  for (double z : {9.0, 15.0, 30.0}) {
    const long double q = 0.5L * std::erfc(static_cast<long double>(z) / std::sqrt(2.0L));
    const double oracle = static_cast<double>(-std::log(2.0L * q));
    EXPECT_NEAR(htp::warp(t, z), oracle, 1e-10 * oracle);
    EXPECT_NEAR(htp::unwarp(t, oracle), z, 1e-8 * z);
  }
  for (auto f : kAll) EXPECT_TRUE(std::isfinite(htp::warp({{f, 1.0}, 1.0}, 30.0)));
}

TEST(Warp, GaussianFamilyIsLinear) {
  for (double b : {0.5, 2.0, 7.0}) {
    for (double s2 : {0.5, 1.0, 3.0}) {
      const CopulaTransform t{{MarginalFamily::gaussian, b}, s2};
      const double slope = b / std::sqrt(s2);
      for (double z : {-5.0, -0.7, 0.3, 2.0, 6.0}) {
        EXPECT_NEAR(htp::warp(t, z), slope * z, 1e-12 * std::max(1.0, std::abs(slope * z)));
        const auto d = htp::warp_derivatives(t, z);
        EXPECT_NEAR(d.d1, slope, 1e-12 * slope);
        EXPECT_NEAR(d.d2, 0.0, 1e-12);
      }
    }
  }
}

TEST(Warp, DerivativeExamplesAtZero) {
  const auto d = htp::warp_derivatives({{MarginalFamily::laplace, 1.0}, 1.0}, 0.0);
  EXPECT_NEAR(d.d1, 2.0 / std::sqrt(2.0 * M_PI), 1e-14);
  EXPECT_NEAR(d.d1, 0.79788, 5e-6);
  EXPECT_NEAR(d.d2, 0.0, 1e-15);
}

TEST(Warp, DerivativesMatchFiniteDifferences) {
  const double h = 1e-5;
  for (auto f : kAll) {
    for (double b : {0.5, 1.0, 3.0}) {
      for (double z : {-3.0, -1.0, -0.2, 0.4, 1.0, 2.5, 5.0}) {
        const CopulaTransform t{{f, b}, 1.0};
        const auto d = htp::warp_derivatives(t, z);
        const auto wp = htp::warp_derivatives(t, z + h), wm = htp::warp_derivatives(t, z - h);
        const double fd1 = (htp::warp(t, z + h) - htp::warp(t, z - h)) / (2 * h);
        const double fd2 = (wp.d1 - wm.d1) / (2 * h);
        const double fd3 = (wp.d2 - wm.d2) / (2 * h);
        const CopulaTransform tp{{f, b + h}, 1.0}, tm{{f, b - h}, 1.0};
        const double fdb = (htp::warp(tp, z) - htp::warp(tm, z)) / (2 * h);
        const auto tol = [](double ref) { return 1e-6 * std::max(1.0, std::abs(ref)); };
        EXPECT_NEAR(d.value, htp::warp(t, z), 1e-13 * std::max(1.0, std::abs(d.value)));
        EXPECT_NEAR(d.d1, fd1, tol(fd1)) << to_string(f) << " b=" << b << " z=" << z;
        EXPECT_NEAR(d.d2, fd2, tol(fd2)) << to_string(f) << " b=" << b << " z=" << z;
        EXPECT_NEAR(d.d3, fd3, tol(fd3)) << to_string(f) << " b=" << b << " z=" << z;
        EXPECT_NEAR(d.d_b, fdb, tol(fdb)) << to_string(f) << " b=" << b << " z=" << z;
        if (f != MarginalFamily::gaussian) {
          const double phi = htp::normal::pdf(z);
          EXPECT_NEAR(d.d1, phi / htp::pdf(t.marginal, d.value), 1e-12 * d.d1);
        }
      }
    }
  }
}

TEST(Warp, SecondDerivativeHasSignOfZ) {
  for (auto f : kHeavy) {
    const CopulaTransform t{{f, 1.0}, 1.0};
    for (double z : {0.1, 0.5, 1.0, 3.0, 6.0}) {
      EXPECT_GT(htp::warp_derivatives(t, z).d2, 0.0) << to_string(f) << " z=" << z;
      EXPECT_LT(htp::warp_derivatives(t, -z).d2, 0.0);
    }
  }
}

TEST(Warp, DerivativesScaleLinearlyWithB) {
  for (auto f : kAll) {
    for (double z : {-2.0, 0.3, 1.0, 4.0}) {
      std::vector<double> r1, r2;
      for (double k : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const auto a = htp::warp_derivatives({{f, k}, 1.0}, z);
        const auto c = htp::warp_derivatives({{f, 2 * k}, 1.0}, z);
        r1.push_back(c.d1 / a.d1);
        if (f != MarginalFamily::gaussian) r2.push_back(c.d2 / a.d2);
      }
      for (double r : r1) EXPECT_NEAR(r, r1.front(), 1e-6);
      for (double r : r2) EXPECT_NEAR(r, r2.front(), 1e-6);
      EXPECT_NEAR(r1.front(), 2.0, 1e-12);
    }
  }
}

TEST(Warp, ShapeThresholdScale) {
  for (auto f : kHeavy) {
    const double b_star = htp::shape_threshold_scale(f, 1.0);
    ASSERT_TRUE(std::isfinite(b_star)) << to_string(f);
    ::testing::Test::RecordProperty(std::string("b_star_") + std::string(to_string(f)), std::to_string(b_star));
    std::cout << "b* " << to_string(f) << " = " << b_star << "\n";
    for (double scale : {1.0 + 1e-6, 1.5, 3.0, 10.0}) {
      const auto shape = htp::check_shrinkage_shape({{f, b_star * scale}, 1.0});
      EXPECT_TRUE(shape.holds()) << to_string(f) << " b=" << b_star * scale;
      EXPECT_GT(shape.min_slope, 1.0);
      EXPECT_GE(shape.min_curvature, 0.0);
    }
    EXPECT_FALSE(htp::check_shrinkage_shape({{f, 0.9 * b_star}, 1.0}).holds());
  }
  EXPECT_TRUE(std::isinf(htp::shape_threshold_scale(MarginalFamily::gaussian, 1.0)));
  EXPECT_FALSE(htp::check_shrinkage_shape({{MarginalFamily::gaussian, 5.0}, 1.0}).holds());
}

}  // namespace
