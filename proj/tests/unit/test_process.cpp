#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include <htp/errors.hpp>
#include <htp/gp.hpp>
#include <htp/normal.hpp>
#include <htp/process.hpp>
#include <htp/quadrature.hpp>

#include "checks.hpp"
#include "fixtures.hpp"

namespace {

using htp::CopulaTransform;
using htp::HtpPrior;
using htp::MarginalFamily;

const MarginalFamily kFamilies[] = {MarginalFamily::laplace, MarginalFamily::hypsec, MarginalFamily::student_t2,
                                    MarginalFamily::gaussian};

Eigen::Matrix2d correlated(double sigma2, double rho) {
  Eigen::Matrix2d k;
  k << sigma2, rho * sigma2, rho * sigma2, sigma2;
  return k;
}

std::vector<double> ranks(const Eigen::VectorXd& v) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v(a) < v(b); });
  std::vector<double> r(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) r[static_cast<std::size_t>(idx[k])] = static_cast<double>(k);
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return pearson(ranks(a), ranks(b)); }

double gaussian_log_density(const Eigen::MatrixXd& k, const Eigen::VectorXd& z) {
  const Eigen::MatrixXd ki = k.inverse();
  return -0.5 * z.dot(ki * z) - 0.5 * std::log(k.determinant()) - 0.5 * z.size() * std::log(2 * M_PI);
}

TEST(HtpSample, MarginalsFollowTheFamily) {
  for (auto f : kFamilies) {
    Eigen::Matrix3d k;
    k << 2.0, 1.2, 0.4, 1.2, 2.0, 0.9, 0.4, 0.9, 2.0;
    const HtpPrior prior = HtpPrior::from_covariance(k, {{f, 1.5}, 2.0});
    const int count = 100000;
    const Eigen::MatrixXd draws = htp::htp_sample(prior, count, 7);
    for (int c = 0; c < 3; ++c) {
      std::vector<double> col(draws.col(c).data(), draws.col(c).data() + count);
      std::sort(col.begin(), col.end());
      double ks = 0.0;
      for (int i = 0; i < count; ++i) {
        const double g = htp::cdf(prior.transform.marginal, col[static_cast<std::size_t>(i)]);
        ks = std::max({ks, std::abs(g - static_cast<double>(i) / count), std::abs(g - static_cast<double>(i + 1) / count)});
      }
      EXPECT_LT(ks, 0.02) << to_string(f) << " column " << c;
    }
    // latent correlation is recovered after unwarping
    Eigen::MatrixXd z(count, 3);
    for (int s = 0; s < count; ++s)
      for (int c = 0; c < 3; ++c) z(s, c) = htp::unwarp(prior.transform, draws(s, c));
    const Eigen::MatrixXd cov = z.transpose() * z / count;
    EXPECT_LT((cov - k).cwiseAbs().maxCoeff(), 0.05) << to_string(f);
  }
}

TEST(HtpSample, GaussianFamilyWithMatchingScaleIsTheGp) {
  const Eigen::Matrix2d k = correlated(2.25, 0.6);
  const auto a = htp::htp_sample(HtpPrior::from_covariance(k, {{MarginalFamily::gaussian, 1.5}, 2.25}), 200, 3);
  const auto b = htp::htp_sample(HtpPrior::from_covariance(k, {{MarginalFamily::laplace, 1.5}, 2.25}), 200, 3);
  const CopulaTransform lap{{MarginalFamily::laplace, 1.5}, 2.25};
  for (int s = 0; s < 200; ++s)
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(a(s, c), htp::unwarp(lap, b(s, c)), 1e-9 * std::max(1.0, std::abs(a(s, c))));
}

TEST(HtpSample, RankCorrelationSurvivesTheWarp) {
  const Eigen::Matrix2d k = correlated(1.0, 0.9);
  const auto z = htp::htp_sample(HtpPrior::from_covariance(k, {{MarginalFamily::gaussian, 1.0}, 1.0}), 100000, 11);
  const double rho_s_theory = 6.0 / M_PI * std::asin(0.45);
  const double rho_z = spearman(z.col(0), z.col(1));
  EXPECT_NEAR(rho_z, rho_s_theory, 0.02);
  for (auto f : kFamilies) {
    const auto draws = htp::htp_sample(HtpPrior::from_covariance(k, {{f, 3.0}, 1.0}), 100000, 11);
    EXPECT_NEAR(spearman(draws.col(0), draws.col(1)), rho_z, 0.02) << to_string(f);
  }
}

TEST(HtpSample, RejectsNonPositiveDefinite) {
  EXPECT_THROW(htp::htp_sample(HtpPrior::from_covariance(-Eigen::Matrix2d::Identity(), {}), 5, 0),
               htp::NumericalError);
}

TEST(HtpDensity, IndependentCaseIsProductOfMarginals) {
  for (auto f : kFamilies) {
    const CopulaTransform t{{f, 2.0}, 1.7};
    const HtpPrior prior = HtpPrior::from_covariance(1.7 * Eigen::Matrix3d::Identity(), t);
    const Eigen::Vector3d x(0.4, -2.5, 7.0);
    double expected = 0.0;
    for (int i = 0; i < 3; ++i) expected += std::log(htp::pdf(t.marginal, x(i)));
    EXPECT_NEAR(htp::htp_log_density(prior, x), expected, 1e-12);
  }
}

TEST(HtpDensity, GaussianFamilyIsTheGpDensity) {
  const Eigen::Matrix2d k = correlated(4.0, -0.3);
  const HtpPrior prior = HtpPrior::from_covariance(k, {{MarginalFamily::gaussian, 2.0}, 4.0});
  const Eigen::Vector2d f(1.1, 0.7);
  EXPECT_NEAR(htp::htp_log_density(prior, f), gaussian_log_density(k, f), 1e-9);
}

TEST(HtpDensity, ChangeOfVariablesOracle) {
  const Eigen::Matrix2d k = correlated(1.0, 0.5);
  const HtpPrior prior = HtpPrior::from_covariance(k, {{MarginalFamily::laplace, 1.0}, 1.0});
  const Eigen::Vector2d f(0.3, -0.7);
  Eigen::Vector2d z;
  double log_jac = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double g = f(i) >= 0 ? 1.0 - 0.5 * std::exp(-f(i)) : 0.5 * std::exp(f(i));  // laplace cdf
    z(i) = htp::normal::quantile(g);
    const double density = 0.5 * std::exp(-std::abs(f(i)));
    const double phi = std::exp(-0.5 * z(i) * z(i)) / std::sqrt(2 * M_PI);
    log_jac += std::log(density / phi);  // dz/df
  }
  EXPECT_NEAR(htp::htp_log_density(prior, f), gaussian_log_density(k, z) + log_jac, 1e-12);
}

TEST(HtpDensity, RejectsDiagonalMismatch) {
  const HtpPrior prior = HtpPrior::from_covariance(correlated(1.5, 0.2), {{MarginalFamily::laplace, 1.0}, 1.0});
  EXPECT_THROW(htp::htp_log_density(prior, Eigen::Vector2d(0.1, 0.2)), std::invalid_argument);
  EXPECT_THROW(htp::htp_log_density(prior, Eigen::Vector3d(0.1, 0.2, 0.3)), std::invalid_argument);
  const HtpPrior relaxed =
      HtpPrior::from_covariance(correlated(1.5, 0.2), {{MarginalFamily::laplace, 1.0}, 1.0}, false);
  EXPECT_TRUE(std::isfinite(htp::htp_log_density(relaxed, Eigen::Vector2d(0.1, 0.2))));
}

TEST(HtpDensity, IntegratesToOneInTwoDimensions) {
  for (auto f : kFamilies) {
    for (double b : {1.0, 3.0}) EXPECT_NEAR(checks::normalization_2d(f, b), 1.0, 1e-4) << to_string(f) << " b=" << b;
  }
}

HtpPrior three_point_prior(MarginalFamily family, double b) {
  htp::Points x(3, 2);
  x << 0.3, 0.5, 1.1, 0.9, 2.8, 3.0;
  const htp::KernelSpec k{htp::KernelFamily::von_mises, 1.0, 1.0, 0.05};
  return HtpPrior::from_kernel(k, x, {{family, b}, 1.05});
}

TEST(HprPredict, ZeroObservationsGiveZeroMedian) {
  const auto prior = three_point_prior(MarginalFamily::laplace, 3.0);
  const auto p = htp::hpr_predict(prior, Eigen::Vector3d::Zero(), Eigen::Vector2d(1.0, 1.0));
  EXPECT_EQ(p.z_mean(), 0.0);
  EXPECT_EQ(p.median(), 0.0);
  EXPECT_NEAR(p.mean_quadrature(), 0.0, 1e-12);
}

TEST(HprPredict, PredictiveMeanMatchesSamplingOracle) {
  const auto prior = three_point_prior(MarginalFamily::laplace, 3.0);
  const Eigen::Vector3d f_obs(2.0, 4.5, -1.0);
  const Eigen::Vector2d x_star(0.8, 0.6);
  const auto p = htp::hpr_predict(prior, f_obs, x_star);

  // oracle: dense-inverse conditional, closed-form laplace warp
  const double s = std::sqrt(1.05);
  Eigen::Vector3d z_obs;
  for (int i = 0; i < 3; ++i) {
    const double g = f_obs(i) >= 0 ? 1.0 - 0.5 * std::exp(-f_obs(i) / 3.0) : 0.5 * std::exp(f_obs(i) / 3.0);
    z_obs(i) = s * htp::normal::quantile(g);
  }
  const Eigen::MatrixXd k = prior.covariance;
  Eigen::Vector3d ks;
  for (int i = 0; i < 3; ++i)
    ks(i) = std::exp(std::cos(prior.locations(i, 0) - x_star(0)) + std::cos(prior.locations(i, 1) - x_star(1)) - 2.0);
  const Eigen::MatrixXd ki = k.inverse();
  const double mu = ks.dot(ki * z_obs), var = 1.05 - ks.dot(ki * ks);
  EXPECT_NEAR(p.z_mean(), mu, 1e-10);
  EXPECT_NEAR(p.z_variance(), var, 1e-10);

  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(mu, std::sqrt(var));
  const int n = 100000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = g(rng);
    const double q = 0.5 * std::erfc(std::abs(z) / (s * std::sqrt(2.0)));
    const double f = (z >= 0 ? -1.0 : 1.0) * 3.0 * std::log(2.0 * q);
    sum += f;
    sum2 += f * f;
  }
  const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
  const double tol = 3.0 * sd / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(p.mean_quadrature(), mean, tol);
  EXPECT_NEAR(p.mean_monte_carlo(n, 5), mean, std::sqrt(2.0) * tol);
  EXPECT_NEAR(p.median(), -3.0 * std::log(std::erfc(mu / (s * std::sqrt(2.0)))) * (mu >= 0 ? 1 : -1), 1e-9);
}

TEST(HprPredict, QuantilesAndDensityAreConsistent) {
  const auto prior = three_point_prior(MarginalFamily::hypsec, 2.0);
  const auto p = htp::hpr_predict(prior, Eigen::Vector3d(1.0, -0.5, 2.0), Eigen::Vector2d(2.0, 2.2));
  EXPECT_NEAR(p.quantile(0.5), p.median(), 1e-12);
  const double lo = p.quantile(0.1), hi = p.quantile(0.9);
  const auto rule = htp::gauss_legendre(20);
  double mass = 0.0;
  const int panels = 50;
  for (int k = 0; k < panels; ++k) {
    const double a = lo + (hi - lo) * k / panels, w = (hi - lo) / panels;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q)
      mass += 0.5 * w * rule.weights[q] * p.density(a + 0.5 * w * (1 + rule.nodes[q]));
  }
  EXPECT_NEAR(mass, 0.8, 1e-8);
}

TEST(HprPredict, ZPosteriorDependsOnlyOnUnwarpedObservations) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  const auto a = three_point_prior(MarginalFamily::laplace, 3.0);
  const auto b = three_point_prior(MarginalFamily::student_t2, 0.7);
  for (int t = 0; t < 20; ++t) {
    Eigen::Vector3d z;
    for (auto& v : z) v = g(rng);
    Eigen::Vector3d fa, fb, za;
    for (int i = 0; i < 3; ++i) {
      fa(i) = htp::warp(a.transform, z(i));
      za(i) = htp::unwarp(a.transform, fa(i));
      fb(i) = htp::warp(b.transform, za(i));
    }
    const Eigen::Vector2d xs(g(rng), g(rng));
    const auto pa = htp::hpr_predict(a, fa, xs);
    const auto pb_latent = htp::hpr_predict_latent(b, za, xs);
    EXPECT_EQ(pa.z_mean(), pb_latent.z_mean());
    EXPECT_EQ(pa.z_variance(), pb_latent.z_variance());
    const auto pb = htp::hpr_predict(b, fb, xs);
    EXPECT_NEAR(pa.z_mean(), pb.z_mean(), 1e-12);
    EXPECT_EQ(pa.z_variance(), pb.z_variance());
  }
}

TEST(HprPredict, GaussianFamilyReproducesGpr) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    const int n = 3 + t % 6;
    const auto x = fixtures::random_angles(n + 1, 2, rng);
    const htp::KernelSpec k{htp::KernelFamily::von_mises, 1.5, 0.8, 0.1};
    const double sigma2 = k.sigma2 + k.noise;
    const htp::Points train = x.topRows(n);
    const auto prior = HtpPrior::from_kernel(k, train, {{MarginalFamily::gaussian, std::sqrt(sigma2)}, sigma2});
    Eigen::VectorXd f(n);
    for (auto& v : f) v = 2.0 * g(rng);
    const Eigen::VectorXd xs = x.row(n).transpose();
    const auto p = htp::hpr_predict(prior, f, xs);
    const auto gpr = htp::gp_predict(prior.covariance, htp::cross_kernel(k, train, x.bottomRows(1)).col(0), sigma2, f);
    EXPECT_NEAR(p.z_mean(), gpr.scalar_mean(), 1e-9);
    EXPECT_NEAR(p.z_variance(), gpr.scalar_variance(), 1e-9);
    EXPECT_NEAR(p.mean_quadrature(), gpr.scalar_mean(), 1e-9);
  }
}

}  // namespace
