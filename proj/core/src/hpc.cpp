#include "htp/hpc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "htp/errors.hpp"
#include "htp/quadrature.hpp"

namespace htp {
namespace {

struct LatentTerms {
  Eigen::VectorXd f;
  Eigen::VectorXd d1;
  Eigen::VectorXd d2;
  Eigen::VectorXd d3;
  Eigen::VectorXd pi;
  double log_likelihood = 0.0;
};

double log_sum_exp(const Eigen::VectorXd& v) {
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

LatentTerms evaluate_terms(const HpcModel& model, const Eigen::VectorXd& z, bool with_derivatives) {
  const Eigen::Index n = model.point_count();
  const int classes = model.class_count;
  const Eigen::Index size = model.latent_size();
  LatentTerms t;
  t.f.resize(size);
  t.pi.resize(size);
  if (with_derivatives) {
    t.d1.resize(size);
    t.d2.resize(size);
    t.d3.resize(size);
  }
  for (int c = 0; c < classes; ++c) {
    const CopulaTransform& tr = model.transforms[c];
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index idx = c * n + i;
      if (with_derivatives) {
        const WarpDerivatives d = warp_derivatives(tr, z(idx));
        t.f(idx) = d.value;
        t.d1(idx) = d.d1;
        t.d2(idx) = d.d2;
        t.d3(idx) = d.d3;
      } else {
        t.f(idx) = warp(tr, z(idx));
      }
    }
  }
  Eigen::VectorXd point(classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < classes; ++c) point(c) = t.f(c * n + i);
    const double lse = log_sum_exp(point);
    for (int c = 0; c < classes; ++c) t.pi(c * n + i) = std::exp(point(c) - lse);
    t.log_likelihood += point(model.labels[i]) - lse;
  }
  return t;
}

Eigen::MatrixXd stacked_pi(const Eigen::VectorXd& pi, Eigen::Index n, int classes) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n * classes, n);
  for (int c = 0; c < classes; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) out(c * n + i, i) = pi(c * n + i);
  }
  return out;
}

Eigen::MatrixXd softmax_curvature(const Eigen::VectorXd& pi, Eigen::Index n, int classes) {
  // W = diag(pi) - Pi Pi^T, nonzero only between entries of the same point
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n * classes, n * classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < classes; ++c) {
      const Eigen::Index a = c * n + i;
      for (int d = 0; d < classes; ++d) {
        const Eigen::Index b = d * n + i;
        w(a, b) = -pi(a) * pi(b);
      }
      w(a, a) += pi(a);
    }
  }
  return w;
}

// diag(d1) W diag(d1)
Eigen::MatrixXd scaled_curvature(const Eigen::MatrixXd& w, const Eigen::VectorXd& d1) {
  return d1.asDiagonal() * w * d1.asDiagonal();
}

struct NegHessianFactor {
  Eigen::MatrixXd inverse;
  double log_det = 0.0;
  bool clipped = false;
  double min_eigenvalue = 0.0;
};

NegHessianFactor factor_neg_hessian(const Eigen::MatrixXd& neg_h, const ModeOptions& options) {
  NegHessianFactor out;
  Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
  if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
    out.inverse = llt.solve(Eigen::MatrixXd::Identity(neg_h.rows(), neg_h.cols()));
    out.log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out.min_eigenvalue = std::nan("");
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(neg_h);
  Eigen::VectorXd values = eig.eigenvalues();
  out.min_eigenvalue = values.minCoeff();
  if (options.indefinite == IndefinitePolicy::error) {
    std::ostringstream msg;
    msg << "saddle/indefinite mode: -hessian has minimum eigenvalue " << out.min_eigenvalue << " ("
        << (values.array() <= 0.0).count() << " of " << values.size() << " nonpositive)";
    throw NumericalError(msg.str());
  }
  out.clipped = true;
  values = values.cwiseMax(options.eigenvalue_floor);
  out.log_det = values.array().log().sum();
  out.inverse = eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

HpcModel HpcModel::make(const Points& inputs, std::vector<int> labels, int class_count, const KernelSpec& kernel,
                        const CopulaTransform& transform) {
  HpcModel m;
  m.class_count = class_count;
  m.kernels.assign(class_count, kernel);
  m.transforms.assign(class_count, transform);
  m.inputs = inputs;
  m.labels = std::move(labels);
  m.validate();
  return m;
}

Eigen::VectorXd HpcModel::targets() const {
  const Eigen::Index n = point_count();
  Eigen::VectorXd y = Eigen::VectorXd::Zero(latent_size());
  for (Eigen::Index i = 0; i < n; ++i) y(labels[i] * n + i) = 1.0;
  return y;
}

void HpcModel::validate() const {
  if (class_count < 2) throw std::invalid_argument("HpcModel: class_count must be at least 2");
  if (static_cast<int>(kernels.size()) != class_count || static_cast<int>(transforms.size()) != class_count) {
    throw std::invalid_argument("HpcModel: need one kernel and one transform per class block");
  }
  if (inputs.rows() < 1) throw std::invalid_argument("HpcModel: no training inputs");
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
    throw std::invalid_argument("HpcModel: label count does not match input count");
  }
  for (int label : labels) {
    if (label < 0 || label >= class_count) throw std::invalid_argument("HpcModel: label out of range");
  }
  for (const auto& k : kernels) k.validate();
  for (const auto& t : transforms) t.validate();
}

BlockKernel::BlockKernel(const HpcModel& model) : block_size_(model.point_count()) {
  blocks_.reserve(model.class_count);
  factors_.reserve(model.class_count);
  for (int c = 0; c < model.class_count; ++c) {
    blocks_.push_back(kernel_matrix(model.kernels[c], model.inputs));
    factors_.emplace_back(blocks_.back());
  }
}

Eigen::VectorXd BlockKernel::multiply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  for (int c = 0; c < blocks(); ++c) {
    out.segment(c * block_size_, block_size_) = blocks_[c] * v.segment(c * block_size_, block_size_);
  }
  return out;
}

Eigen::VectorXd BlockKernel::solve(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  for (int c = 0; c < blocks(); ++c) {
    out.segment(c * block_size_, block_size_) =
        factors_[c].solve(Eigen::VectorXd(v.segment(c * block_size_, block_size_)));
  }
  return out;
}

double BlockKernel::log_determinant() const {
  double acc = 0.0;
  for (const auto& f : factors_) acc += f.log_determinant();
  return acc;
}

Eigen::MatrixXd BlockKernel::dense() const {
  const Eigen::Index size = block_size_ * blocks();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size, size);
  for (int c = 0; c < blocks(); ++c) {
    out.block(c * block_size_, c * block_size_, block_size_, block_size_) = blocks_[c];
  }
  return out;
}

Eigen::MatrixXd BlockKernel::dense_inverse() const {
  const Eigen::Index size = block_size_ * blocks();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size, size);
  for (int c = 0; c < blocks(); ++c) {
    out.block(c * block_size_, c * block_size_, block_size_, block_size_) = factors_[c].inverse();
  }
  return out;
}

Eigen::VectorXd softmax_likelihood(const Eigen::VectorXd& f_point) {
  if (f_point.size() == 0) throw std::invalid_argument("softmax_likelihood: empty input");
  const double lse = log_sum_exp(f_point);
  return (f_point.array() - lse).exp().matrix();
}

double log_posterior(const HpcModel& model, const Eigen::VectorXd& z) {
  if (z.size() != model.latent_size()) throw std::invalid_argument("log_posterior: dimension mismatch");
  const BlockKernel kern(model);
  const LatentTerms t = evaluate_terms(model, z, false);
  return t.log_likelihood - 0.5 * z.dot(kern.solve(z)) - 0.5 * kern.log_determinant();
}

PosteriorDerivatives posterior_derivatives(const HpcModel& model, const Eigen::VectorXd& z) {
  if (z.size() != model.latent_size()) throw std::invalid_argument("posterior_derivatives: dimension mismatch");
  const BlockKernel kern(model);
  const LatentTerms t = evaluate_terms(model, z, true);
  const Eigen::VectorXd residual = model.targets() - t.pi;
  const Eigen::MatrixXd w = softmax_curvature(t.pi, model.point_count(), model.class_count);
  PosteriorDerivatives out;
  out.gradient = t.d1.cwiseProduct(residual) - kern.solve(z);
  out.hessian = -scaled_curvature(w, t.d1) - kern.dense_inverse();
  out.hessian.diagonal() += t.d2.cwiseProduct(residual);
  return out;
}

LaplaceState find_mode(const HpcModel& model, const ModeOptions& options) {
  return find_mode(model, Eigen::VectorXd::Zero(model.latent_size()), options);
}

LaplaceState find_mode(const HpcModel& model, const Eigen::VectorXd& z0, const ModeOptions& options) {
  model.validate();
  if (z0.size() != model.latent_size()) throw std::invalid_argument("find_mode: z0 has the wrong size");
  const Eigen::Index n = model.point_count();
  const int classes = model.class_count;
  const BlockKernel kern(model);
  const double log_det_k = kern.log_determinant();
  const Eigen::MatrixXd k_inv = kern.dense_inverse();
  const Eigen::VectorXd y = model.targets();

  auto objective = [&](const Eigen::VectorXd& z, const LatentTerms& t) {
    return t.log_likelihood - 0.5 * z.dot(kern.solve(z)) - 0.5 * log_det_k;
  };

  Eigen::VectorXd z = z0;
  LatentTerms terms = evaluate_terms(model, z, true);
  double value = objective(z, terms);
  Eigen::VectorXd gradient;
  double grad_norm = 0.0;
  double plain_step = 1.0;
  int iteration = 0;
  for (;; ++iteration) {
    const Eigen::VectorXd residual = y - terms.pi;
    gradient = terms.d1.cwiseProduct(residual) - kern.solve(z);
    grad_norm = gradient.lpNorm<Eigen::Infinity>();
    if (grad_norm <= options.tolerance) break;
    if (iteration >= options.max_iterations) {
      std::ostringstream msg;
      msg << "find_mode: no convergence after " << iteration << " iterations (gradient max-norm " << grad_norm
          << ")";
      throw ConvergenceError(msg.str(), iteration, grad_norm);
    }

    auto line_search = [&](const Eigen::VectorXd& direction, double step) -> bool {
      const double slope = gradient.dot(direction);
      if (!(slope > 0.0)) return false;
      for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
        const Eigen::VectorXd trial = z + step * direction;
        LatentTerms trial_terms = evaluate_terms(model, trial, false);
        const double trial_value = objective(trial, trial_terms);
        bool accept = std::isfinite(trial_value) && trial_value >= value + options.armijo * step * slope;
        if (!accept && std::isfinite(trial_value) && step * slope <= 1e-12 * (1.0 + std::abs(value))) {
          // predicted gain is below rounding of J; fall back to the gradient norm
          const LatentTerms full = evaluate_terms(model, trial, true);
          const Eigen::VectorXd g = full.d1.cwiseProduct(y - full.pi) - kern.solve(trial);
          accept = g.lpNorm<Eigen::Infinity>() < grad_norm;
        }
        if (accept) {
          z = trial;
          value = trial_value;
          plain_step = step;
          return true;
        }
      }
      return false;
    };

    bool moved = false;
    if (options.precondition) {
      Eigen::MatrixXd metric = k_inv + scaled_curvature(softmax_curvature(terms.pi, n, classes), terms.d1);
      metric.diagonal() += (-terms.d2.cwiseProduct(residual)).cwiseMax(0.0);
      Eigen::LLT<Eigen::MatrixXd> llt(metric);
      if (llt.info() == Eigen::Success) moved = line_search(llt.solve(gradient), 1.0);
    }
    if (!moved) moved = line_search(gradient, std::min(1.0, 2.0 * plain_step));
    if (!moved) {
      std::ostringstream msg;
      msg << "find_mode: line search failed at iteration " << iteration << " (gradient max-norm " << grad_norm
          << ")";
      throw ConvergenceError(msg.str(), iteration, grad_norm);
    }
    terms = evaluate_terms(model, z, true);
  }

  LaplaceState s;
  s.z_hat = z;
  s.f_hat = terms.f;
  s.pi_hat = terms.pi;
  s.df_dz = terms.d1;
  s.d2f_dz2 = terms.d2;
  s.d3f_dz3 = terms.d3;
  s.alpha = kern.solve(z);
  s.Pi = stacked_pi(terms.pi, n, classes);
  s.W = softmax_curvature(terms.pi, n, classes);
  s.hessian = -scaled_curvature(s.W, terms.d1) - k_inv;
  s.hessian.diagonal() += terms.d2.cwiseProduct(y - terms.pi);
  s.hessian = 0.5 * (s.hessian + s.hessian.transpose()).eval();
  s.log_posterior = value;
  s.gradient_norm = grad_norm;
  s.iterations = iteration;

  const NegHessianFactor neg = factor_neg_hessian(-s.hessian, options);
  s.posterior_covariance = neg.inverse;
  s.log_det_neg_hessian = neg.log_det;
  s.hessian_clipped = neg.clipped;
  s.min_neg_hessian_eigenvalue = neg.min_eigenvalue;
  if (neg.clipped) {
    std::ostringstream msg;
    msg << "-hessian at the mode is not positive definite (min eigenvalue " << neg.min_eigenvalue
        << "); eigenvalues clipped to " << options.eigenvalue_floor;
    s.diagnostic = msg.str();
  }
  s.log_marginal = log_marginal_likelihood(model, s);
  return s;
}

double log_marginal_likelihood(const HpcModel& model, const LaplaceState& state) {
  if (state.z_hat.size() != model.latent_size()) {
    throw std::invalid_argument("log_marginal_likelihood: state does not match model");
  }
  return state.log_posterior - 0.5 * state.log_det_neg_hessian;
}

GaussianPosterior latent_predictive(const HpcModel& model, const LaplaceState& state, const Eigen::VectorXd& x_star) {
  if (x_star.size() != model.inputs.cols()) throw std::invalid_argument("laplace_predict: dimension mismatch");
  const Eigen::Index n = model.point_count();
  const int classes = model.class_count;
  const Points star = x_star.transpose();
  // a_c = K_c^{-1} k_*c, embedded in an nC x C matrix
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n * classes, classes);
  Eigen::VectorXd prior_var(classes);
  GaussianPosterior out;
  out.mean.resize(classes);
  for (int c = 0; c < classes; ++c) {
    const KernelSpec& k = model.kernels[c];
    const Eigen::VectorXd k_star = cross_kernel(k, model.inputs, star).col(0);
    const Eigen::MatrixXd k_c = kernel_matrix(k, model.inputs);
    const CholeskyFactor chol(k_c);
    const Eigen::VectorXd a_c = chol.solve(k_star);
    a.block(c * n, c, n, 1) = a_c;
    out.mean(c) = a_c.dot(state.z_hat.segment(c * n, n));
    prior_var(c) = std::max(0.0, k.sigma2 + k.noise - k_star.dot(a_c));
  }
  out.covariance = a.transpose() * state.posterior_covariance * a;
  out.covariance.diagonal() += prior_var;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

ClassPrediction expected_softmax(const std::vector<CopulaTransform>& transforms, const GaussianPosterior& latent,
                                 const PredictOptions& options) {
  const Eigen::Index classes = latent.mean.size();
  if (static_cast<Eigen::Index>(transforms.size()) != classes) {
    throw std::invalid_argument("expected_softmax: need one transform per class");
  }
  const Eigen::MatrixXd lower = CholeskyFactor(latent.covariance).lower();
  ClassPrediction out;
  out.latent = latent;
  out.probabilities = Eigen::VectorXd::Zero(classes);
  out.standard_error = Eigen::VectorXd::Zero(classes);
  Eigen::VectorXd f(classes);
  auto push = [&](const Eigen::VectorXd& z) {
    for (Eigen::Index c = 0; c < classes; ++c) f(c) = warp(transforms[c], z(c));
    return softmax_likelihood(f);
  };

  if (options.method == PredictiveMethod::monte_carlo) {
    if (options.samples < 2) throw std::invalid_argument("expected_softmax: need at least two samples");
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd xi(classes);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(classes);
    for (int s = 0; s < options.samples; ++s) {
      for (Eigen::Index c = 0; c < classes; ++c) xi(c) = gauss(rng);
      const Eigen::VectorXd p = push(latent.mean + lower * xi);
      out.probabilities += p;
      sum_sq += p.cwiseAbs2();
    }
    const double count = options.samples;
    out.probabilities /= count;
    const Eigen::VectorXd var = (sum_sq / count - out.probabilities.cwiseAbs2()).cwiseMax(0.0) * count / (count - 1);
    out.standard_error = (var / count).cwiseSqrt();
    return out;
  }

  // tensor-product Gauss-Hermite on the whitened coordinates
  if (classes > 5) throw std::invalid_argument("expected_softmax: quadrature supports at most 5 classes");
  const QuadratureRule rule = gauss_hermite_normal(options.quadrature_nodes);
  const int q = options.quadrature_nodes;
  std::vector<int> index(classes, 0);
  Eigen::VectorXd xi(classes);
  for (;;) {
    double weight = 1.0;
    for (Eigen::Index c = 0; c < classes; ++c) {
      xi(c) = rule.nodes[index[c]];
      weight *= rule.weights[index[c]];
    }
    out.probabilities += weight * push(latent.mean + lower * xi);
    Eigen::Index c = 0;
    while (c < classes && ++index[c] == q) index[c++] = 0;
    if (c == classes) break;
  }
  out.probabilities /= out.probabilities.sum();
  return out;
}

ClassPrediction laplace_predict(const HpcModel& model, const LaplaceState& state, const Eigen::VectorXd& x_star,
                                const PredictOptions& options) {
  return expected_softmax(model.transforms, latent_predictive(model, state, x_star), options);
}

ClassPrediction laplace_predict(const HpcModel& model, const LaplaceState& state, const Eigen::VectorXd& x_star,
                                int samples, std::uint64_t seed) {
  PredictOptions options;
  options.samples = samples;
  options.seed = seed;
  return laplace_predict(model, state, x_star, options);
}

}  // namespace htp
