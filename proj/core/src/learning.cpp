#include "htp/learning.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/LU>

#include "htp/errors.hpp"

namespace htp {
namespace {

// Perturbation of the curvature pieces at the mode: change of f', f'' and f.
struct Perturbation {
  Eigen::VectorXd d_first;   // d f'
  Eigen::VectorXd d_second;  // d f''
  Eigen::VectorXd d_value;   // d f
};

class ModeSensitivity {
 public:
  ModeSensitivity(const HpcModel& model, const LaplaceState& state)
      : n_(model.point_count()),
        classes_(model.class_count),
        state_(state),
        residual_(model.targets() - state.pi_hat),
        kernel_(model) {
    // Differentiating z = K diag(f') (y - pi) gives (I + K M) dz = rhs with
    // M = diag(f') W diag(f') - diag(f'' (y - pi)).
    Eigen::MatrixXd m = state.df_dz.asDiagonal() * state.W * state.df_dz.asDiagonal();
    m.diagonal() -= state.d2f_dz2.cwiseProduct(residual_);
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m.rows(), m.cols()) + kernel_.dense() * m;
    lu_.compute(system);
    if (!(lu_.rcond() > 1e-14)) {
      std::ostringstream msg;
      msg << "evidence_gradients: implicit-function system is singular (rcond " << lu_.rcond() << ")";
      throw NumericalError(msg.str());
    }
    gradient_ = state.df_dz.cwiseProduct(residual_) - state.alpha;
  }

  const Eigen::VectorXd& residual() const { return residual_; }
  const BlockKernel& kernel() const { return kernel_; }
  const Eigen::VectorXd& gradient() const { return gradient_; }

  Eigen::VectorXd mode_shift(const Eigen::VectorXd& rhs) const { return lu_.solve(rhs); }

  // W v restricted to same-point couplings.
  Eigen::VectorXd apply_w(const Eigen::VectorXd& v) const { return state_.W * v; }

  // Adds the z-driven part of the curvature perturbation for a mode shift dz.
  Perturbation along_mode(const Eigen::VectorXd& dz) const {
    return {state_.d2f_dz2.cwiseProduct(dz), state_.d3f_dz3.cwiseProduct(dz), state_.df_dz.cwiseProduct(dz)};
  }

  // tr(G dM) with G = (-H)^{-1}; dM is the change of
  // M = diag(f') W diag(f') - diag(f'' (y - pi)).
  double trace_curvature_change(const Perturbation& p) const {
    const Eigen::MatrixXd& g = state_.posterior_covariance;
    const Eigen::VectorXd& pi = state_.pi_hat;
    const Eigen::VectorXd& d1 = state_.df_dz;
    const Eigen::VectorXd d_pi = apply_w(p.d_value);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (int c = 0; c < classes_; ++c) {
        const Eigen::Index a = c * n_ + i;
        for (int e = 0; e < classes_; ++e) {
          const Eigen::Index b = e * n_ + i;
          const double w = (a == b ? pi(a) : 0.0) - pi(a) * pi(b);
          const double dw = (a == b ? d_pi(a) : 0.0) - d_pi(a) * pi(b) - pi(a) * d_pi(b);
          // diag(df') W D1 + D1 W diag(df') contribute equally under the trace
          acc += g(a, b) * (2.0 * p.d_first(a) * w * d1(b) + d1(a) * dw * d1(b));
        }
        acc -= g(a, a) * (p.d_second(a) * residual_(a) - state_.d2f_dz2(a) * d_pi(a));
      }
    }
    return acc;
  }

 private:
  Eigen::Index n_;
  int classes_;
  const LaplaceState& state_;
  Eigen::VectorXd residual_;
  BlockKernel kernel_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd gradient_;
};

}  // namespace

EvidenceGradient evidence_gradients(const HpcModel& model, const LaplaceState& state) {
  model.validate();
  if (state.z_hat.size() != model.latent_size()) {
    throw std::invalid_argument("evidence_gradients: state does not match model");
  }
  const Eigen::Index n = model.point_count();
  const int classes = model.class_count;
  const ModeSensitivity sens(model, state);
  const Eigen::VectorXd& residual = sens.residual();
  const Eigen::VectorXd drive = state.df_dz.cwiseProduct(residual);  // diag(f')(y - pi)
  const Eigen::MatrixXd& g = state.posterior_covariance;

  EvidenceGradient out;
  out.kernel.resize(classes);
  out.scale = Eigen::VectorXd::Zero(classes);

  for (int c = 0; c < classes; ++c) {
    const CholeskyFactor& factor = sens.kernel().factor(c);
    const Eigen::MatrixXd k_inv = factor.inverse();
    const Eigen::VectorXd alpha_c = state.alpha.segment(c * n, n);
    // S_c = K_c^{-1} G_cc K_c^{-1}
    const Eigen::MatrixXd s_c = k_inv * g.block(c * n, c * n, n, n) * k_inv;
    const KernelGradients dk = kernel_gradients(model.kernels[c], model.inputs);

    auto kernel_term = [&](const Eigen::MatrixXd& d_kc) {
      const double direct = 0.5 * alpha_c.dot(d_kc * alpha_c) - 0.5 * k_inv.cwiseProduct(d_kc).sum();
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(model.latent_size());
      rhs.segment(c * n, n) = d_kc * drive.segment(c * n, n);
      const Eigen::VectorXd dz = sens.mode_shift(rhs);
      // -1/2 tr(G d(-H)) with d(-H) = -K^{-1} dK K^{-1} + dM
      const double log_det_term = -s_c.cwiseProduct(d_kc).sum() + sens.trace_curvature_change(sens.along_mode(dz));
      return direct + sens.gradient().dot(dz) - 0.5 * log_det_term;
    };
    out.kernel[c].sigma2 = kernel_term(dk.d_sigma2);
    out.kernel[c].lambda = kernel_term(dk.d_lambda);
    out.kernel[c].noise = kernel_term(dk.d_noise);

    // scale b_c: f, f', f'' of block c all scale with b_c at fixed z
    const double b = model.transforms[c].marginal.b;
    Eigen::VectorXd df = Eigen::VectorXd::Zero(model.latent_size());
    Eigen::VectorXd d_first = Eigen::VectorXd::Zero(model.latent_size());
    Eigen::VectorXd d_second = Eigen::VectorXd::Zero(model.latent_size());
    df.segment(c * n, n) = state.f_hat.segment(c * n, n) / b;
    d_first.segment(c * n, n) = state.df_dz.segment(c * n, n) / b;
    d_second.segment(c * n, n) = state.d2f_dz2.segment(c * n, n) / b;
    const Eigen::VectorXd direct_drive =
        d_first.cwiseProduct(residual) - state.df_dz.cwiseProduct(sens.apply_w(df));
    const Eigen::VectorXd dz = sens.mode_shift(sens.kernel().multiply(direct_drive));
    Perturbation p = sens.along_mode(dz);
    p.d_first += d_first;
    p.d_second += d_second;
    p.d_value += df;
    const double direct = residual.dot(df);
    out.scale(c) = direct + sens.gradient().dot(dz) - 0.5 * sens.trace_curvature_change(p);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

enum class ParamKind { sigma2, lambda, noise, scale };

struct ParamSlot {
  ParamKind kind;
  int block;  // -1 when tied across blocks
};

std::vector<ParamSlot> layout(const HpcModel& model, const FitOptions& options) {
  std::vector<ParamSlot> slots;
  auto kernel_slots = [&](int block) {
    slots.push_back({ParamKind::sigma2, block});
    slots.push_back({ParamKind::lambda, block});
    if (options.learn_noise) slots.push_back({ParamKind::noise, block});
  };
  if (options.learn_kernel) {
    if (options.tie_kernels) {
      kernel_slots(-1);
    } else {
      for (int c = 0; c < model.class_count; ++c) kernel_slots(c);
    }
  }
  if (options.learn_scale) {
    if (options.tie_scale) {
      slots.push_back({ParamKind::scale, -1});
    } else {
      for (int c = 0; c < model.class_count; ++c) slots.push_back({ParamKind::scale, c});
    }
  }
  return slots;
}

double read_param(const HpcModel& model, const ParamSlot& slot) {
  const int c = std::max(slot.block, 0);
  switch (slot.kind) {
    case ParamKind::sigma2: return model.kernels[c].sigma2;
    case ParamKind::lambda: return model.kernels[c].lambda;
    case ParamKind::noise: return model.kernels[c].noise;
    case ParamKind::scale: return model.transforms[c].marginal.b;
  }
  return 0.0;
}

void write_param(HpcModel& model, const ParamSlot& slot, double value) {
  for (int c = 0; c < model.class_count; ++c) {
    if (slot.block >= 0 && slot.block != c) continue;
    switch (slot.kind) {
      case ParamKind::sigma2: model.kernels[c].sigma2 = value; break;
      case ParamKind::lambda: model.kernels[c].lambda = value; break;
      case ParamKind::noise: model.kernels[c].noise = value; break;
      case ParamKind::scale: model.transforms[c].marginal.b = value; break;
    }
  }
}

double gradient_entry(const EvidenceGradient& g, const ParamSlot& slot, int c) {
  switch (slot.kind) {
    case ParamKind::sigma2: return g.kernel[c].sigma2;
    case ParamKind::lambda: return g.kernel[c].lambda;
    case ParamKind::noise: return g.kernel[c].noise;
    case ParamKind::scale: return g.scale(c);
  }
  return 0.0;
}

struct Evaluation {
  bool ok = false;
  double objective = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
  HpcModel model;
  LaplaceState state;
};

}  // namespace

std::vector<std::string> parameter_names(const HpcModel& model, const FitOptions& options) {
  std::vector<std::string> names;
  for (const ParamSlot& slot : layout(model, options)) {
    std::string name;
    switch (slot.kind) {
      case ParamKind::sigma2: name = "log_sigma2"; break;
      case ParamKind::lambda: name = "log_lambda"; break;
      case ParamKind::noise: name = "log_noise"; break;
      case ParamKind::scale: name = "log_b"; break;
    }
    if (slot.block >= 0) name += "[" + std::to_string(slot.block) + "]";
    names.push_back(name);
  }
  return names;
}

Eigen::VectorXd pack_log_parameters(const HpcModel& model, const FitOptions& options) {
  const auto slots = layout(model, options);
  Eigen::VectorXd phi(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const double value = read_param(model, slots[k]);
    if (!(value > 0.0)) throw std::invalid_argument("fit: learned parameters must start strictly positive");
    phi(k) = std::log(value);
  }
  return phi;
}

HpcModel unpack_log_parameters(const HpcModel& model, const FitOptions& options, const Eigen::VectorXd& phi) {
  const auto slots = layout(model, options);
  if (phi.size() != static_cast<Eigen::Index>(slots.size())) throw std::invalid_argument("fit: parameter size");
  HpcModel out = model;
  for (std::size_t k = 0; k < slots.size(); ++k) write_param(out, slots[k], std::exp(phi(k)));
  return out;
}

Eigen::VectorXd log_parameter_gradient(const HpcModel& model, const FitOptions& options,
                                       const EvidenceGradient& gradient) {
  const auto slots = layout(model, options);
  Eigen::VectorXd out(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) {
    double acc = 0.0;
    for (int c = 0; c < model.class_count; ++c) {
      if (slots[k].block >= 0 && slots[k].block != c) continue;
      acc += gradient_entry(gradient, slots[k], c);
    }
    // chain rule for p = exp(phi); tied slots share one value
    out(k) = acc * read_param(model, slots[k]);
  }
  return out;
}

FitResult fit(const HpcModel& initial, const FitOptions& options) {
  initial.validate();
  const auto slots = layout(initial, options);
  const Eigen::Index dim = static_cast<Eigen::Index>(slots.size());
  const Eigen::VectorXd phi0 = pack_log_parameters(initial, options);
  const Eigen::VectorXd center = options.prior_center.value_or(phi0);
  if (center.size() != dim) throw std::invalid_argument("fit: prior_center has the wrong size");

  Eigen::VectorXd lower = center.array() - options.log_bound;
  Eigen::VectorXd upper = center.array() + options.log_bound;
  for (Eigen::Index k = 0; k < dim; ++k) {
    if (slots[k].kind == ParamKind::noise) lower(k) = std::max(lower(k), std::log(options.noise_floor));
  }
  auto project = [&](Eigen::VectorXd v) { return v.cwiseMax(lower).cwiseMin(upper).eval(); };

  FitResult result;
  result.parameter_names = parameter_names(initial, options);

  auto evaluate = [&](const Eigen::VectorXd& phi, const Eigen::VectorXd& warm) {
    ++result.trace.evaluations;
    Evaluation e;
    e.model = unpack_log_parameters(initial, options, phi);
    try {
      e.state = find_mode(e.model, warm, options.mode);
      const EvidenceGradient g = evidence_gradients(e.model, e.state);
      const Eigen::VectorXd diff = phi - center;
      e.objective = e.state.log_marginal - options.regularizer * diff.squaredNorm();
      e.gradient = log_parameter_gradient(e.model, options, g) - 2.0 * options.regularizer * diff;
      e.ok = std::isfinite(e.objective) && e.gradient.allFinite();
    } catch (const NumericalError&) {
      e.ok = false;
    }
    return e;
  };

  Eigen::VectorXd phi = project(phi0);
  Evaluation current = evaluate(phi, Eigen::VectorXd::Zero(initial.latent_size()));
  if (!current.ok) throw NumericalError("fit: no valid Laplace mode at the initial parameters");
  result.trace.objective.push_back(current.objective);
  result.trace.log_marginal.push_back(current.state.log_marginal);

  constexpr std::size_t kMemory = 6;
  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;

  auto projected_gradient_norm = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& g) {
    double norm = 0.0;
    for (Eigen::Index k = 0; k < dim; ++k) {
      const bool pinned = (p(k) <= lower(k) && g(k) < 0.0) || (p(k) >= upper(k) && g(k) > 0.0);
      if (!pinned) norm = std::max(norm, std::abs(g(k)));
    }
    return norm;
  };

  if (dim == 0) {
    result.trace.converged = true;
    result.trace.message = "no free parameters";
  }
  for (int iter = 0; dim > 0 && iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd& g = current.gradient;
    if (projected_gradient_norm(phi, g) <= options.gradient_tolerance) {
      result.trace.converged = true;
      result.trace.message = "gradient tolerance reached";
      break;
    }
    // two-loop recursion on the negated objective; produces an ascent direction
    Eigen::VectorXd q = g;
    std::vector<double> rho(s_hist.size()), coef(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      rho[k] = 1.0 / y_hist[k].dot(s_hist[k]);
      coef[k] = rho[k] * s_hist[k].dot(q);
      q -= coef[k] * y_hist[k];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho[k] * y_hist[k].dot(q);
      q += (coef[k] - beta) * s_hist[k];
    }
    Eigen::VectorXd direction = q;
    if (!(direction.dot(g) > 0.0)) {
      direction = g;
      s_hist.clear();
      y_hist.clear();
    }
    const double largest = direction.lpNorm<Eigen::Infinity>();
    if (largest > 1.0) direction /= largest;

    bool accepted = false;
    Evaluation trial;
    Eigen::VectorXd phi_trial;
    for (double step = 1.0; step > 1e-3; step *= 0.5) {
      phi_trial = project(phi + step * direction);
      if ((phi_trial - phi).lpNorm<Eigen::Infinity>() == 0.0) break;
      trial = evaluate(phi_trial, current.state.z_hat);
      if (trial.ok && trial.objective >= current.objective + 1e-4 * g.dot(phi_trial - phi)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.trace.converged = projected_gradient_norm(phi, g) <= 100.0 * options.gradient_tolerance;
      result.trace.message = "line search made no further progress";
      break;
    }
    const Eigen::VectorXd s = phi_trial - phi;
    const Eigen::VectorXd y = g - trial.gradient;  // gradient change of the negated objective
    if (s.dot(y) > 1e-12) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    const double previous = current.objective;
    phi = phi_trial;
    current = std::move(trial);
    result.trace.objective.push_back(current.objective);
    result.trace.log_marginal.push_back(current.state.log_marginal);
    if (std::abs(current.objective - previous) <= 1e-10 * (1.0 + std::abs(previous))) {
      result.trace.converged = true;
      result.trace.message = "objective change below tolerance";
      break;
    }
  }
  if (dim > 0 && result.trace.message.empty()) result.trace.message = "iteration limit reached";

  result.model = current.model;
  result.state = std::move(current.state);
  result.log_parameters = phi;
  return result;
}

}  // namespace htp
