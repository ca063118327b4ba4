#include "htp/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "htp/errors.hpp"

namespace htp {

void ChainConfig::validate() const {
  if (burn_in < 0) throw std::invalid_argument("ChainConfig: burn_in must be >= 0");
  if (samples < 1) throw std::invalid_argument("ChainConfig: samples must be >= 1");
  if (thin < 1) throw std::invalid_argument("ChainConfig: thin must be >= 1");
  if (chains < 1) throw std::invalid_argument("ChainConfig: chains must be >= 1");
  if (!(proposal_scale > 0.0)) throw std::invalid_argument("ChainConfig: proposal_scale must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw std::invalid_argument("ChainConfig: target_acceptance must lie in (0, 1)");
  }
}

Eigen::VectorXd ChainResult::mean() const { return draws.colwise().mean().transpose(); }

Eigen::MatrixXd ChainResult::covariance() const {
  const Eigen::MatrixXd centered = draws.rowwise() - draws.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(1, draws.rows() - 1));
}

double potential_scale_reduction(const Eigen::VectorXd& stacked, int chains) {
  const Eigen::Index len = stacked.size() / chains;
  if (chains < 2 || len < 2) return std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd means(chains);
  double within = 0.0;
  for (int c = 0; c < chains; ++c) {
    const auto seg = stacked.segment(c * len, len);
    means(c) = seg.mean();
    within += (seg.array() - means(c)).square().sum() / static_cast<double>(len - 1);
  }
  within /= chains;
  const double between = len * (means.array() - means.mean()).square().sum() / (chains - 1);
  if (within <= 0.0) return 1.0;
  const double pooled = (len - 1.0) / len * within + between / len;
  return std::sqrt(pooled / within);
}

namespace {

// Local log-density change for moving coordinate j by delta.
struct Target {
  virtual ~Target() = default;
  virtual Eigen::Index dim() const = 0;
  virtual void reset(const Eigen::VectorXd& x) = 0;
  virtual double delta(Eigen::Index j, double step) = 0;
  virtual void accept(Eigen::Index j, double step) = 0;
  virtual const Eigen::VectorXd& state() const = 0;
};

class GenericTarget final : public Target {
 public:
  GenericTarget(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::Index dim) : f_(f), dim_(dim) {}
  Eigen::Index dim() const override { return dim_; }
  void reset(const Eigen::VectorXd& x) override {
    x_ = x;
    current_ = f_(x_);
    if (!std::isfinite(current_)) throw std::invalid_argument("MCMC start has non-finite log density");
  }
  double delta(Eigen::Index j, double step) override {
    const double old = x_(j);
    x_(j) = old + step;
    proposed_ = f_(x_);
    x_(j) = old;
    return proposed_ - current_;
  }
  void accept(Eigen::Index j, double step) override {
    x_(j) += step;
    current_ = proposed_;
  }
  const Eigen::VectorXd& state() const override { return x_; }

 private:
  const std::function<double(const Eigen::VectorXd&)>& f_;
  Eigen::Index dim_;
  Eigen::VectorXd x_;
  double current_ = 0.0;
  double proposed_ = 0.0;
};

class ClassificationTarget final : public Target {
 public:
  ClassificationTarget(const HpcModel& model, bool likelihood)
      : model_(model), likelihood_(likelihood), n_(model.point_count()), y_(model.targets()) {
    const BlockKernel kernel(model);
    k_inv_.reserve(model.class_count);
    for (int c = 0; c < model.class_count; ++c) k_inv_.push_back(kernel.factor(c).inverse());
  }
  Eigen::Index dim() const override { return model_.latent_size(); }
  void reset(const Eigen::VectorXd& z) override {
    z_ = z;
    f_.resize(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) f_(j) = warp(model_.transforms[j / n_], z(j));
    a_.resize(z.size());
    for (int c = 0; c < model_.class_count; ++c) a_.segment(c * n_, n_) = k_inv_[c] * z.segment(c * n_, n_);
  }
  double delta(Eigen::Index j, double step) override {
    const int c = static_cast<int>(j / n_);
    const Eigen::Index i = j % n_;
    const double kjj = k_inv_[c](i, i);
    double d = -step * a_(j) - 0.5 * step * step * kjj;
    proposed_f_ = warp(model_.transforms[c], z_(j) + step);
    if (likelihood_) d += point_loglik(i, j, proposed_f_) - point_loglik(i, j, f_(j));
    return d;
  }
  void accept(Eigen::Index j, double step) override {
    const int c = static_cast<int>(j / n_);
    const Eigen::Index i = j % n_;
    z_(j) += step;
    f_(j) = proposed_f_;
    a_.segment(c * n_, n_) += step * k_inv_[c].col(i);
  }
  const Eigen::VectorXd& state() const override { return z_; }

 private:
  double point_loglik(Eigen::Index i, Eigen::Index j, double fj) const {
    double top = -std::numeric_limits<double>::infinity();
    double yf = 0.0;
    for (int c = 0; c < model_.class_count; ++c) {
      const Eigen::Index k = c * n_ + i;
      const double v = k == j ? fj : f_(k);
      top = std::max(top, v);
      yf += y_(k) * v;
    }
    double s = 0.0;
    for (int c = 0; c < model_.class_count; ++c) {
      const Eigen::Index k = c * n_ + i;
      s += std::exp((k == j ? fj : f_(k)) - top);
    }
    return yf - top - std::log(s);
  }

  const HpcModel& model_;
  bool likelihood_;
  Eigen::Index n_;
  Eigen::VectorXd y_;
  std::vector<Eigen::MatrixXd> k_inv_;
  Eigen::VectorXd z_, f_, a_;
  double proposed_f_ = 0.0;
};

std::mt19937_64 chain_engine(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x68747063u};
  return std::mt19937_64(seq);
}

ChainResult run_chains(Target& target, const std::function<Eigen::VectorXd(std::mt19937_64&)>& start,
                       const ChainConfig& config) {
  config.validate();
  const Eigen::Index dim = target.dim();
  ChainResult out;
  out.chains = config.chains;
  out.samples_per_chain = config.samples;
  out.draws.resize(static_cast<Eigen::Index>(config.chains) * config.samples, dim);
  out.acceptance.resize(config.chains);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr int kBatch = 50;

  for (int chain = 0; chain < config.chains; ++chain) {
    std::mt19937_64 rng = chain_engine(config.seed, chain);
    target.reset(start(rng));
    Eigen::VectorXd log_scale = Eigen::VectorXd::Constant(dim, std::log(config.proposal_scale));
    Eigen::VectorXd batch_accepts = Eigen::VectorXd::Zero(dim);
    long long accepted = 0;
    long long proposed = 0;

    auto sweep = [&](bool adapting) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        const double step = std::exp(log_scale(j)) * gauss(rng);
        const double d = target.delta(j, step);
        const bool ok = std::isfinite(d) && (d >= 0.0 || std::log(unif(rng)) < d);
        if (ok) target.accept(j, step);
        if (adapting) {
          batch_accepts(j) += ok;
        } else {
          accepted += ok;
          ++proposed;
        }
      }
    };

    for (int it = 0; it < config.burn_in; ++it) {
      sweep(true);
      if ((it + 1) % kBatch == 0) {
        const double rate_step = std::min(0.5, 3.0 / std::sqrt((it + 1.0) / kBatch));
        for (Eigen::Index j = 0; j < dim; ++j) {
          log_scale(j) += rate_step * (batch_accepts(j) / kBatch - config.target_acceptance);
        }
        batch_accepts.setZero();
      }
    }
    for (int s = 0; s < config.samples; ++s) {
      for (int t = 0; t < config.thin; ++t) sweep(false);
      out.draws.row(static_cast<Eigen::Index>(chain) * config.samples + s) = target.state().transpose();
    }
    out.acceptance(chain) = static_cast<double>(accepted) / static_cast<double>(std::max(1LL, proposed));
    if (chain == 0) out.proposal_scales = log_scale.array().exp();
    if (out.acceptance(chain) < 0.01) {
      std::ostringstream msg;
      msg << "MCMC acceptance " << out.acceptance(chain) << " below 0.01 in chain " << chain;
      throw NumericalError(msg.str());
    }
  }

  out.rhat.resize(dim);
  out.max_rhat = 0.0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    out.rhat(j) = potential_scale_reduction(out.draws.col(j), config.chains);
    if (std::isfinite(out.rhat(j))) out.max_rhat = std::max(out.max_rhat, out.rhat(j));
  }
  return out;
}

}  // namespace

ChainResult sample_posterior(const HpcModel& model, const ChainConfig& config) {
  model.validate();
  if (model.latent_size() > 30) throw std::invalid_argument("sample_posterior: latent size above 30");
  ClassificationTarget target(model, config.include_likelihood);
  const BlockKernel kernel(model);
  const Eigen::Index n = model.point_count();
  auto start = [&](std::mt19937_64& rng) {
    // overdispersed start: a prior draw
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(model.latent_size());
    for (int c = 0; c < model.class_count; ++c) {
      Eigen::VectorXd xi(n);
      for (Eigen::Index i = 0; i < n; ++i) xi(i) = gauss(rng);
      z.segment(c * n, n) = kernel.factor(c).lower() * xi;
    }
    return z;
  };
  return run_chains(target, start, config);
}

ChainResult sample_metropolis_within_gibbs(const std::function<double(const Eigen::VectorXd&)>& log_target,
                                           const Eigen::VectorXd& start, const ChainConfig& config) {
  if (start.size() == 0) throw std::invalid_argument("sample_metropolis_within_gibbs: empty start");
  GenericTarget target(log_target, start.size());
  return run_chains(target, [&](std::mt19937_64&) { return start; }, config);
}

ChainPrediction predictive_from_chain(const HpcModel& model, const ChainResult& chain, const Eigen::VectorXd& x_star,
                                      std::uint64_t seed) {
  model.validate();
  if (chain.draws.cols() != model.latent_size()) throw std::invalid_argument("predictive_from_chain: size mismatch");
  if (x_star.size() != model.inputs.cols()) throw std::invalid_argument("predictive_from_chain: dimension mismatch");
  const Eigen::Index n = model.point_count();
  const int classes = model.class_count;
  const Points star = x_star.transpose();
  const BlockKernel kernel(model);
  std::vector<Eigen::VectorXd> weights(classes);
  Eigen::VectorXd sd(classes);
  for (int c = 0; c < classes; ++c) {
    const KernelSpec& k = model.kernels[c];
    const Eigen::VectorXd k_star = cross_kernel(k, model.inputs, star).col(0);
    weights[c] = kernel.factor(c).solve(k_star);
    sd(c) = std::sqrt(std::max(0.0, k.sigma2 + k.noise - k_star.dot(weights[c])));
  }

  std::mt19937_64 rng = chain_engine(seed, -1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index draws = chain.draws.rows();
  Eigen::MatrixXd values(draws, classes);
  Eigen::VectorXd f(classes);
  for (Eigen::Index s = 0; s < draws; ++s) {
    for (int c = 0; c < classes; ++c) {
      const double mean = weights[c].dot(chain.draws.row(s).segment(c * n, n).transpose());
      f(c) = warp(model.transforms[c], mean + sd(c) * gauss(rng));
    }
    values.row(s) = softmax_likelihood(f).transpose();
  }

  ChainPrediction out;
  out.probabilities = values.colwise().mean().transpose();
  const Eigen::Index batches = std::min<Eigen::Index>(40, draws);
  const Eigen::Index len = draws / batches;
  Eigen::MatrixXd batch_means(batches, classes);
  for (Eigen::Index b = 0; b < batches; ++b) batch_means.row(b) = values.middleRows(b * len, len).colwise().mean();
  const Eigen::RowVectorXd grand = batch_means.colwise().mean();
  out.standard_error.resize(classes);
  for (int c = 0; c < classes; ++c) {
    const double var = batches > 1 ? (batch_means.col(c).array() - grand(c)).square().sum() / (batches - 1) : 0.0;
    out.standard_error(c) = std::sqrt(var / static_cast<double>(batches));
  }
  return out;
}

}  // namespace htp
