#include "htp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace htp {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::gpc ? "gpc" : "hpc"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gpc") return ModelKind::gpc;
  if (name == "hpc") return ModelKind::hpc;
  throw std::invalid_argument("unknown model kind '" + std::string(name) + "' (expected gpc or hpc)");
}

void ExperimentConfig::validate() const {
  kernel.validate();
  marginal.validate();
  if (!(copula_sigma2 > 0.0)) throw std::invalid_argument("config: copula_sigma2 must be positive");
  if (folds < 2) throw std::invalid_argument("config: folds must be >= 2");
  if (train_cap < 1) throw std::invalid_argument("config: train_cap must be >= 1");
  if (regularizer_grid.empty()) throw std::invalid_argument("config: regularizer_grid must not be empty");
  for (double r : regularizer_grid) {
    if (!(r >= 0.0)) throw std::invalid_argument("config: regularizers must be >= 0");
  }
  if (max_iterations < 0) throw std::invalid_argument("config: max_iterations must be >= 0");
  if (quadrature_nodes < 1) throw std::invalid_argument("config: quadrature_nodes must be >= 1");
  if (mode_max_iterations < 1) throw std::invalid_argument("config: mode_max_iterations must be >= 1");
}

nlohmann::json ExperimentConfig::to_json() const {
  return nlohmann::json{{"kernel", std::string(htp::to_string(kernel.family))},
                        {"sigma2", kernel.sigma2},
                        {"lambda", kernel.lambda},
                        {"noise", kernel.noise},
                        {"marginal", std::string(htp::to_string(marginal.family))},
                        {"b", marginal.b},
                        {"copula_sigma2", copula_sigma2},
                        {"learn_hyperparameters", learn_hyperparameters},
                        {"learn_noise", learn_noise},
                        {"learn_scale", learn_scale},
                        {"max_iterations", max_iterations},
                        {"folds", folds},
                        {"train_cap", train_cap},
                        {"regularizer_grid", regularizer_grid},
                        {"seed", seed},
                        {"quadrature_nodes", quadrature_nodes},
                        {"mode_max_iterations", mode_max_iterations}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "kernel") c.kernel.family = parse_kernel_family(value.get<std::string>());
    else if (key == "sigma2") c.kernel.sigma2 = value.get<double>();
    else if (key == "lambda") c.kernel.lambda = value.get<double>();
    else if (key == "noise") c.kernel.noise = value.get<double>();
    else if (key == "marginal") c.marginal.family = parse_marginal_family(value.get<std::string>());
    else if (key == "b") c.marginal.b = value.get<double>();
    else if (key == "copula_sigma2") c.copula_sigma2 = value.get<double>();
    else if (key == "learn_hyperparameters") c.learn_hyperparameters = value.get<bool>();
    else if (key == "learn_noise") c.learn_noise = value.get<bool>();
    else if (key == "learn_scale") c.learn_scale = value.get<bool>();
    else if (key == "max_iterations") c.max_iterations = value.get<int>();
    else if (key == "folds") c.folds = value.get<int>();
    else if (key == "train_cap") c.train_cap = value.get<int>();
    else if (key == "regularizer_grid") c.regularizer_grid = value.get<std::vector<double>>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "quadrature_nodes") c.quadrature_nodes = value.get<int>();
    else if (key == "mode_max_iterations") c.mode_max_iterations = value.get<int>();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

std::string ExperimentConfig::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

HpcModel make_model(const Dataset& train, const ExperimentConfig& config, ModelKind kind) {
  config.validate();
  CopulaTransform t;
  t.sigma2 = config.copula_sigma2;
  t.marginal = kind == ModelKind::gpc ? MarginalSpec{MarginalFamily::gaussian, 1.0} : config.marginal;
  if (kind == ModelKind::gpc) t.sigma2 = 1.0;
  return HpcModel::make(train.points, train.labels, train.class_count, config.kernel, t);
}

FitOptions fit_options(const ExperimentConfig& config, ModelKind kind, double regularizer) {
  FitOptions o;
  o.learn_kernel = config.learn_hyperparameters;
  o.learn_noise = config.learn_hyperparameters && config.learn_noise;
  const bool gaussian = kind == ModelKind::gpc || config.marginal.family == MarginalFamily::gaussian;
  o.learn_scale = config.learn_hyperparameters && config.learn_scale && !gaussian;
  o.regularizer = regularizer;
  o.max_iterations = config.max_iterations;
  o.mode.max_iterations = config.mode_max_iterations;
  return o;
}

FitResult train_model(const Dataset& train, const ExperimentConfig& config, ModelKind kind, double regularizer) {
  return fit(make_model(train, config, kind), fit_options(config, kind, regularizer));
}

ClassPrediction predict_point(const FitResult& fitted, const Eigen::VectorXd& x, const ExperimentConfig& config) {
  PredictOptions o;
  o.method = PredictiveMethod::quadrature;
  o.quadrature_nodes = config.quadrature_nodes;
  return laplace_predict(fitted.model, fitted.state, x, o);
}

int argmax(const Eigen::VectorXd& p) {
  Eigen::Index k = 0;
  p.maxCoeff(&k);
  return static_cast<int>(k);
}

namespace {

double ratio(int num, int den) {
  return den > 0 ? static_cast<double>(num) / den : std::numeric_limits<double>::quiet_NaN();
}

void tally(AccuracyCounts& c, bool correct, Region region) {
  ++c.total;
  c.correct += correct;
  if (region == Region::sparse) {
    ++c.sparse;
    c.sparse_correct += correct;
  } else {
    ++c.dense;
    c.dense_correct += correct;
  }
}

void add(AccuracyCounts& into, const AccuracyCounts& c) {
  into.total += c.total;
  into.correct += c.correct;
  into.sparse += c.sparse;
  into.sparse_correct += c.sparse_correct;
  into.dense += c.dense;
  into.dense_correct += c.dense_correct;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

double AccuracyCounts::overall() const { return ratio(correct, total); }
double AccuracyCounts::sparse_accuracy() const { return ratio(sparse_correct, sparse); }
double AccuracyCounts::dense_accuracy() const { return ratio(dense_correct, dense); }

nlohmann::json CrossvalMetrics::to_json() const {
  nlohmann::json per_fold = nlohmann::json::array();
  for (const auto& f : folds) {
    per_fold.push_back({{"fold", f.fold},
                        {"skipped", f.skipped},
                        {"warning", f.warning},
                        {"test_count", f.counts.total},
                        {"correct", f.counts.correct},
                        {"sparse_count", f.counts.sparse},
                        {"sparse_correct", f.counts.sparse_correct},
                        {"dense_count", f.counts.dense},
                        {"dense_correct", f.counts.dense_correct},
                        {"accuracy", number_or_null(f.counts.overall())},
                        {"log_marginal", number_or_null(f.log_marginal)},
                        {"log_parameters", f.log_parameters}});
  }
  return nlohmann::json{{"model", std::string(htp::to_string(kind))},
                        {"regularizer", regularizer},
                        {"overall_acc", number_or_null(counts.overall())},
                        {"sparse_acc", number_or_null(counts.sparse_accuracy())},
                        {"dense_acc", number_or_null(counts.dense_accuracy())},
                        {"test_count", counts.total},
                        {"sparse_count", counts.sparse},
                        {"dense_count", counts.dense},
                        {"per_fold", per_fold},
                        {"config_hash", config_hash}};
}

std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("fold_assignment: folds must be >= 2");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < order.size(); ++k) fold[order[k]] = static_cast<int>(k % folds);
  return fold;
}

CrossvalMetrics crossval(const Dataset& ds, const ExperimentConfig& config, ModelKind kind, double regularizer) {
  ds.validate();
  config.validate();
  CrossvalMetrics out;
  out.kind = kind;
  out.regularizer = regularizer;
  out.config_hash = config.hash();
  const std::vector<int> fold = fold_assignment(ds.size(), config.folds, config.seed);

  struct FoldOutput {
    FoldMetrics metrics;
    std::vector<PointPrediction> predictions;
  };
  const auto run_fold = [&](int k) {
    FoldOutput o;
    FoldMetrics& fm = o.metrics;
    fm.fold = k;
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> test_rows;
    for (Eigen::Index i = 0; i < ds.size(); ++i) (fold[i] == k ? test_rows : train_rows).push_back(i);
    if (static_cast<int>(train_rows.size()) > config.train_cap) {
      std::mt19937_64 rng(config.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1)));
      for (std::size_t i = train_rows.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(train_rows[i - 1], train_rows[pick(rng)]);
      }
      train_rows.resize(static_cast<std::size_t>(config.train_cap));
      std::sort(train_rows.begin(), train_rows.end());
    }
    const Dataset train = ds.subset(train_rows);
    std::set<int> present(train.labels.begin(), train.labels.end());
    if (test_rows.empty() || static_cast<int>(present.size()) < ds.class_count) {
      fm.skipped = true;
      fm.warning = test_rows.empty() ? "empty test fold" : "training part misses a class";
      return o;
    }
    if (ds.class_count < 2) {
      // a single class needs no model
      for (Eigen::Index i : test_rows) {
        PointPrediction p;
        p.index = i;
        p.fold = k;
        p.label = ds.labels[i];
        p.probabilities = Eigen::VectorXd::Ones(1);
        tally(fm.counts, p.label == 0, ds.region(i));
        o.predictions.push_back(std::move(p));
      }
      return o;
    }
    const FitResult fitted = train_model(train, config, kind, regularizer);
    fm.log_marginal = fitted.state.log_marginal;
    fm.log_parameters.assign(fitted.log_parameters.data(), fitted.log_parameters.data() + fitted.log_parameters.size());
    if (!fitted.trace.converged) fm.warning = "hyperparameter search: " + fitted.trace.message;
    for (Eigen::Index i : test_rows) {
      PointPrediction p;
      p.index = i;
      p.fold = k;
      p.label = ds.labels[i];
      p.probabilities = predict_point(fitted, ds.points.row(i).transpose(), config).probabilities;
      p.predicted = argmax(p.probabilities);
      tally(fm.counts, p.predicted == p.label, ds.region(i));
      o.predictions.push_back(std::move(p));
    }
    return o;
  };

  const int workers = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  std::vector<FoldOutput> results(static_cast<std::size_t>(config.folds));
  for (int first = 0; first < config.folds; first += workers) {
    std::vector<std::future<FoldOutput>> batch;
    const int last = std::min(config.folds, first + workers);
    for (int k = first; k < last; ++k) batch.push_back(std::async(std::launch::async, run_fold, k));
    for (int k = first; k < last; ++k) {
      results[static_cast<std::size_t>(k)] = batch[static_cast<std::size_t>(k - first)].get();
    }
  }
  for (auto& r : results) {
    add(out.counts, r.metrics.counts);
    for (auto& p : r.predictions) out.predictions.push_back(std::move(p));
    out.folds.push_back(std::move(r.metrics));
  }
  return out;
}

CrossvalMetrics crossval(const Dataset& ds, const ExperimentConfig& config, ModelKind kind) {
  return crossval(ds, config, kind, config.regularizer_grid.front());
}

AccuracyCounts rescore(const std::vector<PointPrediction>& predictions, const Dataset& tagged) {
  AccuracyCounts c;
  for (const auto& p : predictions) tally(c, p.predicted == p.label, tagged.region(p.index));
  return c;
}

NestedResult nested_crossval(const std::vector<Dataset>& groups, const ExperimentConfig& config, ModelKind kind) {
  config.validate();
  if (groups.empty()) throw std::invalid_argument("nested_crossval: no datasets");
  const std::size_t grid = config.regularizer_grid.size();
  std::vector<std::vector<CrossvalMetrics>> all(grid);
  for (std::size_t r = 0; r < grid; ++r) {
    for (const auto& g : groups) all[r].push_back(crossval(g, config, kind, config.regularizer_grid[r]));
  }
  NestedResult out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t r = 0; r < grid; ++r) {
      double sum = 0.0;
      int used = 0;
      for (std::size_t h = 0; h < groups.size(); ++h) {
        if (h == g && groups.size() > 1) continue;
        const double acc = all[r][h].counts.overall();
        if (std::isfinite(acc)) {
          sum += acc;
          ++used;
        }
      }
      const double score = used > 0 ? sum / used : -1.0;
      if (score > best_score) {
        best_score = score;
        best = r;
      }
    }
    out.chosen_regularizer.push_back(config.regularizer_grid[best]);
    out.metrics.push_back(all[best][g]);
  }
  return out;
}

std::vector<CurvePoint> region_growth_curve(const std::vector<Dataset>& datasets, const std::vector<RegionSpec>& specs,
                                            const std::vector<CrossvalMetrics>& gpc,
                                            const std::vector<CrossvalMetrics>& hpc) {
  if (datasets.size() != specs.size() || datasets.size() != gpc.size() || datasets.size() != hpc.size()) {
    throw std::invalid_argument("region_growth_curve: inputs differ in length");
  }
  int levels = 0;
  for (const auto& s : specs) levels = std::max(levels, s.max_level() + 1);
  std::vector<CurvePoint> curve;
  for (int level = 0; level < levels; ++level) {
    CurvePoint p;
    p.level = level;
    int used = 0;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      const Dataset tagged = assign_regions(datasets[d], specs[d], level);
      const AccuracyCounts g = rescore(gpc[d].predictions, tagged);
      const AccuracyCounts h = rescore(hpc[d].predictions, tagged);
      if (g.sparse == 0) continue;
      p.mean_sparse_size += g.sparse;
      p.gpc_sparse_acc += g.sparse_accuracy();
      p.hpc_sparse_acc += h.sparse_accuracy();
      ++used;
    }
    if (used > 0) {
      p.mean_sparse_size /= used;
      p.gpc_sparse_acc /= used;
      p.hpc_sparse_acc /= used;
    }
    curve.push_back(p);
  }
  return curve;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out.precision(10);
  out << "level,mean_sparse_size,gpc_sparse_acc,hpc_sparse_acc,gap\n";
  for (const auto& p : curve) {
    out << p.level << ',' << p.mean_sparse_size << ',' << p.gpc_sparse_acc << ',' << p.hpc_sparse_acc << ','
        << p.gap() << '\n';
  }
  return out.str();
}

double sign_test_p_value(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return std::min(1.0, p);
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length samples");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace htp
