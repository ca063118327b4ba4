#ifndef HTP_EXPERIMENT_HPP_
#define HTP_EXPERIMENT_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "htp/dataset.hpp"
#include "htp/hpc.hpp"
#include "htp/learning.hpp"

namespace htp {

enum class ModelKind { gpc, hpc };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ExperimentConfig {
  KernelSpec kernel{KernelFamily::von_mises, 1.0, 2.0, 0.05};
  MarginalSpec marginal{MarginalFamily::laplace, 1.0};  // used by hpc; gpc is gaussian with b = 1
  double copula_sigma2 = 1.0;
  bool learn_hyperparameters = true;
  bool learn_noise = false;
  bool learn_scale = true;  // ignored for gaussian marginals
  int max_iterations = 30;
  int folds = 10;
  int train_cap = 100;
  std::vector<double> regularizer_grid{0.1};
  std::uint64_t seed = 0;
  int quadrature_nodes = 10;
  int mode_max_iterations = 5000;

  void validate() const;
  /// Flat JSON document; unknown keys are rejected.
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// FNV-1a over the canonical JSON dump, as 16 hex digits.
  std::string hash() const;
};

/// Untrained model on a dataset for the given kind.
HpcModel make_model(const Dataset& train, const ExperimentConfig& config, ModelKind kind);
FitOptions fit_options(const ExperimentConfig& config, ModelKind kind, double regularizer);
FitResult train_model(const Dataset& train, const ExperimentConfig& config, ModelKind kind, double regularizer);
ClassPrediction predict_point(const FitResult& fitted, const Eigen::VectorXd& x, const ExperimentConfig& config);
int argmax(const Eigen::VectorXd& p);

struct PointPrediction {
  Eigen::Index index = 0;  // row in the dataset
  int fold = 0;
  int label = 0;
  int predicted = 0;
  Eigen::VectorXd probabilities;
};

struct AccuracyCounts {
  int total = 0;
  int correct = 0;
  int sparse = 0;
  int sparse_correct = 0;
  int dense = 0;
  int dense_correct = 0;

  double overall() const;
  double sparse_accuracy() const;  // NaN when there are no sparse points
  double dense_accuracy() const;
};

struct FoldMetrics {
  int fold = 0;
  bool skipped = false;
  std::string warning;
  AccuracyCounts counts;
  double log_marginal = 0.0;
  std::vector<double> log_parameters;
};

struct CrossvalMetrics {
  ModelKind kind = ModelKind::hpc;
  double regularizer = 0.0;
  std::string config_hash;
  std::vector<FoldMetrics> folds;
  std::vector<PointPrediction> predictions;
  AccuracyCounts counts;  // pooled over folds

  nlohmann::json to_json() const;
};

/// Deterministic fold assignment: a seeded permutation cut into near-equal parts.
std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed);

/// Ten-fold style cross-validation. Folds whose training part misses a
/// class are skipped with a warning.
CrossvalMetrics crossval(const Dataset& ds, const ExperimentConfig& config, ModelKind kind, double regularizer);
CrossvalMetrics crossval(const Dataset& ds, const ExperimentConfig& config, ModelKind kind);

/// Recomputes region counts of stored predictions under new region tags.
AccuracyCounts rescore(const std::vector<PointPrediction>& predictions, const Dataset& tagged);

/// Nested selection over dataset groups: for each held-out group the
/// regularizer with the best mean accuracy on the remaining groups is used.
struct NestedResult {
  std::vector<double> chosen_regularizer;  // per group
  std::vector<CrossvalMetrics> metrics;    // per group, at the chosen value
};
NestedResult nested_crossval(const std::vector<Dataset>& groups, const ExperimentConfig& config, ModelKind kind);

struct CurvePoint {
  int level = 0;
  double mean_sparse_size = 0.0;
  double gpc_sparse_acc = 0.0;
  double hpc_sparse_acc = 0.0;
  double gap() const { return hpc_sparse_acc - gpc_sparse_acc; }
};

/// Sparse accuracy of both models as the sparse region grows, averaged over
/// datasets (mean of per-dataset sparse accuracies at each level).
std::vector<CurvePoint> region_growth_curve(const std::vector<Dataset>& datasets, const std::vector<RegionSpec>& specs,
                                            const std::vector<CrossvalMetrics>& gpc,
                                            const std::vector<CrossvalMetrics>& hpc);
std::string curve_csv(const std::vector<CurvePoint>& curve);

/// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p_value(int wins, int losses);
/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace htp

#endif  // HTP_EXPERIMENT_HPP_
