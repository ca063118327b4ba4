#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include <gtest/gtest.h>

#include <htp/experiment.hpp>

namespace {

htp::ExperimentConfig quick_config() {
  htp::ExperimentConfig c;
  c.max_iterations = 8;
  c.seed = 3;
  return c;
}

TEST(Experiment, ConstantLabelIsPerfect) {
  htp::Dataset ds = htp::synth_covariate_shift(2).dataset;
  std::fill(ds.labels.begin(), ds.labels.end(), 0);
  ds.class_count = 1;
  for (htp::ModelKind kind : {htp::ModelKind::gpc, htp::ModelKind::hpc}) {
    const htp::CrossvalMetrics m = htp::crossval(ds, quick_config(), kind);
    EXPECT_EQ(m.counts.total, ds.size());
    EXPECT_DOUBLE_EQ(m.counts.overall(), 1.0);
  }
}

TEST(Experiment, PermutedLabelsAtChance) {
  // pooled over several datasets so the chance band is several standard errors wide
  int correct = 0;
  int total = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    htp::Dataset ds = htp::synth_covariate_shift(seed).dataset;
    std::mt19937_64 rng(seed + 100);
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);
    htp::ExperimentConfig c = quick_config();
    c.seed = seed;
    c.learn_hyperparameters = false;
    const htp::CrossvalMetrics m = htp::crossval(ds, c, htp::ModelKind::hpc);
    correct += m.counts.correct;
    total += m.counts.total;
  }
  EXPECT_NEAR(static_cast<double>(correct) / total, 1.0 / 3.0, 0.1);
}

TEST(Experiment, GaussianHpcMatchesGpc) {
  const htp::Dataset ds = htp::synth_covariate_shift(5).dataset;
  htp::ExperimentConfig c = quick_config();
  c.marginal = {htp::MarginalFamily::gaussian, 1.0};
  const htp::CrossvalMetrics g = htp::crossval(ds, c, htp::ModelKind::gpc);
  const htp::CrossvalMetrics h = htp::crossval(ds, c, htp::ModelKind::hpc);
  ASSERT_EQ(g.predictions.size(), h.predictions.size());
  for (std::size_t i = 0; i < g.predictions.size(); ++i) {
    EXPECT_EQ(g.predictions[i].predicted, h.predictions[i].predicted);
    EXPECT_EQ(g.predictions[i].probabilities, h.predictions[i].probabilities);
  }
  nlohmann::json gj = g.to_json();
  nlohmann::json hj = h.to_json();
  gj.erase("model");
  hj.erase("model");
  EXPECT_EQ(gj, hj);
}

TEST(Experiment, DeterministicAndPartitioned) {
  const htp::Dataset ds = htp::synth_covariate_shift(6).dataset;
  const htp::CrossvalMetrics a = htp::crossval(ds, quick_config(), htp::ModelKind::hpc);
  const htp::CrossvalMetrics b = htp::crossval(ds, quick_config(), htp::ModelKind::hpc);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.counts.sparse + a.counts.dense, a.counts.total);
  EXPECT_EQ(a.counts.sparse_correct + a.counts.dense_correct, a.counts.correct);
  EXPECT_EQ(a.counts.total, ds.size());
  for (const auto& f : a.folds) EXPECT_EQ(f.counts.sparse + f.counts.dense, f.counts.total);
  const nlohmann::json j = a.to_json();
  for (const char* key : {"overall_acc", "sparse_acc", "dense_acc", "per_fold", "config_hash"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["per_fold"].size(), 10u);
}

TEST(Experiment, FoldAssignmentBalanced) {
  const std::vector<int> f = htp::fold_assignment(103, 10, 9);
  std::vector<int> sizes(10, 0);
  for (int k : f) ++sizes[k];
  for (int s : sizes) EXPECT_TRUE(s == 10 || s == 11);
  EXPECT_EQ(f, htp::fold_assignment(103, 10, 9));
  EXPECT_NE(f, htp::fold_assignment(103, 10, 10));
  EXPECT_THROW(htp::fold_assignment(10, 1, 0), std::invalid_argument);
}

TEST(Experiment, FoldMissingClassIsSkipped) {
  htp::Dataset ds;
  ds.points.resize(6, 2);
  ds.points << 0.1, 0.1, 0.2, 0.2, 3.0, 3.0, 3.1, 3.1, 5.0, 1.0, 5.1, 1.1;
  ds.labels = {0, 0, 1, 1, 1, 1};
  ds.class_count = 3;
  htp::ExperimentConfig c = quick_config();
  c.folds = 2;
  const htp::CrossvalMetrics m = htp::crossval(ds, c, htp::ModelKind::gpc);
  for (const auto& f : m.folds) {
    EXPECT_TRUE(f.skipped);
    EXPECT_FALSE(f.warning.empty());
  }
  EXPECT_EQ(m.counts.total, 0);
  EXPECT_TRUE(m.to_json()["overall_acc"].is_null());
}

TEST(Experiment, TrainCapLimitsTrainingSet) {
  const htp::Dataset ds = htp::synth_covariate_shift(8).dataset;
  htp::ExperimentConfig c = quick_config();
  c.train_cap = 20;
  c.learn_hyperparameters = false;
  const htp::Dataset train = ds.subset({0, 1, 2, 30, 31, 32, 60, 61, 62});
  EXPECT_EQ(htp::make_model(train, c, htp::ModelKind::hpc).point_count(), 9);
  const htp::CrossvalMetrics m = htp::crossval(ds, c, htp::ModelKind::hpc);
  EXPECT_EQ(m.counts.total, ds.size());
}

TEST(Experiment, RescoreMatchesCrossvalCounts) {
  const htp::SynthResult s = htp::synth_covariate_shift(9);
  const htp::CrossvalMetrics m = htp::crossval(s.dataset, quick_config(), htp::ModelKind::gpc);
  const htp::AccuracyCounts r = htp::rescore(m.predictions, s.dataset);
  EXPECT_EQ(r.sparse_correct, m.counts.sparse_correct);
  EXPECT_EQ(r.dense_correct, m.counts.dense_correct);
  const htp::AccuracyCounts all = htp::rescore(m.predictions, htp::assign_regions(s.dataset, htp::RegionSpec{}));
  EXPECT_EQ(all.sparse, 0);
  EXPECT_EQ(all.dense_correct, m.counts.correct);
}

TEST(Experiment, GrowthCurveShape) {
  const htp::SynthResult s = htp::synth_covariate_shift(10);
  htp::ExperimentConfig c = quick_config();
  c.learn_hyperparameters = false;
  const htp::CrossvalMetrics g = htp::crossval(s.dataset, c, htp::ModelKind::gpc);
  const htp::CrossvalMetrics h = htp::crossval(s.dataset, c, htp::ModelKind::hpc);
  const auto curve = htp::region_growth_curve({s.dataset}, {s.regions}, {g}, {h});
  ASSERT_EQ(static_cast<int>(curve.size()), s.regions.max_level() + 1);
  EXPECT_DOUBLE_EQ(curve[0].mean_sparse_size, 10.0);
  for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_GE(curve[k].mean_sparse_size, curve[k - 1].mean_sparse_size);
  const std::string csv = htp::curve_csv(curve);
  EXPECT_EQ(csv.rfind("level,mean_sparse_size,gpc_sparse_acc,hpc_sparse_acc,gap\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), static_cast<long>(curve.size() + 1));
}

TEST(Experiment, NestedSelectionPicksFromGrid) {
  std::vector<htp::Dataset> groups;
  for (std::uint64_t seed : {20u, 21u}) {
    htp::SynthSpec spec = htp::SynthSpec::standard();
    for (auto& cl : spec.clusters) cl.count = 10;
    spec.isolated = 3;
    groups.push_back(htp::synth_covariate_shift(seed, spec).dataset);
  }
  htp::ExperimentConfig c = quick_config();
  c.folds = 3;
  c.max_iterations = 3;
  c.regularizer_grid = {0.01, 10.0};
  const htp::NestedResult r = htp::nested_crossval(groups, c, htp::ModelKind::hpc);
  ASSERT_EQ(r.chosen_regularizer.size(), 2u);
  for (std::size_t g = 0; g < 2; ++g) {
    EXPECT_TRUE(r.chosen_regularizer[g] == 0.01 || r.chosen_regularizer[g] == 10.0);
    EXPECT_EQ(r.metrics[g].regularizer, r.chosen_regularizer[g]);
  }
  EXPECT_THROW(htp::nested_crossval({}, c, htp::ModelKind::hpc), std::invalid_argument);
}

TEST(Experiment, SignTestExact) {
  // sum_{k=15}^{20} C(20, k) / 2^20 = 21700 / 1048576
  EXPECT_NEAR(htp::sign_test_p_value(15, 5), 21700.0 / 1048576.0, 1e-14);
  EXPECT_NEAR(htp::sign_test_p_value(3, 0), 0.125, 1e-15);
  EXPECT_DOUBLE_EQ(htp::sign_test_p_value(0, 4), 1.0);
  EXPECT_DOUBLE_EQ(htp::sign_test_p_value(0, 0), 1.0);
}

TEST(Experiment, SpearmanWithTies) {
  // ranks of y are 1, 2, 3.5, 5, 3.5: rho = 8 / sqrt(10 * 9.5)
  EXPECT_NEAR(htp::spearman({1, 2, 3, 4, 5}, {5, 6, 7, 8, 7}), 8.0 / std::sqrt(95.0), 1e-14);
  EXPECT_NEAR(htp::spearman({1, 2, 3}, {30, 20, 10}), -1.0, 1e-15);
  EXPECT_NEAR(htp::spearman({1, 2, 3, 4}, {1, 8, 27, 64}), 1.0, 1e-15);
  EXPECT_THROW(htp::spearman({1}, {1}), std::invalid_argument);
}

TEST(ExperimentConfig, JsonRoundTripAndHash) {
  htp::ExperimentConfig c;
  c.seed = 42;
  c.regularizer_grid = {0.1, 1.0};
  const htp::ExperimentConfig back = htp::ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
  htp::ExperimentConfig d = c;
  d.seed = 43;
  EXPECT_NE(d.hash(), c.hash());
}

TEST(ExperimentConfig, RejectsBadInput) {
  EXPECT_THROW(htp::ExperimentConfig::from_json({{"bogus", 1}}), std::invalid_argument);
  EXPECT_THROW(htp::ExperimentConfig::from_json({{"folds", 1}}), std::invalid_argument);
  EXPECT_THROW(htp::ExperimentConfig::from_json({{"train_cap", 0}}), std::invalid_argument);
  EXPECT_THROW(htp::ExperimentConfig::from_json({{"marginal", "cauchy"}}), std::invalid_argument);
  EXPECT_THROW(htp::ExperimentConfig::from_json(nlohmann::json::array()), std::invalid_argument);
  EXPECT_THROW(htp::parse_model_kind("svm"), std::invalid_argument);
  EXPECT_EQ(htp::parse_model_kind("gpc"), htp::ModelKind::gpc);
}

TEST(Experiment, SeparableDataInSample) {
  htp::SynthSpec spec = htp::SynthSpec::standard();
  for (auto& cl : spec.clusters) {
    cl.spread = 0.0;
    cl.count = 5;
  }
  spec.isolated = 0;
  spec.dense_label_noise = 0.0;
  const htp::Dataset ds = htp::synth_covariate_shift(1, spec).dataset;
  htp::ExperimentConfig c = quick_config();
  for (htp::ModelKind kind : {htp::ModelKind::gpc, htp::ModelKind::hpc}) {
    const htp::FitResult fitted = htp::train_model(ds, c, kind, 0.1);
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      const int p = htp::argmax(htp::predict_point(fitted, ds.points.row(i).transpose(), c).probabilities);
      EXPECT_EQ(p, ds.labels[i]) << htp::to_string(kind) << " point " << i;
    }
  }
}

}  // namespace
