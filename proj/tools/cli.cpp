#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include <htp/dataset.hpp>
#include <htp/errors.hpp>
#include <htp/experiment.hpp>
#include <htp/model_io.hpp>
#include <htp/shrinkage.hpp>

namespace htp::cli {
namespace {

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

// Writes to a file, or to the given stream when path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot write '" + path + "'");
  f << text;
}

Dataset read_data(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") return parse_dataset(in, "<stdin>");
  return load_dataset(path);
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed JSON in '" + path + "': " + e.what());
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed number '" + cell + "'");
    }
    if (used != cell.size()) throw std::invalid_argument("malformed number '" + cell + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty number list");
  return out;
}

// Model and optimizer flags shared by train and crossval; each overrides the
// matching key of the --config document when given.
struct ModelFlags {
  std::string config;
  std::string kernel, marginal, grid;
  double b = 0, sigma2 = 0, lambda = 0, noise = 0, regularizer = 0;
  int max_iterations = 0, folds = 0, train_cap = 0, quadrature_nodes = 0, mode_max_iterations = 0;
  std::uint64_t seed = 0;
  bool fixed = false, learn_noise = false;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app, bool with_cv) {
    app->add_option("--config", config, "Flat JSON experiment config")->check(CLI::ExistingFile);
    opts.push_back(app->add_option("--kernel", kernel, "von_mises or squared_exponential"));
    opts.push_back(app->add_option("--marginal", marginal, "laplace, hypsec, student_t2 or gaussian"));
    opts.push_back(app->add_option("--b", b, "Initial marginal scale"));
    opts.push_back(app->add_option("--sigma2", sigma2, "Initial kernel variance"));
    opts.push_back(app->add_option("--lambda", lambda, "Initial kernel concentration"));
    opts.push_back(app->add_option("--noise", noise, "Kernel noise/jitter"));
    opts.push_back(app->add_option("--max-iterations", max_iterations, "Hyperparameter search iterations"));
    opts.push_back(app->add_option("--quadrature-nodes", quadrature_nodes, "Gauss-Hermite nodes per class"));
    opts.push_back(app->add_option("--mode-max-iterations", mode_max_iterations, "Iteration limit of the mode search"));
    opts.push_back(app->add_option("--seed", seed, "Seed"));
    opts.push_back(app->add_flag("--fixed", fixed, "Keep hyperparameters at their initial values"));
    opts.push_back(app->add_flag("--learn-noise", learn_noise, "Also learn the noise term"));
    if (with_cv) {
      opts.push_back(app->add_option("--folds", folds, "Number of folds"));
      opts.push_back(app->add_option("--train-cap", train_cap, "Maximum training points per fold"));
      opts.push_back(app->add_option("--regularizer-grid", grid, "Comma-separated l2 weights"));
    } else {
      opts.push_back(app->add_option("--regularizer", regularizer, "l2 weight on log-parameters"));
    }
  }

  bool given(const std::string& name) const {
    for (auto* o : opts) {
      if (o->get_name() == name && o->count() > 0) return true;
    }
    return false;
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(read_json(config));
    if (given("--kernel")) c.kernel.family = parse_kernel_family(kernel);
    if (given("--marginal")) c.marginal.family = parse_marginal_family(marginal);
    if (given("--b")) c.marginal.b = b;
    if (given("--sigma2")) c.kernel.sigma2 = sigma2;
    if (given("--lambda")) c.kernel.lambda = lambda;
    if (given("--noise")) c.kernel.noise = noise;
    if (given("--max-iterations")) c.max_iterations = max_iterations;
    if (given("--quadrature-nodes")) c.quadrature_nodes = quadrature_nodes;
    if (given("--mode-max-iterations")) c.mode_max_iterations = mode_max_iterations;
    if (given("--seed")) c.seed = seed;
    if (given("--fixed")) c.learn_hyperparameters = false;
    if (given("--learn-noise")) c.learn_noise = true;
    if (given("--folds")) c.folds = folds;
    if (given("--train-cap")) c.train_cap = train_cap;
    if (given("--regularizer-grid")) c.regularizer_grid = parse_list(grid);
    if (given("--regularizer")) c.regularizer_grid = {regularizer};
    c.validate();
    return c;
  }
};

int cmd_synth(Streams io, std::uint64_t seed, int isolated, double noise, double dense_noise, double threshold,
              const std::string& out, const std::string& regions_out) {
  SynthSpec spec = SynthSpec::standard();
  spec.isolated = isolated;
  spec.isolated_label_noise = noise;
  spec.dense_label_noise = dense_noise;
  spec.isolation_threshold = threshold;
  spec.fringe_distance = std::max(spec.fringe_distance, threshold);
  const SynthResult r = synth_covariate_shift(seed, spec);
  std::ostringstream csv;
  write_dataset(csv, r.dataset);
  emit(out, csv.str(), io.out);
  if (!regions_out.empty()) emit(regions_out, region_spec_to_json(r.regions).dump(2) + "\n", io.out);
  return kOk;
}

int cmd_train(Streams io, const ModelFlags& flags, const std::string& kind_name, const std::string& data,
              const std::string& out) {
  const ExperimentConfig config = flags.resolve();
  const ModelKind kind = parse_model_kind(kind_name);
  const Dataset ds = read_data(data, io.in);
  const FitResult fitted = train_model(ds, config, kind, config.regularizer_grid.front());
  StoredModel stored{std::string(to_string(kind)), fitted.model, fitted.state.z_hat, fitted.state.log_marginal};
  emit(out, model_to_json(stored).dump(2) + "\n", io.out);
  io.err << "trained " << to_string(kind) << " on " << ds.size() << " points, log evidence "
         << fitted.state.log_marginal << " (" << fitted.trace.message << ")\n";
  return kOk;
}

int cmd_predict(Streams io, const std::string& model_path, const std::string& data, const std::string& method,
                int samples, std::uint64_t seed, int nodes, const std::string& out) {
  const StoredModel stored = load_model(model_path);
  const LaplaceState state = restore_state(stored);
  const Dataset ds = read_data(data, io.in);
  if (ds.dimension() != stored.model.inputs.cols()) throw std::invalid_argument("predict: data dimension mismatch");
  PredictOptions o;
  if (method == "mc") o.method = PredictiveMethod::monte_carlo;
  else if (method == "quadrature") o.method = PredictiveMethod::quadrature;
  else throw std::invalid_argument("predict: --method must be mc or quadrature");
  o.samples = samples;
  o.seed = seed;
  o.quadrature_nodes = nodes;
  const int classes = stored.model.class_count;
  std::ostringstream csv;
  csv << "index,label,predicted";
  for (int c = 0; c < classes; ++c) csv << ",p" << c;
  for (int c = 0; c < classes; ++c) csv << ",se" << c;
  csv << '\n' << std::setprecision(10);
  int correct = 0;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    const ClassPrediction p = laplace_predict(stored.model, state, ds.points.row(i).transpose(), o);
    const int predicted = argmax(p.probabilities);
    correct += predicted == ds.labels[i];
    csv << i << ',' << ds.labels[i] << ',' << predicted;
    for (int c = 0; c < classes; ++c) csv << ',' << p.probabilities(c);
    for (int c = 0; c < classes; ++c) csv << ',' << p.standard_error(c);
    csv << '\n';
  }
  emit(out, csv.str(), io.out);
  io.err << "accuracy " << static_cast<double>(correct) / static_cast<double>(ds.size()) << " on " << ds.size()
         << " points\n";
  return kOk;
}

nlohmann::json metrics_json(const NestedResult& nested, const std::vector<std::string>& names, bool nested_selection) {
  if (nested.metrics.size() == 1) {
    nlohmann::json j = nested.metrics.front().to_json();
    j["selection"] = nested_selection ? "nested" : "in_sample";
    return j;
  }
  AccuracyCounts pooled;
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t g = 0; g < nested.metrics.size(); ++g) {
    const auto& c = nested.metrics[g].counts;
    pooled.total += c.total;
    pooled.correct += c.correct;
    pooled.sparse += c.sparse;
    pooled.sparse_correct += c.sparse_correct;
    pooled.dense += c.dense;
    pooled.dense_correct += c.dense_correct;
    nlohmann::json j = nested.metrics[g].to_json();
    j["dataset"] = names[g];
    j["chosen_regularizer"] = nested.chosen_regularizer[g];
    groups.push_back(j);
  }
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json per_fold = nlohmann::json::array();
  for (const auto& g : groups) {
    for (const auto& f : g["per_fold"]) {
      nlohmann::json entry = f;
      entry["dataset"] = g["dataset"];
      per_fold.push_back(entry);
    }
  }
  return nlohmann::json{{"model", nested.metrics.front().to_json()["model"]},
                        {"overall_acc", num(pooled.overall())},
                        {"sparse_acc", num(pooled.sparse_accuracy())},
                        {"dense_acc", num(pooled.dense_accuracy())},
                        {"per_fold", per_fold},
                        {"groups", groups},
                        {"selection", "nested"},
                        {"config_hash", nested.metrics.front().config_hash}};
}

int cmd_crossval(Streams io, const ModelFlags& flags, const std::string& kind_name, const std::vector<std::string>& data,
                 const std::string& regions, int level, const std::string& metrics_out, const std::string& curve_out) {
  const ExperimentConfig config = flags.resolve();
  std::vector<Dataset> sets;
  std::vector<std::string> names;
  if (data.empty()) {
    sets.push_back(read_data("", io.in));
    names.push_back("<stdin>");
  }
  for (const auto& path : data) {
    sets.push_back(read_data(path, io.in));
    names.push_back(path);
  }
  std::optional<RegionSpec> spec;
  if (!regions.empty()) {
    spec = region_spec_from_json(read_json(regions));
    for (auto& s : sets) s = assign_regions(s, *spec, level);
  }
  const bool nested_selection = sets.size() > 1;
  if (!nested_selection && config.regularizer_grid.size() > 1) {
    io.err << "warning: one dataset; the regularizer is selected in-sample\n";
  }

  std::vector<ModelKind> kinds;
  if (kind_name == "both") kinds = {ModelKind::gpc, ModelKind::hpc};
  else kinds = {parse_model_kind(kind_name)};
  if (!curve_out.empty() && (kinds.size() != 2 || !spec)) {
    throw std::invalid_argument("crossval: --curve-out needs --model both and --regions");
  }

  nlohmann::json doc;
  std::vector<NestedResult> results;
  for (ModelKind kind : kinds) {
    results.push_back(nested_crossval(sets, config, kind));
    nlohmann::json j = metrics_json(results.back(), names, nested_selection);
    if (kinds.size() == 1) doc = j;
    else doc[std::string(to_string(kind))] = j;
    io.err << to_string(kind) << ": overall " << j["overall_acc"] << ", sparse " << j["sparse_acc"] << ", dense "
           << j["dense_acc"] << "\n";
  }
  emit(metrics_out, doc.dump(2) + "\n", io.out);

  if (!curve_out.empty()) {
    const std::vector<RegionSpec> specs(sets.size(), *spec);
    const auto curve = region_growth_curve(sets, specs, results[0].metrics, results[1].metrics);
    emit(curve_out, curve_csv(curve), io.out);
  }
  return kOk;
}

int cmd_shrinkage(Streams io, int n, double epsilon, const std::string& family, double b, double sigma2,
                  const std::string& y_text, bool table) {
  const IdealizedGeometry geometry{n, epsilon};
  geometry.validate();
  const CopulaTransform t{{parse_marginal_family(family), b}, sigma2};
  Eigen::VectorXd y;
  if (y_text.empty()) {
    y = Eigen::VectorXd::Ones(n);
    y(n - 1) = n - 1;
  } else {
    const auto v = parse_list(y_text);
    y = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  const ShrinkageReport r = verify_shrinkage_inequality(geometry, y, t);
  const nlohmann::json j = to_json(r, geometry, t);
  if (!table) {
    io.out << j.dump(2) << '\n';
    return kOk;
  }
  io.out << std::setprecision(8);
  io.out << "geometry        n=" << n << " epsilon=" << epsilon << "\n"
         << "transform       " << family << " b=" << b << " sigma2=" << sigma2 << "\n"
         << "y               " << y.transpose() << "\n"
         << "y'              " << r.y_prime.transpose() << "\n"
         << "d*              " << r.d_star << "\n"
         << "|y'_s|          " << r.lhs << "\n"
         << "|y'_d*/y_d* y_s| " << r.rhs << "\n"
         << "ratio           " << r.ratio << "\n"
         << "strict          " << (r.strict ? "yes" : "no") << "\n"
         << "shape check     slope>1 " << (r.shape.slope_above_one ? "yes" : "no") << ", convex "
         << (r.shape.convex ? "yes" : "no") << " (min slope " << r.shape.min_slope << ")\n"
         << "GPR mean d/s    " << r.gpr.mean_dense << " / " << r.gpr.mean_sparse << "\n"
         << "GPR var d/s     " << r.gpr.variance_dense << " / " << r.gpr.variance_sparse << "\n"
         << "HPR mean d/s    " << r.hpr.mean_dense << " / " << r.hpr.mean_sparse << " (z-space)\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Streams io{in, out, err};
  CLI::App app{"Heavy-tailed process regression and classification", "htp"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic covariate-shift dataset as CSV");
  std::uint64_t synth_seed = 0;
  int isolated = 10;
  double iso_noise = 0.2, dense_noise = 0.0, threshold = 0.6;
  std::string synth_out, regions_out;
  synth->add_option("--seed", synth_seed, "Seed");
  synth->add_option("--isolated", isolated, "Number of isolated points");
  synth->add_option("--label-noise", iso_noise, "Label flip rate of isolated points");
  synth->add_option("--dense-noise", dense_noise, "Label flip rate of cluster points");
  synth->add_option("--threshold", threshold, "Minimum distance of isolated points to any other point");
  synth->add_option("--out", synth_out, "Output CSV (default stdout)");
  synth->add_option("--regions-out", regions_out, "Write the sparse-region growth spec as JSON");

  // train
  auto* train = app.add_subcommand("train", "Fit a classifier and write the model JSON");
  ModelFlags train_flags;
  train_flags.add(train, false);
  std::string train_kind = "hpc", train_data, train_out;
  train->add_option("--model", train_kind, "gpc or hpc");
  train->add_option("--data", train_data, "Dataset CSV (default stdin)");
  train->add_option("--out", train_out, "Model JSON (default stdout)");

  // predict
  auto* predict = app.add_subcommand("predict", "Predict class probabilities with a stored model");
  std::string model_path, predict_data, predict_out, method = "mc";
  int samples = 10000, nodes = 20;
  std::uint64_t predict_seed = 0;
  predict->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--data", predict_data, "Dataset CSV (default stdin)");
  predict->add_option("--method", method, "mc or quadrature");
  predict->add_option("--samples", samples, "Monte-Carlo samples");
  predict->add_option("--seed", predict_seed, "Monte-Carlo seed");
  predict->add_option("--quadrature-nodes", nodes, "Gauss-Hermite nodes per class");
  predict->add_option("--out", predict_out, "Output CSV (default stdout)");

  // crossval
  auto* cv = app.add_subcommand("crossval", "Cross-validate gpc, hpc or both");
  ModelFlags cv_flags;
  cv_flags.add(cv, true);
  std::string cv_kind = "hpc", regions, metrics_out, curve_out;
  std::vector<std::string> cv_data;
  int level = 0;
  cv->add_option("--model", cv_kind, "gpc, hpc or both");
  cv->add_option("--data", cv_data, "Dataset CSV; repeat for nested regularizer selection");
  cv->add_option("--regions", regions, "Region spec JSON")->check(CLI::ExistingFile);
  cv->add_option("--level", level, "Growth level of the region spec");
  cv->add_option("--metrics-out", metrics_out, "Metrics JSON (default stdout)");
  cv->add_option("--curve-out", curve_out, "Sparse accuracy vs region size CSV");

  // shrinkage-demo
  auto* demo = app.add_subcommand("shrinkage-demo", "Check the selective-shrinkage inequality on the idealized geometry");
  int n = 3;
  double epsilon = 1.0, b = 3.0, sigma2 = 1.0;
  std::string family = "laplace", y_text;
  bool table = false;
  demo->add_option("--n", n, "Number of locations (> 2)");
  demo->add_option("--epsilon", epsilon, "Noise variance");
  demo->add_option("--family", family, "Marginal family");
  demo->add_option("--b", b, "Marginal scale");
  demo->add_option("--sigma2", sigma2, "Copula variance");
  demo->add_option("--y", y_text, "Comma-separated measurements (default 1,...,1,n-1)");
  demo->add_flag("--table", table, "Human-readable table instead of JSON");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) {
      return cmd_synth(io, synth_seed, isolated, iso_noise, dense_noise, threshold, synth_out, regions_out);
    }
    if (train->parsed()) return cmd_train(io, train_flags, train_kind, train_data, train_out);
    if (predict->parsed()) {
      return cmd_predict(io, model_path, predict_data, method, samples, predict_seed, nodes, predict_out);
    }
    if (cv->parsed()) return cmd_crossval(io, cv_flags, cv_kind, cv_data, regions, level, metrics_out, curve_out);
    if (demo->parsed()) return cmd_shrinkage(io, n, epsilon, family, b, sigma2, y_text, table);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  err << app.help();
  return kUsage;
}

}  // namespace htp::cli
