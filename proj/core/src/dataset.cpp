#include "htp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace htp {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << what;
  throw std::invalid_argument(msg.str());
}

double parse_number(const std::string& cell, const std::string& source, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    fail(source, line, "malformed number '" + cell + "'");
  }
  if (used != cell.size() || !std::isfinite(v)) fail(source, line, "malformed number '" + cell + "'");
  return v;
}

bool in_range(double x, double lo, double hi) {
  x = normalize_angle(x);
  lo = normalize_angle(lo);
  hi = normalize_angle(hi);
  return lo <= hi ? (x >= lo && x <= hi) : (x >= lo || x <= hi);
}

double wrapped_difference(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

}  // namespace

std::string_view to_string(Region region) {
  switch (region) {
    case Region::unassigned: return "unassigned";
    case Region::sparse: return "sparse";
    case Region::dense: return "dense";
  }
  return "unassigned";
}

Region parse_region(std::string_view name) {
  if (name == "sparse") return Region::sparse;
  if (name == "dense") return Region::dense;
  if (name == "unassigned" || name.empty()) return Region::unassigned;
  throw std::invalid_argument("unknown region tag '" + std::string(name) + "'");
}

double normalize_angle(double radians) {
  double r = std::fmod(radians, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double torus_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) acc += std::pow(wrapped_difference(a(k), b(k)), 2);
  return std::sqrt(acc);
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.class_count = class_count;
  out.points.resize(static_cast<Eigen::Index>(rows.size()), points.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.points.row(static_cast<Eigen::Index>(k)) = points.row(rows[k]);
    out.labels.push_back(labels[rows[k]]);
    if (has_regions()) out.regions.push_back(regions[rows[k]]);
  }
  return out;
}

void Dataset::validate() const {
  if (points.rows() == 0) throw std::invalid_argument("dataset has no data rows");
  if (static_cast<Eigen::Index>(labels.size()) != points.rows()) throw std::invalid_argument("dataset label count");
  if (has_regions() && static_cast<Eigen::Index>(regions.size()) != points.rows()) {
    throw std::invalid_argument("dataset region count");
  }
  for (int label : labels) {
    if (label < 0 || label >= class_count) throw std::invalid_argument("dataset label out of range");
  }
  if ((points.array() < 0.0).any() || (points.array() >= kTwoPi).any()) {
    throw std::invalid_argument("dataset angles must lie in [0, 2pi)");
  }
}

Dataset parse_dataset(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  bool degrees = false;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::string lower = t;
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
      lower.erase(std::remove(lower.begin(), lower.end(), ' '), lower.end());
      if (lower == "#units:degrees") degrees = true;
      if (lower == "#units:radians") degrees = false;
      continue;
    }
    header = split(t);
    break;
  }
  if (header.empty()) throw std::invalid_argument(source + ": no data rows");
  const auto label_it = std::find(header.begin(), header.end(), "label");
  if (label_it == header.end()) fail(source, line_no, "header needs a 'label' column");
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  const auto region_it = std::find(header.begin(), header.end(), "region");
  const bool has_region = region_it != header.end();
  const auto region_col = static_cast<std::size_t>(region_it - header.begin());
  std::vector<std::size_t> angle_cols;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k != label_col && !(has_region && k == region_col)) angle_cols.push_back(k);
  }
  if (angle_cols.empty()) fail(source, line_no, "header has no angle columns");

  std::vector<std::vector<double>> rows;
  Dataset ds;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t);
    if (cells.size() != header.size()) {
      fail(source, line_no, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    std::vector<double> angles;
    for (std::size_t k : angle_cols) {
      double v = parse_number(cells[k], source, line_no);
      if (degrees) v *= std::numbers::pi / 180.0;
      angles.push_back(normalize_angle(v));
    }
    const double label = parse_number(cells[label_col], source, line_no);
    if (label != std::floor(label) || label < 0.0 || label > 1e6) {
      fail(source, line_no, "label must be a nonnegative integer");
    }
    rows.push_back(std::move(angles));
    ds.labels.push_back(static_cast<int>(label));
    if (has_region) {
      try {
        ds.regions.push_back(parse_region(cells[region_col]));
      } catch (const std::invalid_argument& e) {
        fail(source, line_no, e.what());
      }
    }
  }
  if (rows.empty()) throw std::invalid_argument(source + ": no data rows");
  ds.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(angle_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < angle_cols.size(); ++k) ds.points(i, k) = rows[i][k];
  }
  ds.class_count = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.validate();
  return ds;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset '" + path + "'");
  return parse_dataset(in, path);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  ds.validate();
  static const char* names[] = {"phi", "psi"};
  for (Eigen::Index k = 0; k < ds.dimension(); ++k) {
    out << (k < 2 ? std::string(names[k]) : "angle" + std::to_string(k)) << ',';
  }
  out << "label" << (ds.has_regions() ? ",region" : "") << '\n';
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    for (Eigen::Index k = 0; k < ds.dimension(); ++k) out << ds.points(i, k) << ',';
    out << ds.labels[i];
    if (ds.has_regions()) out << ',' << to_string(ds.regions[i]);
    out << '\n';
  }
}

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write dataset '" + path + "'");
  write_dataset(out, ds);
}

bool AngularBox::contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<Eigen::Index>(lower.size()) != x.size() || upper.size() != lower.size()) {
    throw std::invalid_argument("region box dimension does not match data");
  }
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (upper[k] - lower[k] >= kTwoPi) continue;
    if (!in_range(x(k), lower[k], upper[k])) return false;
  }
  return true;
}

int RegionSpec::max_level() const {
  int level = 0;
  for (const auto& box : boxes) level = std::max(level, box.level);
  return level;
}

Dataset assign_regions(const Dataset& ds, const RegionSpec& spec, int level) {
  Dataset out = ds;
  out.regions.assign(static_cast<std::size_t>(ds.size()), Region::dense);
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    bool sparse = false;
    bool dense = false;
    for (const auto& box : spec.boxes) {
      if (box.level > level || !box.contains(ds.points.row(i).transpose())) continue;
      if (box.tag == Region::sparse) sparse = true;
      if (box.tag == Region::dense) dense = true;
    }
    if (sparse && dense) {
      throw std::invalid_argument("point " + std::to_string(i) + " lies in both a sparse and a dense region");
    }
    if (sparse) out.regions[i] = Region::sparse;
  }
  return out;
}

nlohmann::json region_spec_to_json(const RegionSpec& spec) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto& b : spec.boxes) {
    boxes.push_back({{"lower", b.lower}, {"upper", b.upper}, {"tag", std::string(to_string(b.tag))}, {"level", b.level}});
  }
  return nlohmann::json{{"boxes", boxes}};
}

RegionSpec region_spec_from_json(const nlohmann::json& j) {
  RegionSpec spec;
  try {
    for (const auto& b : j.at("boxes")) {
      AngularBox box;
      box.lower = b.at("lower").get<std::vector<double>>();
      box.upper = b.at("upper").get<std::vector<double>>();
      box.tag = parse_region(b.value("tag", std::string("sparse")));
      box.level = b.value("level", 0);
      if (box.lower.size() != box.upper.size() || box.lower.empty()) {
        throw std::invalid_argument("region box bounds differ in length");
      }
      if (box.tag == Region::unassigned) throw std::invalid_argument("region box tag must be sparse or dense");
      spec.boxes.push_back(std::move(box));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed region spec: ") + e.what());
  }
  return spec;
}

RegionCounts count_regions(const Dataset& ds) {
  RegionCounts c;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    if (ds.region(i) == Region::sparse) ++c.sparse;
    else ++c.dense;
  }
  return c;
}

SynthSpec SynthSpec::standard() {
  SynthSpec s;
  s.clusters = {{1.2, 1.2, 0.35, 30, 0}, {3.6, 1.8, 0.35, 30, 1}, {2.4, 4.4, 0.35, 30, 2}};
  s.growth = {0.2, 0.6, 0.9, 1.2, 1.5, 1.8};
  return s;
}

void SynthSpec::validate() const {
  if (clusters.empty()) throw std::invalid_argument("synth: need at least one cluster");
  for (const auto& c : clusters) {
    if (c.count < 0 || c.spread < 0.0 || c.label < 0) throw std::invalid_argument("synth: invalid cluster");
  }
  if (isolated < 0) throw std::invalid_argument("synth: isolated count must be >= 0");
  if (!(isolation_threshold >= 0.0)) throw std::invalid_argument("synth: isolation threshold must be >= 0");
  if (!(fringe_distance >= isolation_threshold)) {
    throw std::invalid_argument("synth: fringe distance must be at least the isolation threshold");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(dense_label_noise) || !prob(isolated_label_noise)) throw std::invalid_argument("synth: noise in [0, 1]");
  for (std::size_t k = 1; k < growth.size(); ++k) {
    if (growth[k] < growth[k - 1]) throw std::invalid_argument("synth: growth half-widths must be nondecreasing");
  }
}

SynthResult synth_covariate_shift(std::uint64_t seed, const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int classes = 0;
  for (const auto& c : spec.clusters) classes = std::max(classes, c.label + 1);
  std::uniform_int_distribution<int> other(1, std::max(1, classes - 1));
  auto flip = [&](int label, double p) {
    if (classes < 2 || !(unif(rng) < p)) return label;
    return (label + other(rng)) % classes;
  };

  std::vector<Eigen::Vector2d> pts;
  std::vector<int> labels;
  std::vector<Region> regions;
  for (const auto& c : spec.clusters) {
    for (int k = 0; k < c.count; ++k) {
      pts.emplace_back(normalize_angle(c.phi + c.spread * gauss(rng)), normalize_angle(c.psi + c.spread * gauss(rng)));
      labels.push_back(flip(c.label, spec.dense_label_noise));
      regions.push_back(Region::dense);
    }
  }
  const std::size_t dense_count = pts.size();
  int placed = 0;
  for (int attempt = 0; placed < spec.isolated && attempt < spec.max_attempts; ++attempt) {
    const Eigen::Vector2d cand(kTwoPi * unif(rng), kTwoPi * unif(rng));
    double nearest_dense = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double d = torus_distance(cand, pts[k]);
      if (d < spec.isolation_threshold) {
        ok = false;
        break;
      }
      if (k < dense_count) nearest_dense = std::min(nearest_dense, d);
    }
    if (!ok || (dense_count > 0 && nearest_dense > spec.fringe_distance)) continue;
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < spec.clusters.size(); ++c) {
      const double d = torus_distance(cand, Eigen::Vector2d(spec.clusters[c].phi, spec.clusters[c].psi));
      if (d < best) {
        best = d;
        nearest = spec.clusters[c].label;
      }
    }
    pts.push_back(cand);
    labels.push_back(flip(nearest, spec.isolated_label_noise));
    regions.push_back(Region::sparse);
    ++placed;
  }
  if (placed < spec.isolated) {
    throw std::invalid_argument("synth: could not place " + std::to_string(spec.isolated) +
                                " isolated points at the requested threshold");
  }

  SynthResult out;
  out.dataset.points.resize(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) out.dataset.points.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  out.dataset.labels = std::move(labels);
  out.dataset.regions = std::move(regions);
  out.dataset.class_count = classes;
  for (std::size_t i = dense_count; i < pts.size(); ++i) {
    for (std::size_t level = 0; level < spec.growth.size(); ++level) {
      const double h = spec.growth[level];
      AngularBox box;
      box.lower = {pts[i](0) - h, pts[i](1) - h};
      box.upper = {pts[i](0) + h, pts[i](1) + h};
      box.tag = Region::sparse;
      box.level = static_cast<int>(level);
      out.regions.boxes.push_back(box);
    }
  }
  out.dataset.validate();
  return out;
}

}  // namespace htp
