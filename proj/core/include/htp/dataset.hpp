#ifndef HTP_DATASET_HPP_
#define HTP_DATASET_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "htp/kernels.hpp"

namespace htp {

enum class Region { unassigned, sparse, dense };

std::string_view to_string(Region region);
Region parse_region(std::string_view name);

/// Angular covariates in [0, 2pi)^d with integer labels 0..C-1.
struct Dataset {
  Points points;                // n x d, radians
  std::vector<int> labels;
  std::vector<Region> regions;  // empty or one per point
  int class_count = 0;          // max label + 1 unless set larger

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dimension() const { return points.cols(); }
  bool has_regions() const { return !regions.empty(); }
  Region region(Eigen::Index i) const { return has_regions() ? regions[i] : Region::unassigned; }
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
  void validate() const;
};

/// Wraps an angle into [0, 2pi).
double normalize_angle(double radians);

/// CSV with header "phi,psi,label[,region]". A leading comment line
/// "# units: degrees" switches angle parsing to degrees. Errors carry the
/// 1-based line number.
Dataset parse_dataset(std::istream& in, const std::string& source = "<input>");
Dataset load_dataset(const std::string& path);
void write_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::string& path, const Dataset& ds);

// Axis-aligned angular box. A coordinate range with lower > upper wraps
// through 2pi, e.g. [5.5, 0.5].
struct AngularBox {
  std::vector<double> lower;
  std::vector<double> upper;
  Region tag = Region::sparse;
  int level = 0;  // active at growth levels >= level

  bool contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

struct RegionSpec {
  std::vector<AngularBox> boxes;
  int max_level() const;
};

/// {"boxes": [{"lower": [..], "upper": [..], "tag": "sparse", "level": 0}, ...]}
nlohmann::json region_spec_to_json(const RegionSpec& spec);
RegionSpec region_spec_from_json(const nlohmann::json& j);

struct RegionCounts {
  Eigen::Index sparse = 0;
  Eigen::Index dense = 0;
};

/// Tags points inside active sparse boxes as sparse, everything else dense.
/// Throws std::invalid_argument when a point lies in both an active sparse
/// box and an active dense box.
Dataset assign_regions(const Dataset& ds, const RegionSpec& spec, int level = 0);
RegionCounts count_regions(const Dataset& ds);

struct SynthSpec {
  struct Cluster {
    double phi = 0.0;
    double psi = 0.0;
    double spread = 0.35;
    int count = 30;
    int label = 0;
  };
  std::vector<Cluster> clusters;
  int isolated = 10;
  double isolation_threshold = 0.6;  // nearest-neighbour torus distance of isolated points
  double fringe_distance = 1.5;      // isolated points lie within this distance of a dense point
  double dense_label_noise = 0.0;
  double isolated_label_noise = 0.2;
  std::vector<double> growth;        // half-widths of the sparse boxes per level
  int max_attempts = 20000;

  static SynthSpec standard();
  void validate() const;
};

struct SynthResult {
  Dataset dataset;
  RegionSpec regions;  // level 0 selects exactly the isolated points
};

/// Dense wrapped-normal clusters plus isolated points on their fringe. The
/// true label of an isolated point is that of the nearest cluster centre,
/// flipped with isolated_label_noise.
/// Throws std::invalid_argument when the isolated points cannot be placed.
SynthResult synth_covariate_shift(std::uint64_t seed, const SynthSpec& spec = SynthSpec::standard());

/// Euclidean distance between wrapped angle differences.
double torus_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

}  // namespace htp

#endif  // HTP_DATASET_HPP_
