#ifndef HTP_MODEL_IO_HPP_
#define HTP_MODEL_IO_HPP_

#include <string>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "htp/hpc.hpp"

namespace htp {

inline constexpr int kModelSchemaVersion = 1;

/// A trained classifier: the model and the latent mode it was fitted to.
struct StoredModel {
  std::string kind;  // "gpc" or "hpc"
  HpcModel model;
  Eigen::VectorXd z_hat;
  double log_marginal = 0.0;
};

nlohmann::json model_to_json(const StoredModel& stored);
/// Throws std::invalid_argument on a missing or unsupported schema_version
/// or on inconsistent contents.
StoredModel model_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const StoredModel& stored);
StoredModel load_model(const std::string& path);

/// Re-establishes the Laplace state from the stored mode.
LaplaceState restore_state(const StoredModel& stored, const ModeOptions& options = {});

}  // namespace htp

#endif  // HTP_MODEL_IO_HPP_
