#include "htp/model_io.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

namespace htp {
namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

nlohmann::json model_to_json(const StoredModel& s) {
  s.model.validate();
  nlohmann::json kernels = nlohmann::json::array();
  for (const auto& k : s.model.kernels) {
    kernels.push_back({{"family", std::string(to_string(k.family))},
                       {"sigma2", k.sigma2},
                       {"lambda", k.lambda},
                       {"noise", k.noise}});
  }
  nlohmann::json transforms = nlohmann::json::array();
  for (const auto& t : s.model.transforms) {
    transforms.push_back({{"family", std::string(to_string(t.marginal.family))}, {"b", t.marginal.b}, {"sigma2", t.sigma2}});
  }
  nlohmann::json inputs = nlohmann::json::array();
  for (Eigen::Index i = 0; i < s.model.inputs.rows(); ++i) inputs.push_back(to_vector(s.model.inputs.row(i).transpose()));
  return nlohmann::json{{"schema_version", kModelSchemaVersion},
                        {"kind", s.kind},
                        {"class_count", s.model.class_count},
                        {"kernels", kernels},
                        {"transforms", transforms},
                        {"inputs", inputs},
                        {"labels", s.model.labels},
                        {"z_hat", to_vector(s.z_hat)},
                        {"log_marginal", s.log_marginal}};
}

StoredModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("schema_version")) throw std::invalid_argument("model file lacks schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw std::invalid_argument("unsupported model schema_version " + std::to_string(version));
    }
    StoredModel s;
    s.kind = j.at("kind").get<std::string>();
    s.model.class_count = j.at("class_count").get<int>();
    for (const auto& k : j.at("kernels")) {
      KernelSpec spec;
      spec.family = parse_kernel_family(k.at("family").get<std::string>());
      spec.sigma2 = k.at("sigma2").get<double>();
      spec.lambda = k.at("lambda").get<double>();
      spec.noise = k.at("noise").get<double>();
      s.model.kernels.push_back(spec);
    }
    for (const auto& t : j.at("transforms")) {
      CopulaTransform ct;
      ct.marginal.family = parse_marginal_family(t.at("family").get<std::string>());
      ct.marginal.b = t.at("b").get<double>();
      ct.sigma2 = t.at("sigma2").get<double>();
      s.model.transforms.push_back(ct);
    }
    const auto& inputs = j.at("inputs");
    const auto n = static_cast<Eigen::Index>(inputs.size());
    const auto d = n > 0 ? static_cast<Eigen::Index>(inputs.at(0).size()) : 0;
    s.model.inputs.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = inputs.at(i).get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != d) throw std::invalid_argument("model inputs are ragged");
      for (Eigen::Index k = 0; k < d; ++k) s.model.inputs(i, k) = row[k];
    }
    s.model.labels = j.at("labels").get<std::vector<int>>();
    const auto z = j.at("z_hat").get<std::vector<double>>();
    s.z_hat = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    s.log_marginal = j.value("log_marginal", 0.0);
    s.model.validate();
    if (s.z_hat.size() != s.model.latent_size()) throw std::invalid_argument("model z_hat has the wrong length");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const StoredModel& stored) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write model '" + path + "'");
  out << model_to_json(stored).dump(2) << '\n';
}

StoredModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed model file '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

LaplaceState restore_state(const StoredModel& stored, const ModeOptions& options) {
  return find_mode(stored.model, stored.z_hat, options);
}

}  // namespace htp
