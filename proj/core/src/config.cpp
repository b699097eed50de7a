#include "lssat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lssat/error.hpp"

namespace lssat {

using nlohmann::json;

namespace {

std::vector<Modality> canonical(std::vector<Modality> mods) {
  std::vector<Modality> out;
  for (Modality m : {Modality::kRgb, Modality::kLdp}) {
    for (Modality x : mods) {
      if (x == m) {
        out.push_back(m);
        break;
      }
    }
  }
  return out;
}

}  // namespace

const std::vector<ConfigurationTriplet>& all_triplets() {
  using M = Modality;
  static const std::vector<ConfigurationTriplet> triplets{
      {M::kLdp, {M::kRgb}, M::kRgb},
      {M::kLdp, {M::kRgb}, M::kLdp},
      {M::kRgb, {M::kLdp}, M::kRgb},
      {M::kRgb, {M::kRgb, M::kLdp}, M::kRgb},
      {M::kRgb, {M::kRgb}, M::kRgb},
  };
  return triplets;
}

void ConfigurationTriplet::validate() const {
  ConfigurationTriplet c = *this;
  c.reconstruct = canonical(reconstruct);
  if (c.reconstruct.size() != reconstruct.size()) {
    throw ConfigError("triplet " + label() + ": duplicate reconstruction modality");
  }
  for (const auto& t : all_triplets()) {
    if (t == c) return;
  }
  throw ConfigError("triplet " + label() + " is not one of the five supported configurations");
}

std::string ConfigurationTriplet::label() const {
  std::string r;
  if (reconstruct.size() == 1) {
    r = std::string(modality_name(reconstruct[0]));
  } else {
    r = "{";
    for (std::size_t i = 0; i < reconstruct.size(); ++i) {
      if (i) r += ",";
      r += modality_name(reconstruct[i]);
    }
    r += "}";
  }
  return "(" + std::string(modality_name(mask)) + "," + r + "," + std::string(modality_name(classify)) + ")";
}

ConfigurationTriplet parse_triplet(const std::string& label) {
  for (const auto& t : all_triplets()) {
    if (t.label() == label) return t;
  }
  // Accept "LDP,RGB,RGB" and "RGB,RGB+LDP,RGB" shorthands.
  std::string s = label;
  if (!s.empty() && s.front() == '(') s = s.substr(1);
  if (!s.empty() && s.back() == ')') s.pop_back();
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) parts.push_back(part);
  if (parts.size() == 3) {
    ConfigurationTriplet t;
    t.mask = parse_modality(parts[0]);
    t.classify = parse_modality(parts[2]);
    t.reconstruct.clear();
    std::stringstream rs(parts[1]);
    for (std::string m; std::getline(rs, m, '+');) t.reconstruct.push_back(parse_modality(m));
    t.reconstruct = canonical(t.reconstruct);
    t.validate();
    return t;
  }
  throw ConfigError("cannot parse triplet '" + label + "'");
}

void ExperimentConfig::validate() const {
  triplet.validate();
  backbone_preset(preset).validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must be in [0,1]");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) throw ConfigError("mask_ratio must be in [0,1)");
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
    throw ConfigError("image_size " + std::to_string(image_size) + " must be a positive multiple of patch_size " +
                      std::to_string(patch_size));
  }
  if (image_size < 3) throw ConfigError("image_size must be at least 3 for LDP extraction");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr_max >= lr_min && lr_min >= 0.0)) throw ConfigError("need lr_max >= lr_min >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
  if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0)) throw ConfigError("drop_path_rate must be in [0,1)");
  if (ldp_k < 1 || ldp_k > 8) throw ConfigError("ldp_k must be in [1,8]");
  if (num_classes == 0) throw ConfigError("num_classes must be positive");
}

ModelSpec ExperimentConfig::model_spec() const {
  ModelSpec spec;
  spec.preset = backbone_preset(preset);
  spec.preset.drop_path_rate = drop_path_rate;
  spec.geometry = ModelGeometry{1, 3, image_size, image_size, patch_size};
  spec.num_classes = num_classes;
  spec.task = task;
  spec.reconstruct = triplet.reconstruct;
  spec.shared_encoder = shared_encoder;
  return spec;
}

ExperimentConfig default_config(const std::string& preset) {
  ExperimentConfig c;
  c.preset = preset;
  if (preset.rfind("toy-", 0) == 0) {
    c.image_size = 32;
    c.patch_size = 8;
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json reconstruct = json::array();
  for (Modality m : c.triplet.reconstruct) reconstruct.push_back(std::string(modality_name(m)));
  json j = {
      {"mask_modality", std::string(modality_name(c.triplet.mask))},
      {"reconstruct_modalities", reconstruct},
      {"classify_modality", std::string(modality_name(c.triplet.classify))},
      {"preset", c.preset},
      {"lambda", c.lambda},
      {"mask_ratio", c.mask_ratio},
      {"patch_size", c.patch_size},
      {"image_size", c.image_size},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"lr_max", c.lr_max},
      {"lr_min", c.lr_min},
      {"weight_decay", c.weight_decay},
      {"momentum", c.momentum},
      {"drop_path_rate", c.drop_path_rate},
      {"ldp_k", c.ldp_k},
      {"num_classes", c.num_classes},
      {"task", c.task == TaskKind::kMulticlass ? "multiclass" : "multi-attribute"},
      {"shared_encoder", c.shared_encoder},
      {"seed", c.seed},
  };
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "mask_modality") c.triplet.mask = parse_modality(v.get<std::string>());
      else if (key == "classify_modality") c.triplet.classify = parse_modality(v.get<std::string>());
      else if (key == "reconstruct_modalities") {
        if (!v.is_array()) throw ConfigError("config: reconstruct_modalities must be an array");
        std::vector<Modality> mods;
        for (const auto& m : v) mods.push_back(parse_modality(m.get<std::string>()));
        c.triplet.reconstruct = canonical(mods);
        if (c.triplet.reconstruct.size() != mods.size()) throw ConfigError("config: duplicate reconstruction modality");
      }
      else if (key == "preset") c.preset = v.get<std::string>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "mask_ratio") c.mask_ratio = v.get<double>();
      else if (key == "patch_size") c.patch_size = v.get<std::size_t>();
      else if (key == "image_size") c.image_size = v.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "lr_max") c.lr_max = v.get<double>();
      else if (key == "lr_min") c.lr_min = v.get<double>();
      else if (key == "weight_decay") c.weight_decay = v.get<double>();
      else if (key == "momentum") c.momentum = v.get<double>();
      else if (key == "drop_path_rate") c.drop_path_rate = v.get<double>();
      else if (key == "ldp_k") c.ldp_k = v.get<int>();
      else if (key == "num_classes") c.num_classes = v.get<std::size_t>();
      else if (key == "task") {
        const auto t = v.get<std::string>();
        if (t == "multiclass") c.task = TaskKind::kMulticlass;
        else if (t == "multi-attribute") c.task = TaskKind::kMultiAttribute;
        else throw ConfigError("config: unknown task '" + t + "'");
      }
      else if (key == "shared_encoder") c.shared_encoder = v.get<bool>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("config: unknown key '" + key + "'");
    }
  } catch (const json::type_error& e) {
    throw ConfigError(std::string("config: wrong value type: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), std::move(base));
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write " + path.string());
  out << config_to_json(config);
}

}  // namespace lssat
