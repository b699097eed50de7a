#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lssat/model.hpp"

namespace lssat {

// Which modality is masked, which are reconstructed, which is classified.
struct ConfigurationTriplet {
  Modality mask = Modality::kRgb;
  std::vector<Modality> reconstruct = {Modality::kRgb};  // canonical order: RGB before LDP
  Modality classify = Modality::kRgb;

  // Throws ConfigError unless this is one of all_triplets().
  void validate() const;
  // e.g. "(LDP,RGB,RGB)" or "(RGB,{RGB,LDP},RGB)"
  std::string label() const;
  bool operator==(const ConfigurationTriplet&) const = default;
};

// The four masking/reconstruction/classification variants followed by the
// RGB-only baseline, in that order.
const std::vector<ConfigurationTriplet>& all_triplets();
ConfigurationTriplet parse_triplet(const std::string& label);

struct ExperimentConfig {
  ConfigurationTriplet triplet{Modality::kLdp, {Modality::kRgb}, Modality::kRgb};
  std::string preset = "vit-b";
  double lambda = 0.1;
  double mask_ratio = 0.75;
  std::size_t patch_size = 16;
  std::size_t image_size = 224;
  std::size_t batch_size = 8;
  std::size_t epochs = 75;
  double lr_max = 5e-5;
  double lr_min = 1e-6;
  double weight_decay = 0.05;
  double momentum = 0.9;
  double drop_path_rate = 0.01;
  int ldp_k = 3;
  std::size_t num_classes = 2;
  TaskKind task = TaskKind::kMulticlass;
  bool shared_encoder = true;
  std::uint64_t seed = 0;

  void validate() const;
  ModelSpec model_spec() const;
};

// Training defaults with the image geometry suited to the preset:
// 224 px / 16 px patches for vit-*, 32 px / 8 px patches for toy-*.
ExperimentConfig default_config(const std::string& preset);

// JSON object mirroring ExperimentConfig field for field. Unknown keys and
// wrongly typed values are ConfigErrors; missing keys keep their defaults.
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

}  // namespace lssat
