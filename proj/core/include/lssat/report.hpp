#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lssat/config.hpp"
#include "lssat/metrics.hpp"

namespace lssat {

struct LossBreakdown {
  double classification = 0.0;
  double reconstruction = 0.0;
  double joint = 0.0;
  std::map<std::string, double> per_target;  // keyed by modality name
};

// Outcome of one (backbone, configuration) run.
struct RunReport {
  std::string config_json;  // effective configuration echo
  std::string preset;
  std::string triplet;
  std::uint64_t seed = 0;
  std::map<std::size_t, double> per_class;
  double average_accuracy = 0.0;
  double overall_accuracy = 0.0;
  std::vector<RocPoint> roc;
  double auc = 0.0;
  LossBreakdown final_losses;
  double wall_clock_seconds = 0.0;
  std::optional<double> val_average_accuracy;
};

std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);
// "fpr,tpr" header then one row per point.
std::string roc_to_csv(const std::vector<RocPoint>& points);

// Rows are configuration triplets, columns are backbone presets.
class SweepGrid {
 public:
  SweepGrid(std::vector<ConfigurationTriplet> triplets, std::vector<std::string> presets);

  void set(std::size_t triplet, std::size_t preset, RunReport report);
  const RunReport& at(std::size_t triplet, std::size_t preset) const;
  bool complete() const;
  const std::vector<ConfigurationTriplet>& triplets() const { return triplets_; }
  const std::vector<std::string>& presets() const { return presets_; }

 private:
  std::vector<ConfigurationTriplet> triplets_;
  std::vector<std::string> presets_;
  std::vector<std::optional<RunReport>> cells_;  // preset-major
};

struct SweepTables {
  std::string csv;                            // one row per (preset, triplet)
  std::string json;                           // every report in full
  std::map<std::string, std::string> roc;     // file stem -> fpr,tpr CSV
  std::vector<std::size_t> best_triplet;      // per preset: row with the highest Avg
};

// Throws ConfigError on an incomplete grid.
SweepTables render_sweep(const SweepGrid& grid);

// Writes sweep.csv, sweep.json and roc/<preset>_<triplet>.csv under `dir`.
SweepTables aggregate_sweep(const SweepGrid& grid, const std::filesystem::path& dir);

// File-name-safe form of a triplet label, e.g. "M-LDP_R-RGB_C-RGB".
std::string triplet_slug(const ConfigurationTriplet& t);

}  // namespace lssat
