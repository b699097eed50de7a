#include "lssat/report.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lssat/error.hpp"

namespace lssat {

using nlohmann::json;

namespace {

json report_json(const RunReport& r) {
  json per_class = json::object();
  for (const auto& [c, a] : r.per_class) per_class[std::to_string(c)] = a;
  json roc = json::array();
  for (const auto& p : r.roc) roc.push_back({p.fpr, p.tpr});
  json config = r.config_json.empty() ? json(nullptr) : json::parse(r.config_json);
  json j = {
      {"preset", r.preset},
      {"triplet", r.triplet},
      {"seed", r.seed},
      {"per_class_accuracy", per_class},
      {"average_accuracy", r.average_accuracy},
      {"overall_accuracy", r.overall_accuracy},
      {"auc", r.auc},
      {"roc", roc},
      {"final_losses",
       {{"classification", r.final_losses.classification},
        {"reconstruction", r.final_losses.reconstruction},
        {"joint", r.final_losses.joint},
        {"per_target", r.final_losses.per_target}}},
      {"wall_clock_seconds", r.wall_clock_seconds},
      {"config", config},
  };
  if (r.val_average_accuracy) j["val_average_accuracy"] = *r.val_average_accuracy;
  return j;
}

std::string fixed(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

}  // namespace

std::string report_to_json(const RunReport& r) { return report_json(r).dump(2) + "\n"; }

RunReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunReport r;
    r.preset = j.at("preset").get<std::string>();
    r.triplet = j.at("triplet").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("per_class_accuracy").items()) r.per_class[std::stoul(k)] = v.get<double>();
    r.average_accuracy = j.at("average_accuracy").get<double>();
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    r.auc = j.at("auc").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("auc").get<double>();
    for (const auto& p : j.at("roc")) r.roc.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    const auto& fl = j.at("final_losses");
    r.final_losses.classification = fl.at("classification").get<double>();
    r.final_losses.reconstruction = fl.at("reconstruction").get<double>();
    r.final_losses.joint = fl.at("joint").get<double>();
    r.final_losses.per_target = fl.at("per_target").get<std::map<std::string, double>>();
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    if (!j.at("config").is_null()) r.config_json = j.at("config").dump(2) + "\n";
    if (j.contains("val_average_accuracy")) r.val_average_accuracy = j["val_average_accuracy"].get<double>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("report: malformed JSON: ") + e.what());
  }
}

std::string roc_to_csv(const std::vector<RocPoint>& points) {
  std::ostringstream os;
  os << "fpr,tpr\n";
  for (const auto& p : points) os << fixed(p.fpr) << ',' << fixed(p.tpr) << '\n';
  return os.str();
}

SweepGrid::SweepGrid(std::vector<ConfigurationTriplet> triplets, std::vector<std::string> presets)
    : triplets_(std::move(triplets)), presets_(std::move(presets)), cells_(triplets_.size() * presets_.size()) {}

void SweepGrid::set(std::size_t triplet, std::size_t preset, RunReport report) {
  cells_.at(preset * triplets_.size() + triplet) = std::move(report);
}

const RunReport& SweepGrid::at(std::size_t triplet, std::size_t preset) const {
  const auto& cell = cells_.at(preset * triplets_.size() + triplet);
  if (!cell) throw ConfigError("sweep: cell (" + triplets_.at(triplet).label() + ", " + presets_.at(preset) + ") is empty");
  return *cell;
}

bool SweepGrid::complete() const {
  for (const auto& c : cells_) {
    if (!c) return false;
  }
  return !cells_.empty();
}

std::string triplet_slug(const ConfigurationTriplet& t) {
  std::string r;
  for (std::size_t i = 0; i < t.reconstruct.size(); ++i) {
    if (i) r += "+";
    r += modality_name(t.reconstruct[i]);
  }
  return "M-" + std::string(modality_name(t.mask)) + "_R-" + r + "_C-" + std::string(modality_name(t.classify));
}

SweepTables render_sweep(const SweepGrid& grid) {
  if (!grid.complete()) throw ConfigError("sweep: grid is incomplete");
  SweepTables out;
  std::size_t classes = 0;
  for (std::size_t p = 0; p < grid.presets().size(); ++p)
    for (std::size_t t = 0; t < grid.triplets().size(); ++t)
      for (const auto& [c, a] : grid.at(t, p).per_class) classes = std::max(classes, c + 1);

  std::ostringstream csv;
  csv << "triplet,preset";
  for (std::size_t c = 0; c < classes; ++c) csv << ",class_" << c;
  csv << ",avg,auc,best\n";
  json all = json::array();
  for (std::size_t p = 0; p < grid.presets().size(); ++p) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < grid.triplets().size(); ++t) {
      if (grid.at(t, p).average_accuracy > grid.at(best, p).average_accuracy) best = t;
    }
    out.best_triplet.push_back(best);
    for (std::size_t t = 0; t < grid.triplets().size(); ++t) {
      const RunReport& r = grid.at(t, p);
      csv << '"' << grid.triplets()[t].label() << "\"," << grid.presets()[p];
      for (std::size_t c = 0; c < classes; ++c) {
        csv << ',';
        if (auto it = r.per_class.find(c); it != r.per_class.end()) csv << fixed(it->second);
      }
      csv << ',' << fixed(r.average_accuracy) << ',' << fixed(r.auc) << ',' << (t == best ? 1 : 0) << '\n';
      json j = report_json(r);
      j["best"] = t == best;
      all.push_back(std::move(j));
      out.roc[grid.presets()[p] + "_" + triplet_slug(grid.triplets()[t])] = roc_to_csv(r.roc);
    }
  }
  out.csv = csv.str();
  out.json = all.dump(2) + "\n";
  return out;
}

SweepTables aggregate_sweep(const SweepGrid& grid, const std::filesystem::path& dir) {
  SweepTables tables = render_sweep(grid);
  std::filesystem::create_directories(dir / "roc");
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
  };
  write(dir / "sweep.csv", tables.csv);
  write(dir / "sweep.json", tables.json);
  for (const auto& [stem, text] : tables.roc) write(dir / "roc" / (stem + ".csv"), text);
  return tables;
}

}  // namespace lssat
