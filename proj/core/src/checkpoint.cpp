#include "lssat/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "lssat/error.hpp"

namespace lssat {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "LSSAT1\n";
constexpr std::size_t kMagicLen = 7;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec,
                     const ParameterStore& params, const std::string& config_json) {
  const auto& p = spec.preset;
  json reconstruct = json::array();
  for (Modality m : spec.reconstruct) reconstruct.push_back(std::string(modality_name(m)));
  json manifest = {
      {"format", "LSSAT1"},
      {"preset",
       {{"name", p.name},
        {"embed_dim", p.embed_dim},
        {"depth", p.depth},
        {"heads", p.heads},
        {"mlp_ratio", p.mlp_ratio},
        {"decoder_dim", p.decoder_dim},
        {"decoder_depth", p.decoder_depth},
        {"decoder_heads", p.decoder_heads},
        {"drop_path_rate", p.drop_path_rate}}},
      {"geometry",
       {{"frames", spec.geometry.frames},
        {"channels", spec.geometry.channels},
        {"height", spec.geometry.height},
        {"width", spec.geometry.width},
        {"patch_size", spec.geometry.patch_size}}},
      {"num_classes", spec.num_classes},
      {"task", spec.task == TaskKind::kMulticlass ? "multiclass" : "multi-attribute"},
      {"reconstruct", reconstruct},
      {"shared_encoder", spec.shared_encoder},
      {"config", config_json.empty() ? json(nullptr) : json::parse(config_json)},
  };
  json entries = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : params.all()) {
    entries.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  manifest["parameters"] = entries;
  const std::string header = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, kMagicLen);
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, t] : params.all()) {
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (in.gcount() != static_cast<std::streamsize>(kMagicLen) || std::string(magic, kMagicLen) != kMagic) {
    throw DataError(path.string() + ": not an LSSAT1 checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1ull << 32)) throw DataError(path.string() + ": corrupt manifest length");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path.string() + ": truncated manifest");

  Checkpoint ck;
  try {
    const json m = json::parse(header);
    const auto& p = m.at("preset");
    ck.spec.preset = BackbonePreset{p.at("name").get<std::string>(),
                                    p.at("embed_dim").get<std::size_t>(),
                                    p.at("depth").get<std::size_t>(),
                                    p.at("heads").get<std::size_t>(),
                                    p.at("mlp_ratio").get<double>(),
                                    p.at("decoder_dim").get<std::size_t>(),
                                    p.at("decoder_depth").get<std::size_t>(),
                                    p.at("decoder_heads").get<std::size_t>(),
                                    p.at("drop_path_rate").get<double>()};
    const auto& g = m.at("geometry");
    ck.spec.geometry = ModelGeometry{g.at("frames").get<std::size_t>(), g.at("channels").get<std::size_t>(),
                                     g.at("height").get<std::size_t>(), g.at("width").get<std::size_t>(),
                                     g.at("patch_size").get<std::size_t>()};
    ck.spec.num_classes = m.at("num_classes").get<std::size_t>();
    ck.spec.task = m.at("task").get<std::string>() == "multiclass" ? TaskKind::kMulticlass : TaskKind::kMultiAttribute;
    ck.spec.reconstruct.clear();
    for (const auto& r : m.at("reconstruct")) ck.spec.reconstruct.push_back(parse_modality(r.get<std::string>()));
    ck.spec.shared_encoder = m.at("shared_encoder").get<bool>();
    if (!m.at("config").is_null()) ck.config_json = m.at("config").dump(2) + "\n";
    for (const auto& e : m.at("parameters")) {
      const auto shape = e.at("shape").get<Shape>();
      std::vector<double> values(numel(shape));
      in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
      if (!in) throw DataError(path.string() + ": truncated parameter blob");
      ck.params.set(e.at("name").get<std::string>(), Tensor(shape, std::move(values)));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace lssat
