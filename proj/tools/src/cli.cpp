#include "lssat_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "lssat/checkpoint.hpp"
#include "lssat/config.hpp"
#include "lssat/data.hpp"
#include "lssat/error.hpp"
#include "lssat/netpbm.hpp"
#include "lssat/report.hpp"
#include "lssat/texture.hpp"
#include "lssat/training.hpp"

namespace lssat::cli {

namespace fs = std::filesystem;

namespace {

// Flag mirrors of ExperimentConfig; unset flags leave the config untouched.
struct Overrides {
  std::optional<std::string> triplet;
  std::optional<std::string> preset;
  std::optional<double> lambda;
  std::optional<double> mask_ratio;
  std::optional<std::size_t> patch_size;
  std::optional<std::size_t> image_size;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> epochs;
  std::optional<double> lr_max;
  std::optional<double> lr_min;
  std::optional<double> weight_decay;
  std::optional<double> momentum;
  std::optional<double> drop_path_rate;
  std::optional<int> ldp_k;
  std::optional<std::size_t> num_classes;
  std::optional<std::string> task;
  std::optional<bool> shared_encoder;
  std::optional<std::uint64_t> seed;
  std::string config_path;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--triplet", o.triplet, "configuration triplet, e.g. \"RGB,LDP,RGB\"");
  cmd->add_option("--preset", o.preset, "backbone preset");
  cmd->add_option("--lambda", o.lambda, "joint-loss balancing factor");
  cmd->add_option("--mask-ratio", o.mask_ratio);
  cmd->add_option("--patch-size", o.patch_size);
  cmd->add_option("--image-size", o.image_size);
  cmd->add_option("--batch-size", o.batch_size);
  cmd->add_option("--epochs", o.epochs);
  cmd->add_option("--lr-max", o.lr_max);
  cmd->add_option("--lr-min", o.lr_min);
  cmd->add_option("--weight-decay", o.weight_decay);
  cmd->add_option("--momentum", o.momentum);
  cmd->add_option("--drop-path-rate", o.drop_path_rate);
  cmd->add_option("--ldp-k", o.ldp_k);
  cmd->add_option("--num-classes", o.num_classes);
  cmd->add_option("--task", o.task, "multiclass | multi-attribute");
  cmd->add_option("--shared-encoder", o.shared_encoder);
  cmd->add_option("--seed", o.seed);
}

// Preset geometry first, then the config file, then flags.
ExperimentConfig effective_config(const Overrides& o) {
  std::string preset = o.preset.value_or(ExperimentConfig{}.preset);
  std::string file_text;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot read config " + o.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    file_text = ss.str();
    if (!o.preset) preset = config_from_json(file_text).preset;
  }
  ExperimentConfig c = default_config(preset);
  if (!file_text.empty()) c = config_from_json(file_text, c);
  if (o.preset) c.preset = *o.preset;
  if (o.triplet) c.triplet = parse_triplet(*o.triplet);
  if (o.lambda) c.lambda = *o.lambda;
  if (o.mask_ratio) c.mask_ratio = *o.mask_ratio;
  if (o.patch_size) c.patch_size = *o.patch_size;
  if (o.image_size) c.image_size = *o.image_size;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.lr_max) c.lr_max = *o.lr_max;
  if (o.lr_min) c.lr_min = *o.lr_min;
  if (o.weight_decay) c.weight_decay = *o.weight_decay;
  if (o.momentum) c.momentum = *o.momentum;
  if (o.drop_path_rate) c.drop_path_rate = *o.drop_path_rate;
  if (o.ldp_k) c.ldp_k = *o.ldp_k;
  if (o.num_classes) c.num_classes = *o.num_classes;
  if (o.task) {
    if (*o.task == "multiclass") c.task = TaskKind::kMulticlass;
    else if (*o.task == "multi-attribute") c.task = TaskKind::kMultiAttribute;
    else throw ConfigError("unknown task '" + *o.task + "'");
  }
  if (o.shared_encoder) c.shared_encoder = *o.shared_encoder;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

struct DataFlags {
  std::string dataset = "synth";  // synth | synth-deepfake | directory with labels.csv
  std::size_t per_class = 250;
  double train = 0.8;
  double val = 0.0;
  double test = 0.2;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  cmd->add_option("--dataset", d.dataset, "synth, synth-deepfake, or a directory holding labels.csv");
  cmd->add_option("--synth-per-class", d.per_class, "samples per class for synthetic data");
  cmd->add_option("--train-fraction", d.train);
  cmd->add_option("--val-fraction", d.val);
  cmd->add_option("--test-fraction", d.test);
}

Dataset load_data(const DataFlags& d, const ExperimentConfig& c) {
  if (d.dataset == "synth" || d.dataset == "synth-deepfake") {
    const auto kind = d.dataset == "synth" ? SynthKind::kTextures : SynthKind::kDeepfake;
    if (c.task != TaskKind::kMulticlass) throw ConfigError("synthetic data is multiclass only");
    return generate_synthetic(d.per_class, c.num_classes, c.image_size, c.seed, kind);
  }
  const fs::path root(d.dataset);
  Dataset data = load_dataset(root, root / "labels.csv", LoadOptions{c.image_size, c.image_size, c.num_classes});
  if (data.task != c.task || data.num_classes != c.num_classes) {
    throw DataError("dataset has " + std::to_string(data.num_classes) +
                    " classes/attributes and a different task than the config");
  }
  return data;
}

DatasetSplits split_data(const DataFlags& d, const ExperimentConfig& c, const Dataset& data) {
  SplitSpec s;
  s.train = d.train;
  s.val = d.val;
  s.test = d.test;
  s.seed = c.seed;
  return split(data, s);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_run_dir(const fs::path& dir, const ExperimentConfig& c, const RunReport& r) {
  fs::create_directories(dir);
  save_config(c, dir / "config.json");
  write_text(dir / "seed.txt", std::to_string(c.seed) + "\n");
  write_text(dir / "report.json", report_to_json(r));
  write_text(dir / "roc.csv", roc_to_csv(r.roc));
}

std::size_t thread_cap(std::size_t requested) {
  std::size_t n = std::max<std::size_t>(1, requested);
  if (const char* env = std::getenv("LSSAT_THREADS")) {
    char* end = nullptr;
    const unsigned long cap = std::strtoul(env, &end, 10);
    if (end != env && cap > 0) n = std::min<std::size_t>(n, cap);
  }
  return n;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_train(const Overrides& o, const DataFlags& d, const std::string& out_dir, bool dry_run) {
  const ExperimentConfig c = effective_config(o);
  if (dry_run) {
    fs::create_directories(out_dir);
    save_config(c, fs::path(out_dir) / "config.json");
    write_text(fs::path(out_dir) / "seed.txt", std::to_string(c.seed) + "\n");
    std::cout << config_to_json(c);
    return kOk;
  }
  const DatasetSplits splits = split_data(d, c, load_data(d, c));
  std::cout << "train " << c.preset << " " << c.triplet.label() << " on " << splits.train.size()
            << " samples, " << c.epochs << " epochs\n";
  const ExperimentResult r = run_experiment(c, splits, [](std::size_t e, const LossBreakdown& l) {
    std::cout << "epoch " << e << " joint " << l.joint << " cls " << l.classification << " rec "
              << l.reconstruction << "\n" << std::flush;
  });
  write_run_dir(out_dir, c, r.report);
  save_checkpoint(fs::path(out_dir) / "checkpoint.lssat", r.spec, r.params, config_to_json(c));
  std::cout << "test avg accuracy " << r.report.average_accuracy << " auc " << r.report.auc << "\n";
  return kOk;
}

int cmd_evaluate(const std::string& checkpoint, const std::optional<std::string>& preset, const DataFlags& d,
                 const std::string& out_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (preset && *preset != ck.spec.preset.name) {
    throw ConfigError("checkpoint holds preset " + ck.spec.preset.name + ", not " + *preset);
  }
  const ExperimentConfig c = config_from_json(ck.config_json, default_config(ck.spec.preset.name));
  const DatasetSplits splits = split_data(d, c, load_data(d, c));
  const auto started = std::chrono::steady_clock::now();
  const Evaluation ev = evaluate(ck.params, ck.spec, c, splits.test);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const RunReport r = make_report(c, ev, LossBreakdown{}, seconds);
  write_run_dir(out_dir, c, r);
  std::cout << "test avg accuracy " << r.average_accuracy << " auc " << r.auc << "\n";
  return kOk;
}

int cmd_sweep(Overrides o, const DataFlags& d, const std::string& presets_flag, std::size_t jobs,
              const std::string& out_dir) {
  const auto presets = split_list(presets_flag);
  if (presets.empty()) throw ConfigError("--presets is empty");
  const auto& triplets = all_triplets();
  // Validate every cell's config before spending time on any of them.
  std::vector<ExperimentConfig> configs;
  for (const auto& p : presets) {
    o.preset = p;
    for (const auto& t : triplets) {
      ExperimentConfig c = effective_config(o);
      c.triplet = t;
      c.validate();
      configs.push_back(c);
    }
  }
  const ExperimentConfig& base = configs.front();
  const DatasetSplits splits = split_data(d, base, load_data(d, base));
  for (const auto& c : configs) {
    if (c.image_size != base.image_size) throw ConfigError("sweep presets must share one image size");
  }

  SweepGrid grid(triplets, presets);
  std::mutex lock;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        RunReport r = run_experiment(configs[i], splits).report;
        std::lock_guard<std::mutex> g(lock);
        std::cout << configs[i].preset << " " << configs[i].triplet.label() << " avg "
                  << r.average_accuracy << "\n" << std::flush;
        grid.set(i % triplets.size(), i / triplets.size(), std::move(r));
      } catch (...) {
        std::lock_guard<std::mutex> g(lock);
        if (!failure) failure = std::current_exception();
        next = configs.size();
      }
    }
  };
  const std::size_t n = std::min(thread_cap(jobs), configs.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  fs::create_directories(out_dir);
  save_config(base, fs::path(out_dir) / "config.json");
  write_text(fs::path(out_dir) / "seed.txt", std::to_string(base.seed) + "\n");
  const SweepTables tables = aggregate_sweep(grid, out_dir);
  std::cout << tables.csv;
  return kOk;
}

int cmd_extract_ldp(const std::string& in, const std::string& out, int k) {
  const Raster r = read_netpbm(in);
  std::vector<double> values(3 * r.height * r.width);
  const std::size_t plane = r.height * r.width;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      values[ch * plane + i] = r.pixels[i * r.channels + (r.channels == 3 ? ch : 0)] / 255.0;
    }
  }
  const ImageTensor x(ImageDims{1, 1, 3, r.height, r.width}, std::move(values));
  const LdpImage ldp = ldp_image(to_gray(x, 0, 0), k);
  write_netpbm(Raster{ldp.height, ldp.width, 1, ldp.codes}, out);
  return kOk;
}

int cmd_gen_synth(const std::string& out, std::size_t per_class, std::size_t classes, std::size_t size,
                  std::uint64_t seed, const std::string& kind) {
  SynthKind k;
  if (kind == "textures") k = SynthKind::kTextures;
  else if (kind == "deepfake") k = SynthKind::kDeepfake;
  else throw ConfigError("unknown synthetic kind '" + kind + "'");
  save_dataset(generate_synthetic(per_class, classes, size, seed, k), out);
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Texture-aware masked autoencoding with joint classification"};
  app.require_subcommand(1);

  Overrides train_o, sweep_o;
  DataFlags train_d, eval_d, sweep_d;
  std::string train_out = "runs/train", eval_out = "runs/evaluate", sweep_out = "runs/sweep";

  auto* train = app.add_subcommand("train", "train one configuration and report on the test split");
  add_override_flags(train, train_o);
  add_data_flags(train, train_d);
  train->add_option("--out", train_out, "output directory");
  bool dry_run = false;
  train->add_flag("--dry-run", dry_run, "write and print the effective config without training");

  std::string checkpoint;
  std::optional<std::string> eval_preset;
  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  eval->add_option("--preset", eval_preset, "expected preset of the checkpoint");
  add_data_flags(eval, eval_d);
  eval->add_option("--out", eval_out, "output directory");

  std::string presets = "toy-b,toy-l,toy-h";
  std::size_t jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run every configuration triplet on every preset");
  add_override_flags(sweep, sweep_o);
  sweep->get_option("--seed")->required();
  sweep->get_option("--triplet")->description("ignored: the sweep covers all triplets");
  add_data_flags(sweep, sweep_d);
  sweep->add_option("--presets", presets, "comma-separated presets");
  sweep->add_option("--jobs", jobs, "cells run in parallel (capped by LSSAT_THREADS)");
  sweep->add_option("--out", sweep_out, "output directory");

  std::string ldp_in, ldp_out;
  int ldp_k = 3;
  auto* extract = app.add_subcommand("extract-ldp", "write the LDP code image of a PGM/PPM file");
  extract->add_option("input", ldp_in)->required()->check(CLI::ExistingFile);
  extract->add_option("output", ldp_out)->required();
  extract->add_option("--k", ldp_k, "number of top directional responses");

  std::string synth_out;
  std::size_t synth_per_class = 50, synth_classes = 2, synth_size = 32;
  std::uint64_t synth_seed = 0;
  std::string synth_kind = "textures";
  auto* gen = app.add_subcommand("gen-synth", "write a synthetic dataset (PPM files + labels.csv)");
  gen->add_option("--out", synth_out)->required();
  gen->add_option("--per-class", synth_per_class);
  gen->add_option("--classes", synth_classes);
  gen->add_option("--size", synth_size);
  gen->add_option("--seed", synth_seed);
  gen->add_option("--kind", synth_kind, "textures | deepfake");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*train) return cmd_train(train_o, train_d, train_out, dry_run);
    if (*eval) return cmd_evaluate(checkpoint, eval_preset, eval_d, eval_out);
    if (*sweep) return cmd_sweep(sweep_o, sweep_d, presets, jobs, sweep_out);
    if (*extract) return cmd_extract_ldp(ldp_in, ldp_out, ldp_k);
    if (*gen) return cmd_gen_synth(synth_out, synth_per_class, synth_classes, synth_size, synth_seed, synth_kind);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace lssat::cli
