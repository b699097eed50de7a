#include "lssat/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "lssat/error.hpp"
#include "lssat/rng.hpp"
#include "lssat/texture.hpp"

namespace lssat {

TrainState init_train_state(const ExperimentConfig& config, std::size_t steps_per_epoch) {
  config.validate();
  TrainState s;
  s.spec = config.model_spec();
  s.params = init_parameters(s.spec, config.seed);
  s.total_steps = std::max<std::size_t>(1, config.epochs * steps_per_epoch);
  return s;
}

MaskPlan step_mask(const ExperimentConfig& config, std::size_t batch, StepKey key) {
  const ModelSpec spec = config.model_spec();
  const std::uint64_t seed = derive_seed(config.seed, {stream_id(RngStream::kMask), key.epoch, key.batch});
  return sample_mask(batch, spec.geometry.tokens(), config.mask_ratio, seed);
}

JointLossGraph build_joint_loss(const BoundParameters& params, const ModelSpec& spec,
                                const ExperimentConfig& config, const ImageTensor& rgb,
                                const ImageTensor& ldp, std::span<const std::size_t> labels,
                                const MaskPlan& plan, const ForwardMode& cls_mode,
                                const ForwardMode& rec_mode) {
  if (rgb.dims() != ldp.dims()) throw ShapeError("joint loss: RGB and LDP tensors differ in shape");
  if (spec.reconstruct != config.triplet.reconstruct) {
    throw ConfigError("joint loss: model heads do not match the triplet's reconstruction targets");
  }
  auto input = [&](Modality m) -> const ImageTensor& { return m == Modality::kRgb ? rgb : ldp; };
  Graph& g = params.graph();
  const std::size_t p = spec.geometry.patch_size;

  JointLossGraph out;
  Var cls_tokens = g.constant(patchify(input(config.triplet.classify), p).tokens);
  out.cls_latent = encode(params, spec, cls_tokens, cls_mode, "encoder");
  Var logits = classify(params, spec, out.cls_latent);
  out.classification = spec.task == TaskKind::kMulticlass ? classification_loss(logits, labels)
                                                          : attribute_loss(logits, labels);

  const PatchSet source = patchify(input(config.triplet.mask), p);
  Var visible = g.constant(gather_visible(source, plan).tokens);
  out.rec_latent = encode_visible(params, spec, visible, plan, rec_mode,
                                  spec.shared_encoder ? "encoder" : "encoder_masked");
  for (Modality target : config.triplet.reconstruct) {
    Var recon = decode_reconstruct(params, spec, out.rec_latent, plan, target, rec_mode);
    out.per_target.push_back(reconstruction_loss(input(target), recon, plan, p));
  }
  out.reconstruction = multi_target_loss(out.per_target);
  out.joint = joint_loss(out.classification, out.reconstruction, config.lambda);
  return out;
}

LossBreakdown train_step(const ImageTensor& rgb, std::span<const std::size_t> labels,
                         const ExperimentConfig& config, TrainState& state, StepKey key) {
  const ImageTensor ldp = ldp_tensor(rgb, config.ldp_k);
  const MaskPlan plan = step_mask(config, rgb.dims().batch, key);
  const std::uint64_t dp = derive_seed(config.seed, {stream_id(RngStream::kDropPath), key.epoch, key.batch});
  Graph g;
  BoundParameters bound(g, state.params, true);
  const JointLossGraph loss = build_joint_loss(bound, state.spec, config, rgb, ldp, labels, plan,
                                               ForwardMode{true, derive_seed(dp, {0})},
                                               ForwardMode{true, derive_seed(dp, {1})});
  LossBreakdown out;
  out.classification = loss.classification.value().item();
  out.reconstruction = loss.reconstruction.value().item();
  out.joint = loss.joint.value().item();
  for (std::size_t i = 0; i < loss.per_target.size(); ++i) {
    out.per_target[std::string(modality_name(config.triplet.reconstruct[i]))] = loss.per_target[i].value().item();
  }
  if (!std::isfinite(out.joint)) {
    throw NumericError("train step " + std::to_string(state.step) + ": non-finite joint loss");
  }

  const GradientMap grads = backward(g, loss.joint);
  std::map<std::string, Tensor> named;
  for (const auto& [name, var] : bound.vars()) {
    if (auto it = grads.find(var.id); it != grads.end()) named.emplace(name, it->second);
  }
  const double lr = cosine_lr(std::min(state.step, state.total_steps), state.total_steps, config.lr_max, config.lr_min);
  sgd_step(state.params, named, lr, SgdOptions{config.weight_decay, config.momentum}, state.momentum);
  ++state.step;
  return out;
}

Evaluation evaluate(const ParameterStore& params, const ModelSpec& spec, const ExperimentConfig& config,
                    const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  if (data.height != spec.geometry.height || data.width != spec.geometry.width) {
    throw DataError("evaluate: dataset images are " + std::to_string(data.height) + "x" +
                    std::to_string(data.width) + ", model expects " + std::to_string(spec.geometry.height) +
                    "x" + std::to_string(spec.geometry.width));
  }
  Evaluation ev;
  const bool attributes = spec.task == TaskKind::kMultiAttribute;
  const std::size_t k = spec.num_classes;
  const auto all = data.all_indices();
  for (std::size_t start = 0; start < all.size(); start += batch_size) {
    const std::span<const std::size_t> idx(all.data() + start, std::min(batch_size, all.size() - start));
    ImageTensor x = data.batch(idx);
    if (config.triplet.classify == Modality::kLdp) x = ldp_tensor(x, config.ldp_k);
    const Tensor logits = predict_logits(params, spec, x);
    const auto labels = data.labels(idx);
    ev.labels.insert(ev.labels.end(), labels.begin(), labels.end());
    const std::size_t width = spec.logit_count();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const double* row = logits.data().data() + b * width;
      std::vector<double> prob;
      if (attributes) {
        for (std::size_t a = 0; a < k; ++a) {
          const double p1 = 1.0 / (1.0 + std::exp(row[2 * a] - row[2 * a + 1]));
          prob.push_back(p1);
          ev.predictions.push_back(row[2 * a + 1] > row[2 * a] ? 1 : 0);
        }
      } else {
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += std::exp(row[c] - mx);
        for (std::size_t c = 0; c < k; ++c) prob.push_back(std::exp(row[c] - mx) / z);
        ev.predictions.push_back(static_cast<std::size_t>(std::max_element(row, row + k) - row));
      }
      ev.probabilities.push_back(std::move(prob));
    }
  }

  std::vector<std::vector<RocPoint>> curves;
  if (attributes) {
    const std::size_t n = data.size();
    double sum = 0.0;
    std::size_t correct_all = 0;
    for (std::size_t a = 0; a < k; ++a) {
      std::size_t correct = 0;
      std::vector<double> scores;
      std::vector<std::size_t> bits;
      for (std::size_t i = 0; i < n; ++i) {
        correct += ev.predictions[i * k + a] == ev.labels[i * k + a];
        scores.push_back(ev.probabilities[i][a]);
        bits.push_back(ev.labels[i * k + a]);
      }
      ev.accuracy.per_class[a] = static_cast<double>(correct) / static_cast<double>(n);
      ev.accuracy.counts[a] = n;
      sum += ev.accuracy.per_class[a];
      correct_all += correct;
      if (std::count(bits.begin(), bits.end(), 1) > 0 && std::count(bits.begin(), bits.end(), 0) > 0) {
        curves.push_back(roc_curve(scores, bits));
      }
    }
    ev.accuracy.average = sum / static_cast<double>(k);
    ev.accuracy.overall = static_cast<double>(correct_all) / static_cast<double>(n * k);
  } else {
    ev.accuracy = accuracy(ev.predictions, ev.labels);
    const std::size_t first = k == 2 ? 1 : 0;
    for (std::size_t c = first; c < k; ++c) {
      std::vector<double> scores;
      std::vector<std::size_t> bits;
      for (std::size_t i = 0; i < ev.labels.size(); ++i) {
        scores.push_back(ev.probabilities[i][c]);
        bits.push_back(ev.labels[i] == c ? 1 : 0);
      }
      const auto pos = std::count(bits.begin(), bits.end(), 1);
      if (pos > 0 && pos < static_cast<std::ptrdiff_t>(bits.size())) curves.push_back(roc_curve(scores, bits));
    }
  }
  if (!curves.empty()) {
    ev.roc = macro_average_roc(curves);
    ev.auc = auc(ev.roc);
  } else {
    ev.auc = std::numeric_limits<double>::quiet_NaN();
  }
  return ev;
}

RunReport make_report(const ExperimentConfig& config, const Evaluation& test,
                      const LossBreakdown& final_losses, double seconds) {
  RunReport r;
  r.config_json = config_to_json(config);
  r.preset = config.preset;
  r.triplet = config.triplet.label();
  r.seed = config.seed;
  r.per_class = test.accuracy.per_class;
  r.average_accuracy = test.accuracy.average;
  r.overall_accuracy = test.accuracy.overall;
  r.roc = test.roc;
  r.auc = test.auc;
  r.final_losses = final_losses;
  r.wall_clock_seconds = seconds;
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetSplits& splits,
                                const EpochCallback& on_epoch) {
  config.validate();
  const Dataset& train = splits.train;
  if (train.size() == 0) throw DataError("run_experiment: empty train split");
  if (splits.test.size() == 0) throw DataError("run_experiment: empty test split");
  if (train.height != config.image_size || train.width != config.image_size || train.channels != 3) {
    throw DataError("run_experiment: dataset images are " + std::to_string(train.height) + "x" +
                    std::to_string(train.width) + ", config expects " + std::to_string(config.image_size));
  }
  if (train.num_classes != config.num_classes || train.task != config.task) {
    throw DataError("run_experiment: dataset has " + std::to_string(train.num_classes) +
                    " classes/attributes, config expects " + std::to_string(config.num_classes));
  }
  const auto started = std::chrono::steady_clock::now();
  const std::size_t steps_per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  TrainState state = init_train_state(config, steps_per_epoch);

  ExperimentResult result;
  LossBreakdown last;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto order = train.all_indices();
    auto engine = make_engine(config.seed, {stream_id(RngStream::kShuffle), epoch});
    std::shuffle(order.begin(), order.end(), engine);
    LossBreakdown mean;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t start = b * config.batch_size;
      const std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, order.size() - start));
      last = train_step(train.batch(idx), train.labels(idx), config, state, StepKey{epoch, b});
      mean.classification += last.classification / static_cast<double>(steps_per_epoch);
      mean.reconstruction += last.reconstruction / static_cast<double>(steps_per_epoch);
      mean.joint += last.joint / static_cast<double>(steps_per_epoch);
      for (const auto& [name, v] : last.per_target) mean.per_target[name] += v / static_cast<double>(steps_per_epoch);
    }
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }

  const Evaluation test = evaluate(state.params, state.spec, config, splits.test);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.report = make_report(config, test, last, seconds);
  if (splits.val.size() > 0) {
    result.report.val_average_accuracy = evaluate(state.params, state.spec, config, splits.val).accuracy.average;
  }
  result.spec = state.spec;
  result.params = std::move(state.params);
  return result;
}

}  // namespace lssat
