#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lssat/config.hpp"
#include "lssat/data.hpp"
#include "lssat/model.hpp"
#include "lssat/objectives.hpp"
#include "lssat/report.hpp"

namespace lssat {

struct TrainState {
  ModelSpec spec;
  ParameterStore params;
  MomentumState momentum;
  std::size_t step = 0;
  std::size_t total_steps = 1;
};

TrainState init_train_state(const ExperimentConfig& config, std::size_t steps_per_epoch);

// Position of a step in the run; keys the mask and drop-path draws.
struct StepKey {
  std::size_t epoch = 0;
  std::size_t batch = 0;
};

// Both streams of one training step on a graph.
struct JointLossGraph {
  Var joint;
  Var classification;
  Var reconstruction;
  std::vector<Var> per_target;  // parallel to triplet.reconstruct
  Var cls_latent;
  Var rec_latent;
};

// Classification stream on the full classify-modality input, reconstruction
// stream on the visible patches of the mask modality, one decoder head per
// reconstruct modality. `ldp` is the local-pattern tensor of `rgb`.
JointLossGraph build_joint_loss(const BoundParameters& params, const ModelSpec& spec,
                                const ExperimentConfig& config, const ImageTensor& rgb,
                                const ImageTensor& ldp, std::span<const std::size_t> labels,
                                const MaskPlan& plan, const ForwardMode& cls_mode,
                                const ForwardMode& rec_mode);

MaskPlan step_mask(const ExperimentConfig& config, std::size_t batch, StepKey key);

// One optimizer step: joint loss, single backward pass, SGD update with the
// cosine learning rate at state.step. Throws NumericError on a non-finite loss.
LossBreakdown train_step(const ImageTensor& rgb, std::span<const std::size_t> labels,
                         const ExperimentConfig& config, TrainState& state, StepKey key);

struct Evaluation {
  std::vector<std::size_t> predictions;  // per sample, or per attribute sample-major
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> probabilities;  // per sample: class or attribute-positive probabilities
  AccuracyReport accuracy;
  std::vector<RocPoint> roc;
  double auc = 0.0;
};

Evaluation evaluate(const ParameterStore& params, const ModelSpec& spec, const ExperimentConfig& config,
                    const Dataset& data, std::size_t batch_size = 32);

struct ExperimentResult {
  RunReport report;
  ModelSpec spec;
  ParameterStore params;
  std::vector<LossBreakdown> epoch_losses;  // mean over the epoch's steps
};

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown& mean)>;

// Trains for config.epochs over shuffled mini-batches of splits.train and
// reports on splits.test (and splits.val when non-empty). Deterministic
// given config.seed.
ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetSplits& splits,
                                const EpochCallback& on_epoch = {});

RunReport make_report(const ExperimentConfig& config, const Evaluation& test,
                      const LossBreakdown& final_losses, double seconds);

}  // namespace lssat
