#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lssat/autodiff.hpp"
#include "lssat/image_tensor.hpp"
#include "lssat/model.hpp"
#include "lssat/patching.hpp"

namespace lssat {

// --- classification ------------------------------------------------------

// Mean over the batch of -log softmax(logits)[label]. logits [B,K].
double classification_loss(const Tensor& logits, std::span<const std::size_t> labels);
Var classification_loss(Var logits, std::span<const std::size_t> labels);

// K independent two-way heads: logits [B,2K], bits [B*K] sample-major.
Var attribute_loss(Var logits, std::span<const std::size_t> bits);

// --- reconstruction ------------------------------------------------------

// Squared error over the pixels of masked patches only, divided by
// |M_i| * patch_dim per sample and averaged over the batch. Zero when the
// plan masks nothing.
double reconstruction_loss(const ImageTensor& target, const ImageTensor& recon,
                           const MaskPlan& plan, std::size_t patch_size);
Var reconstruction_loss(const ImageTensor& target, Var recon, const MaskPlan& plan,
                        std::size_t patch_size);

// Equal-weight average of per-target reconstruction losses.
double multi_target_loss(std::span<const double> losses);
Var multi_target_loss(std::span<const Var> losses);

// --- combination and schedule -------------------------------------------

// lambda * cls + (1 - lambda) * rec, evaluated as rec + lambda * (cls - rec)
// so that lambda = 0 and lambda = 1 return the single losses exactly.
double joint_loss(double cls, double rec, double lambda);
Var joint_loss(Var cls, Var rec, double lambda);

// lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max, double lr_min);

// --- optimizer ----------------------------------------------------------

struct SgdOptions {
  double weight_decay = 0.05;
  double momentum = 0.9;
};

using MomentumState = std::map<std::string, std::vector<double>>;

// Rank-0/1 parameters (biases, norm scale/shift, mask token) skip decay.
bool decay_exempt(const Tensor& param);

// Decoupled decay p -= lr*wd*p, then v = momentum*v + g; p -= lr*v.
// Parameters absent from `grads` are treated as having zero gradient.
void sgd_step(ParameterStore& params, const std::map<std::string, Tensor>& grads, double lr,
              const SgdOptions& options, MomentumState& state);

}  // namespace lssat
