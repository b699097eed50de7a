#include "lssat/objectives.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "lssat/error.hpp"

namespace lssat {

double classification_loss(const Tensor& logits, std::span<const std::size_t> labels) {
  Graph g;
  return classification_loss(g.constant(logits), labels).value().item();
}

Var classification_loss(Var logits, std::span<const std::size_t> labels) {
  return cross_entropy(logits, labels);
}

Var attribute_loss(Var logits, std::span<const std::size_t> bits) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[1] % 2 != 0 || s[0] * (s[1] / 2) != bits.size()) {
    throw ShapeError("attribute loss: logits " + shape_str(s) + " vs " + std::to_string(bits.size()) +
                     " attribute bits");
  }
  return cross_entropy(reshape(logits, {bits.size(), 2}), bits);
}

namespace {

void check_recon_args(const ImageDims& target, const Shape& recon, const MaskPlan& plan,
                      std::size_t patch_size) {
  if (recon != target.shape()) {
    throw ShapeError("reconstruction loss: target " + shape_str(target.shape()) + " vs recon " +
                     shape_str(recon));
  }
  if (plan.batch != target.batch || plan.count != patch_count(target, patch_size)) {
    throw ShapeError("reconstruction loss: mask plan does not match the image patch grid");
  }
}

}  // namespace

double reconstruction_loss(const ImageTensor& target, const ImageTensor& recon,
                           const MaskPlan& plan, std::size_t patch_size) {
  check_recon_args(target.dims(), recon.dims().shape(), plan, patch_size);
  if (plan.masked_per_sample() == 0) return 0.0;
  const PatchSet t = patchify(target, patch_size);
  const PatchSet r = patchify(recon, patch_size);
  double total = 0.0;
  for (std::size_t b = 0; b < plan.batch; ++b) {
    double sample = 0.0;
    for (std::size_t s : plan.masked[b]) {
      const std::size_t base = (b * t.count + s) * t.patch_dim;
      for (std::size_t j = 0; j < t.patch_dim; ++j) {
        const double d = t.tokens[base + j] - r.tokens[base + j];
        sample += d * d;
      }
    }
    total += sample / static_cast<double>(plan.masked[b].size() * t.patch_dim);
  }
  return total / static_cast<double>(plan.batch);
}

Var reconstruction_loss(const ImageTensor& target, Var recon, const MaskPlan& plan,
                        std::size_t patch_size) {
  check_recon_args(target.dims(), recon.shape(), plan, patch_size);
  Graph& g = *recon.graph;
  if (plan.masked_per_sample() == 0) return g.constant(Tensor::scalar(0.0));
  const IndexTable masked = plan.masked_table();
  const PatchSet t = patchify(target, patch_size);
  Var target_masked = index_gather(g.constant(t.tokens), masked);
  Var recon_masked = index_gather(patchify(recon, patch_size), masked);
  const double denom = static_cast<double>(plan.batch * masked.count * t.patch_dim);
  return scalar_mul(sum_of_squares(sub(recon_masked, target_masked)), 1.0 / denom);
}

double multi_target_loss(std::span<const double> losses) {
  if (losses.empty()) throw RangeError("multi-target loss: no targets");
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

Var multi_target_loss(std::span<const Var> losses) {
  if (losses.empty()) throw RangeError("multi-target loss: no targets");
  if (losses.size() == 1) return losses[0];
  Var s = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) s = add(s, losses[i]);
  return scalar_mul(s, 1.0 / static_cast<double>(losses.size()));
}

namespace {

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw RangeError("joint loss: lambda must be in [0,1], got " + std::to_string(lambda));
  }
}

}  // namespace

double joint_loss(double cls, double rec, double lambda) {
  check_lambda(lambda);
  return std::lerp(rec, cls, lambda);
}

Var joint_loss(Var cls, Var rec, double lambda) {
  check_lambda(lambda);
  return add(rec, scalar_mul(sub(cls, rec), lambda));
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_max, double lr_min) {
  if (total_steps == 0 || step > total_steps) {
    throw RangeError("cosine lr: step " + std::to_string(step) + " outside [0," +
                     std::to_string(total_steps) + "]");
  }
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

bool decay_exempt(const Tensor& param) { return param.rank() <= 1; }

void sgd_step(ParameterStore& params, const std::map<std::string, Tensor>& grads, double lr,
              const SgdOptions& options, MomentumState& state) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw ConfigError("sgd: gradient for unknown parameter '" + name + "'");
    if (g.shape() != params.get(name).shape()) {
      throw ShapeError("sgd: gradient " + shape_str(g.shape()) + " for parameter '" + name + "' of shape " +
                       shape_str(params.get(name).shape()));
    }
  }
  for (const std::string& name : params.names()) {
    const Tensor& p = params.get(name);
    std::vector<double> v = p.to_vector();
    const double decay = decay_exempt(p) ? 0.0 : options.weight_decay;
    if (decay != 0.0) {
      for (auto& x : v) x -= lr * decay * x;
    }
    auto it = grads.find(name);
    auto& vel = state[name];
    if (vel.empty()) vel.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double g = it == grads.end() ? 0.0 : it->second[i];
      vel[i] = options.momentum * vel[i] + g;
      v[i] -= lr * vel[i];
    }
    params.set(name, Tensor(p.shape(), std::move(v)));
  }
}

}  // namespace lssat
