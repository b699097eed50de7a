#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lssat/autodiff.hpp"
#include "lssat/image_tensor.hpp"
#include "lssat/patching.hpp"

namespace lssat {

struct BackbonePreset {
  std::string name;
  std::size_t embed_dim = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  double mlp_ratio = 4.0;
  std::size_t decoder_dim = 32;
  std::size_t decoder_depth = 2;
  std::size_t decoder_heads = 4;
  double drop_path_rate = 0.01;

  // Throws ConfigError unless embed_dim % heads == 0, depth >= 1 and the
  // decoder dims divide likewise.
  void validate() const;
};

// toy-b/l/h scale depth and width along the ViT-B/L/H axis at desk scale;
// vit-b/l/h carry the conventional dims.
BackbonePreset backbone_preset(std::string_view name);
const std::vector<std::string>& preset_names();

enum class Modality { kRgb, kLdp };
std::string_view modality_name(Modality m);
Modality parse_modality(std::string_view s);

enum class TaskKind { kMulticlass, kMultiAttribute };

struct ModelGeometry {
  std::size_t frames = 1;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t patch_size = 8;

  std::size_t tokens() const { return patch_count(dims(1), patch_size); }
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  ImageDims dims(std::size_t batch) const { return {batch, frames, channels, height, width}; }
};

struct ModelSpec {
  BackbonePreset preset;
  ModelGeometry geometry;
  std::size_t num_classes = 2;
  TaskKind task = TaskKind::kMulticlass;
  // One decoder head per reconstructed modality, all sharing the decoder blocks.
  std::vector<Modality> reconstruct = {Modality::kRgb};
  // When false the masked stream runs through its own encoder copy.
  bool shared_encoder = true;

  // Width of the classifier output: num_classes, or 2 per attribute.
  std::size_t logit_count() const;
};

// Named parameter tensors, ordered by name.
class ParameterStore {
 public:
  void set(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;
  const std::map<std::string, Tensor>& all() const { return params_; }
  bool bit_equal(const ParameterStore& other) const;

 private:
  std::map<std::string, Tensor> params_;
};

ParameterStore init_parameters(const ModelSpec& spec, std::uint64_t seed);

// Parameters placed on one graph as leaves. Each name becomes exactly one
// node, so every stream that reads a parameter reads the same node.
class BoundParameters {
 public:
  BoundParameters(Graph& graph, const ParameterStore& store, bool trainable);
  Var operator[](const std::string& name) const;
  // Points `name` at an existing node of the same shape (e.g. a probe leaf).
  void rebind(const std::string& name, Var v);
  Graph& graph() const { return *graph_; }
  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  Graph* graph_;
  std::map<std::string, Var> vars_;
};

struct ForwardMode {
  bool training = false;
  std::uint64_t drop_path_seed = 0;  // used only when training
};

// Encoder over a full [B,S,patch_dim] token batch.
Var encode(const BoundParameters& p, const ModelSpec& spec, Var tokens, const ForwardMode& mode,
           const std::string& prefix = "encoder");

// Encoder over visible tokens [B,S',patch_dim]; positional embeddings are
// gathered at plan.visible before the blocks.
Var encode_visible(const BoundParameters& p, const ModelSpec& spec, Var visible_tokens,
                   const MaskPlan& plan, const ForwardMode& mode,
                   const std::string& prefix = "encoder");

// Decoder: mask tokens fill plan.masked, then blocks and the head of
// `target`. Returns per-position predictions [B,S,patch_dim].
Var decode_tokens(const BoundParameters& p, const ModelSpec& spec, Var latent, const MaskPlan& plan,
                  Modality target, const ForwardMode& mode);

// decode_tokens followed by unpatchify: [B,T,C,H,W].
Var decode_reconstruct(const BoundParameters& p, const ModelSpec& spec, Var latent,
                       const MaskPlan& plan, Modality target, const ForwardMode& mode);

// Mean-pool over tokens, then linear map to logit_count() outputs.
Var classify(const BoundParameters& p, const ModelSpec& spec, Var latent);

// Eval-mode logits for a batch of images.
Tensor predict_logits(const ParameterStore& params, const ModelSpec& spec, const ImageTensor& x);

}  // namespace lssat
