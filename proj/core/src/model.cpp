#include "lssat/model.hpp"

#include <cmath>
#include <random>

#include "lssat/error.hpp"
#include "lssat/rng.hpp"

namespace lssat {

void BackbonePreset::validate() const {
  if (depth < 1) throw ConfigError("preset " + name + ": depth must be at least 1");
  if (heads == 0 || embed_dim % heads != 0) {
    throw ConfigError("preset " + name + ": embed_dim " + std::to_string(embed_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
  if (decoder_heads == 0 || decoder_dim % decoder_heads != 0) {
    throw ConfigError("preset " + name + ": decoder_dim not divisible by decoder_heads");
  }
  if (!(mlp_ratio > 0.0)) throw ConfigError("preset " + name + ": mlp_ratio must be positive");
  if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0)) {
    throw ConfigError("preset " + name + ": drop_path_rate must be in [0,1)");
  }
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"toy-b", "toy-l", "toy-h", "vit-b", "vit-l", "vit-h"};
  return names;
}

BackbonePreset backbone_preset(std::string_view name) {
  //                name     D    depth heads mlp  dec_D dec_depth dec_heads drop_path
  if (name == "toy-b") return {"toy-b", 64, 4, 4, 4.0, 32, 2, 4, 0.01};
  if (name == "toy-l") return {"toy-l", 96, 8, 6, 4.0, 48, 2, 6, 0.01};
  if (name == "toy-h") return {"toy-h", 128, 12, 8, 4.0, 64, 2, 8, 0.01};
  if (name == "vit-b") return {"vit-b", 768, 12, 12, 4.0, 512, 8, 16, 0.01};
  if (name == "vit-l") return {"vit-l", 1024, 24, 16, 4.0, 512, 8, 16, 0.01};
  if (name == "vit-h") return {"vit-h", 1280, 32, 16, 4.0, 512, 8, 16, 0.01};
  throw ConfigError("unknown backbone preset '" + std::string(name) + "'");
}

std::string_view modality_name(Modality m) { return m == Modality::kRgb ? "RGB" : "LDP"; }

Modality parse_modality(std::string_view s) {
  if (s == "RGB" || s == "rgb") return Modality::kRgb;
  if (s == "LDP" || s == "ldp") return Modality::kLdp;
  throw ConfigError("unknown modality '" + std::string(s) + "' (expected RGB or LDP)");
}

std::size_t ModelSpec::logit_count() const {
  return task == TaskKind::kMultiAttribute ? 2 * num_classes : num_classes;
}

void ParameterStore::set(const std::string& name, Tensor value) {
  params_.insert_or_assign(name, std::move(value));
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("parameter '" + name + "' not found");
  return it->second;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [k, v] : params_) out.push_back(k);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params_) n += v.size();
  return n;
}

bool ParameterStore::bit_equal(const ParameterStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto it = other.params_.begin();
  for (const auto& [k, v] : params_) {
    if (k != it->first || !v.bit_equal(it->second)) return false;
    ++it;
  }
  return true;
}

namespace {

class Initializer {
 public:
  Initializer(ParameterStore& store, std::uint64_t seed) : store_(store), seed_(seed) {}

  void trunc_normal(const std::string& name, Shape shape, double std = 0.02) {
    auto engine = make_engine(seed_, {stream_id(RngStream::kInit), counter_++});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(numel(shape));
    for (auto& x : v) {
      double z;
      do z = normal(engine);
      while (std::abs(z) > 2.0);
      x = z * std;
    }
    store_.set(name, Tensor(std::move(shape), std::move(v)));
  }
  void constant(const std::string& name, Shape shape, double value) {
    ++counter_;
    store_.set(name, Tensor::full(std::move(shape), value));
  }
  void linear(const std::string& name, std::size_t in, std::size_t out) {
    trunc_normal(name + ".weight", {in, out});
    constant(name + ".bias", {out}, 0.0);
  }
  void norm(const std::string& name, std::size_t width) {
    constant(name + ".weight", {width}, 1.0);
    constant(name + ".bias", {width}, 0.0);
  }
  void blocks(const std::string& prefix, std::size_t depth, std::size_t width, double mlp_ratio) {
    const auto hidden = static_cast<std::size_t>(std::lround(static_cast<double>(width) * mlp_ratio));
    for (std::size_t i = 0; i < depth; ++i) {
      const std::string b = prefix + ".blocks." + std::to_string(i);
      norm(b + ".norm1", width);
      linear(b + ".attn.q", width, width);
      linear(b + ".attn.k", width, width);
      linear(b + ".attn.v", width, width);
      linear(b + ".attn.proj", width, width);
      norm(b + ".norm2", width);
      linear(b + ".mlp.fc1", width, hidden);
      linear(b + ".mlp.fc2", hidden, width);
    }
  }

 private:
  ParameterStore& store_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

void init_encoder(Initializer& init, const std::string& prefix, const ModelSpec& spec) {
  const auto& p = spec.preset;
  init.linear(prefix + ".patch_embed", spec.geometry.patch_dim(), p.embed_dim);
  init.trunc_normal(prefix + ".pos_embed", {spec.geometry.tokens(), p.embed_dim});
  init.blocks(prefix, p.depth, p.embed_dim, p.mlp_ratio);
  init.norm(prefix + ".norm", p.embed_dim);
}

std::string head_name(Modality m) { return m == Modality::kRgb ? "decoder.head_rgb" : "decoder.head_ldp"; }

Var linear(const BoundParameters& p, const std::string& name, Var x) {
  return add(matmul(x, p[name + ".weight"]), p[name + ".bias"]);
}

Var norm(const BoundParameters& p, const std::string& name, Var x) {
  return layer_norm(x, p[name + ".weight"], p[name + ".bias"], 1e-6);
}

// Per-sample stochastic depth on a [B,S,D] residual branch.
Var drop_path(Var branch, double rate, const ForwardMode& mode, std::uint64_t block_key) {
  if (!mode.training || rate <= 0.0) return branch;
  const Shape& s = branch.shape();
  const std::size_t per_sample = numel(s) / s[0];
  std::vector<double> scale(numel(s));
  for (std::size_t b = 0; b < s[0]; ++b) {
    auto engine = make_engine(mode.drop_path_seed, {block_key, b});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = u(engine) >= rate ? 1.0 / (1.0 - rate) : 0.0;
    std::fill_n(scale.begin() + static_cast<std::ptrdiff_t>(b * per_sample), per_sample, keep);
  }
  return mul(branch, branch.graph->constant(Tensor(s, std::move(scale))));
}

Var attention(const BoundParameters& p, const std::string& name, Var x, std::size_t heads) {
  const Shape s = x.shape();
  const std::size_t batch = s[0], len = s[1], width = s[2], dh = width / heads;
  auto split = [&](Var t, std::vector<std::size_t> perm) {
    return transpose(reshape(t, {batch, len, heads, dh}), std::move(perm));
  };
  Var q = split(linear(p, name + ".q", x), {0, 2, 1, 3});     // [B,H,S,dh]
  Var kt = split(linear(p, name + ".k", x), {0, 2, 3, 1});    // [B,H,dh,S]
  Var v = split(linear(p, name + ".v", x), {0, 2, 1, 3});     // [B,H,S,dh]
  Var scores = scalar_mul(matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(dh)));
  Var out = matmul(softmax(scores), v);                         // [B,H,S,dh]
  out = reshape(transpose(out, std::vector<std::size_t>{0, 2, 1, 3}), {batch, len, width});
  return linear(p, name + ".proj", out);
}

Var run_blocks(const BoundParameters& p, const std::string& prefix, Var x, std::size_t depth,
               std::size_t heads, double drop_rate, const ForwardMode& mode) {
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string b = prefix + ".blocks." + std::to_string(i);
    const std::uint64_t stack = prefix == "encoder" ? 0 : prefix == "decoder" ? 1 : 2;
    const std::uint64_t key = stack * 1000 + i;
    Var a = attention(p, b + ".attn", norm(p, b + ".norm1", x), heads);
    x = add(x, drop_path(a, drop_rate, mode, 2 * key));
    Var m = linear(p, b + ".mlp.fc2", gelu(linear(p, b + ".mlp.fc1", norm(p, b + ".norm2", x))));
    x = add(x, drop_path(m, drop_rate, mode, 2 * key + 1));
  }
  return x;
}

void check_tokens(const ModelSpec& spec, Var tokens, std::size_t expected_count, const char* who) {
  const Shape& s = tokens.shape();
  if (s.size() != 3 || s[1] != expected_count || s[2] != spec.geometry.patch_dim()) {
    throw ShapeError(std::string(who) + ": tokens " + shape_str(s) + " do not match [B," +
                     std::to_string(expected_count) + "," + std::to_string(spec.geometry.patch_dim()) + "]");
  }
}

}  // namespace

ParameterStore init_parameters(const ModelSpec& spec, std::uint64_t seed) {
  spec.preset.validate();
  if (spec.reconstruct.empty()) throw ConfigError("model: at least one reconstruction target required");
  if (spec.num_classes == 0) throw ConfigError("model: num_classes must be positive");
  ParameterStore store;
  Initializer init(store, seed);
  init_encoder(init, "encoder", spec);
  if (!spec.shared_encoder) init_encoder(init, "encoder_masked", spec);
  const auto& p = spec.preset;
  init.linear("decoder.embed", p.embed_dim, p.decoder_dim);
  init.constant("decoder.mask_token", {p.decoder_dim}, 0.0);
  init.trunc_normal("decoder.pos_embed", {spec.geometry.tokens(), p.decoder_dim});
  init.blocks("decoder", p.decoder_depth, p.decoder_dim, p.mlp_ratio);
  init.norm("decoder.norm", p.decoder_dim);
  for (Modality m : {Modality::kRgb, Modality::kLdp}) {
    for (Modality r : spec.reconstruct) {
      if (r == m) {
        init.linear(head_name(m), p.decoder_dim, spec.geometry.patch_dim());
        break;
      }
    }
  }
  init.linear("head", p.embed_dim, spec.logit_count());
  return store;
}

BoundParameters::BoundParameters(Graph& graph, const ParameterStore& store, bool trainable)
    : graph_(&graph) {
  for (const auto& [name, value] : store.all()) {
    vars_.emplace(name, graph.leaf(value.with_requires_grad(trainable)));
  }
}

Var BoundParameters::operator[](const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ConfigError("parameter '" + name + "' not bound");
  return it->second;
}

void BoundParameters::rebind(const std::string& name, Var v) {
  Var old = (*this)[name];
  if (v.graph != graph_ || old.shape() != v.shape()) {
    throw ShapeError("rebind '" + name + "': expected " + shape_str(old.shape()) + " on the same graph");
  }
  vars_[name] = v;
}

Var encode(const BoundParameters& p, const ModelSpec& spec, Var tokens, const ForwardMode& mode,
           const std::string& prefix) {
  check_tokens(spec, tokens, spec.geometry.tokens(), "encode");
  Var x = add(linear(p, prefix + ".patch_embed", tokens), p[prefix + ".pos_embed"]);
  x = run_blocks(p, prefix, x, spec.preset.depth, spec.preset.heads, spec.preset.drop_path_rate, mode);
  return norm(p, prefix + ".norm", x);
}

Var encode_visible(const BoundParameters& p, const ModelSpec& spec, Var visible_tokens,
                   const MaskPlan& plan, const ForwardMode& mode, const std::string& prefix) {
  check_tokens(spec, visible_tokens, plan.visible_per_sample(), "encode_visible");
  if (plan.count != spec.geometry.tokens() || plan.batch != visible_tokens.shape()[0]) {
    throw ShapeError("encode_visible: mask plan does not match token layout");
  }
  Var pos = index_gather(p[prefix + ".pos_embed"], plan.visible_table());
  Var x = add(linear(p, prefix + ".patch_embed", visible_tokens), pos);
  x = run_blocks(p, prefix, x, spec.preset.depth, spec.preset.heads, spec.preset.drop_path_rate, mode);
  return norm(p, prefix + ".norm", x);
}

Var decode_tokens(const BoundParameters& p, const ModelSpec& spec, Var latent, const MaskPlan& plan,
                  Modality target, const ForwardMode& mode) {
  const Shape& s = latent.shape();
  const std::size_t total = spec.geometry.tokens();
  if (s.size() != 3 || s[0] != plan.batch || s[1] != plan.visible_per_sample() ||
      s[2] != spec.preset.embed_dim || plan.count != total) {
    throw ShapeError("decode: latent " + shape_str(s) + " inconsistent with mask plan [" +
                     std::to_string(plan.batch) + "x" + std::to_string(plan.visible_per_sample()) + "]");
  }
  Graph& g = p.graph();
  const std::size_t dd = spec.preset.decoder_dim;
  Var x = index_scatter(linear(p, "decoder.embed", latent), plan.visible_table(), total);
  if (plan.masked_per_sample() > 0) {
    Var filler = add(g.constant(Tensor::zeros({plan.batch, plan.masked_per_sample(), dd})),
                     p["decoder.mask_token"]);
    x = add(x, index_scatter(filler, plan.masked_table(), total));
  }
  x = add(x, p["decoder.pos_embed"]);
  x = run_blocks(p, "decoder", x, spec.preset.decoder_depth, spec.preset.decoder_heads,
                 spec.preset.drop_path_rate, mode);
  x = norm(p, "decoder.norm", x);
  return linear(p, head_name(target), x);
}

Var decode_reconstruct(const BoundParameters& p, const ModelSpec& spec, Var latent,
                       const MaskPlan& plan, Modality target, const ForwardMode& mode) {
  Var tokens = decode_tokens(p, spec, latent, plan, target, mode);
  return unpatchify(tokens, spec.geometry.dims(plan.batch), spec.geometry.patch_size);
}

Var classify(const BoundParameters& p, const ModelSpec& spec, Var latent) {
  const Shape& s = latent.shape();
  if (s.size() != 3 || s[2] != spec.preset.embed_dim) {
    throw ShapeError("classify: latent " + shape_str(s) + " does not end in D=" +
                     std::to_string(spec.preset.embed_dim));
  }
  return linear(p, "head", mean_axis(latent, 1));
}

Tensor predict_logits(const ParameterStore& params, const ModelSpec& spec, const ImageTensor& x) {
  Graph g;
  BoundParameters p(g, params, false);
  const PatchSet patches = patchify(x, spec.geometry.patch_size);
  Var latent = encode(p, spec, g.constant(patches.tokens), ForwardMode{});
  return classify(p, spec, latent).value();
}

}  // namespace lssat
