#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "lssat/config.hpp"
#include "lssat/error.hpp"
#include "lssat/model.hpp"
#include "lssat/objectives.hpp"
#include "lssat/texture.hpp"
#include "lssat/training.hpp"
#include "support/composite.hpp"
#include "support/generators.hpp"

using namespace lssat;

namespace {

ModelSpec toy_spec(std::size_t depth = 2) {
  ModelSpec s;
  s.preset = backbone_preset("toy-b");
  s.preset.depth = depth;
  return s;
}

ImageTensor random_image(ImageDims dims, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(dims.count());
  for (auto& x : v) x = u(rng);
  return ImageTensor(dims, std::move(v));
}

std::set<std::size_t> ancestors(const Graph& g, std::size_t id) {
  std::set<std::size_t> seen;
  std::vector<std::size_t> stack{id};
  while (!stack.empty()) {
    const std::size_t n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    for (auto in : g.inputs(n)) stack.push_back(in);
  }
  return seen;
}

}  // namespace

TEST(Presets, DesignConstants) {
  const auto b = backbone_preset("toy-b"), l = backbone_preset("toy-l"), h = backbone_preset("toy-h");
  EXPECT_EQ(b.embed_dim, 64u);
  EXPECT_EQ(b.depth, 4u);
  EXPECT_EQ(b.heads, 4u);
  EXPECT_EQ(l.embed_dim, 96u);
  EXPECT_EQ(l.depth, 8u);
  EXPECT_EQ(l.heads, 6u);
  EXPECT_EQ(h.embed_dim, 128u);
  EXPECT_EQ(h.depth, 12u);
  EXPECT_EQ(h.heads, 8u);
  for (const auto& p : {b, l, h}) {
    EXPECT_EQ(p.decoder_dim, p.embed_dim / 2);
    EXPECT_EQ(p.decoder_depth, 2u);
    EXPECT_EQ(p.drop_path_rate, 0.01);
  }
  const auto vb = backbone_preset("vit-b"), vl = backbone_preset("vit-l"), vh = backbone_preset("vit-h");
  EXPECT_EQ(std::make_tuple(vb.embed_dim, vb.depth, vb.heads), std::make_tuple(768u, 12u, 12u));
  EXPECT_EQ(std::make_tuple(vl.embed_dim, vl.depth, vl.heads), std::make_tuple(1024u, 24u, 16u));
  EXPECT_EQ(std::make_tuple(vh.embed_dim, vh.depth, vh.heads), std::make_tuple(1280u, 32u, 16u));
}

TEST(Presets, ScalingOrderIsPreserved) {
  EXPECT_GT(backbone_preset("vit-h").depth, backbone_preset("vit-l").depth);
  EXPECT_GT(backbone_preset("vit-l").depth, backbone_preset("vit-b").depth);
  EXPECT_GT(backbone_preset("toy-h").depth, backbone_preset("toy-l").depth);
  EXPECT_GT(backbone_preset("toy-l").depth, backbone_preset("toy-b").depth);
  EXPECT_GT(backbone_preset("toy-h").embed_dim, backbone_preset("toy-l").embed_dim);
  EXPECT_GT(backbone_preset("toy-l").embed_dim, backbone_preset("toy-b").embed_dim);
}

TEST(Presets, UnknownAndInvalid) {
  EXPECT_THROW(backbone_preset("vit-g"), ConfigError);
  BackbonePreset p = backbone_preset("toy-b");
  p.heads = 5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = backbone_preset("toy-b");
  p.depth = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  for (const auto& name : preset_names()) EXPECT_NO_THROW(backbone_preset(name).validate());
}

TEST(Init, ConventionsAndDeterminism) {
  const ModelSpec spec = toy_spec();
  const ParameterStore a = init_parameters(spec, 4), b = init_parameters(spec, 4), c = init_parameters(spec, 5);
  EXPECT_TRUE(a.bit_equal(b));
  EXPECT_FALSE(a.bit_equal(c));
  for (const auto& [name, t] : a.all()) {
    if (name.ends_with(".bias") || name == "decoder.mask_token") {
      for (double v : t.data()) EXPECT_EQ(v, 0.0) << name;
    } else if (name.find("norm") != std::string::npos) {
      for (double v : t.data()) EXPECT_EQ(v, 1.0) << name;
    } else {
      for (double v : t.data()) EXPECT_LE(std::abs(v), 0.04) << name;
    }
  }
  EXPECT_TRUE(a.contains("encoder.pos_embed"));
  EXPECT_EQ(a.get("encoder.pos_embed").shape(), (Shape{16, 64}));
  EXPECT_EQ(a.get("head.weight").shape(), (Shape{64, 2}));
  EXPECT_FALSE(a.contains("encoder_masked.pos_embed"));
}

TEST(Init, SeparateEncoderCopyWhenNotShared) {
  ModelSpec spec = toy_spec();
  spec.shared_encoder = false;
  const ParameterStore p = init_parameters(spec, 1);
  EXPECT_TRUE(p.contains("encoder_masked.pos_embed"));
  EXPECT_TRUE(p.contains("encoder_masked.blocks.1.attn.q.weight"));
}

TEST(Encoder, ShapeContract) {
  std::mt19937_64 rng(41);
  const ModelSpec spec = toy_spec(2);
  const ParameterStore params = init_parameters(spec, 1);
  Graph g;
  BoundParameters p(g, params, false);
  const MaskPlan plan = sample_mask(2, 16, 0.0, 1);
  Var tokens = g.constant(gen::tensor({2, 16, 192}, rng));
  EXPECT_EQ(encode_visible(p, spec, tokens, plan, {}).shape(), (Shape{2, 16, 64}));
  EXPECT_EQ(encode(p, spec, tokens, {}).shape(), (Shape{2, 16, 64}));
  EXPECT_THROW(encode(p, spec, g.constant(gen::tensor({2, 15, 192}, rng)), {}), ShapeError);
}

TEST(Encoder, ZeroDepthIsEmbedPlusPositionNormalized) {
  std::mt19937_64 rng(42);
  // presets require depth >= 1, so initialise at depth 1 and run none of the blocks
  const ParameterStore params = init_parameters(toy_spec(1), 2);
  const ModelSpec spec = toy_spec(0);
  const Tensor x = gen::tensor({1, 16, 192}, rng);
  Graph g;
  BoundParameters p(g, params, false);
  const Tensor out = encode(p, spec, g.constant(x), {}).value();
  const auto& w = params.get("encoder.patch_embed.weight");
  const auto& pos = params.get("encoder.pos_embed");
  for (std::size_t s = 0; s < 16; ++s) {
    std::vector<double> e(64);
    for (std::size_t d = 0; d < 64; ++d) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 192; ++k) acc += x[s * 192 + k] * w[k * 64 + d];
      e[d] = acc + pos[s * 64 + d];
    }
    double mu = 0.0, var = 0.0;
    for (double v : e) mu += v / 64.0;
    for (double v : e) var += (v - mu) * (v - mu) / 64.0;
    for (std::size_t d = 0; d < 64; ++d) EXPECT_NEAR(out[s * 64 + d], (e[d] - mu) / std::sqrt(var + 1e-6), 1e-10);
  }
}

TEST(Encoder, StreamsShareParameterNodes) {
  std::mt19937_64 rng(43);
  ExperimentConfig cfg = default_config("toy-b");
  const ModelSpec spec = cfg.model_spec();
  const ParameterStore params = init_parameters(spec, 3);
  const ImageTensor rgb = random_image(spec.geometry.dims(2), rng);
  Graph g;
  BoundParameters p(g, params, true);
  EXPECT_EQ(p["encoder.patch_embed.weight"].value().storage_id(), params.get("encoder.patch_embed.weight").storage_id());
  const std::vector<std::size_t> labels{0, 1};
  auto loss = build_joint_loss(p, spec, cfg, rgb, ldp_tensor(rgb), labels, step_mask(cfg, 2, {}), {}, {});
  const auto cls = ancestors(g, loss.cls_latent.id), rec = ancestors(g, loss.rec_latent.id);
  for (const auto& [name, var] : p.vars()) {
    if (!name.starts_with("encoder.")) continue;
    EXPECT_TRUE(cls.count(var.id)) << name;
    EXPECT_TRUE(rec.count(var.id)) << name;
  }
}

TEST(Encoder, PermutingVisibleTokensPermutesOutput) {
  std::mt19937_64 rng(44);
  const ModelSpec spec = toy_spec(1);
  const ParameterStore params = init_parameters(spec, 4);
  MaskPlan plan = sample_mask(1, 16, 0.5, 9);
  const Tensor tokens = gen::tensor({1, 8, 192}, rng);
  std::vector<std::size_t> perm{3, 0, 7, 1, 6, 2, 5, 4};
  std::vector<double> shuffled(tokens.size());
  for (std::size_t j = 0; j < 8; ++j)
    for (std::size_t k = 0; k < 192; ++k) shuffled[j * 192 + k] = tokens[perm[j] * 192 + k];
  MaskPlan permuted = plan;
  for (std::size_t j = 0; j < 8; ++j) permuted.visible[0][j] = plan.visible[0][perm[j]];
  Graph g;
  BoundParameters p(g, params, false);
  const Tensor a = encode_visible(p, spec, g.constant(tokens), plan, {}).value();
  const Tensor b = encode_visible(p, spec, g.constant(Tensor(tokens.shape(), shuffled)), permuted, {}).value();
  for (std::size_t j = 0; j < 8; ++j)
    for (std::size_t d = 0; d < 64; ++d) EXPECT_NEAR(b[j * 64 + d], a[perm[j] * 64 + d], 1e-12);
}

TEST(Encoder, EvalForwardIsPure) {
  std::mt19937_64 rng(45);
  const ModelSpec spec = toy_spec();
  const ParameterStore params = init_parameters(spec, 5);
  const ImageTensor x = random_image(spec.geometry.dims(3), rng);
  EXPECT_TRUE(predict_logits(params, spec, x).bit_equal(predict_logits(params, spec, x)));
}

TEST(Encoder, DropPathOnlyInTraining) {
  std::mt19937_64 rng(46);
  ModelSpec spec = toy_spec();
  spec.preset.drop_path_rate = 0.5;
  const ParameterStore params = init_parameters(spec, 6);
  const Tensor x = gen::tensor({4, 16, 192}, rng);
  Graph g;
  BoundParameters p(g, params, false);
  const Tensor eval = encode(p, spec, g.constant(x), {false, 1}).value();
  const Tensor train_a = encode(p, spec, g.constant(x), {true, 1}).value();
  const Tensor train_b = encode(p, spec, g.constant(x), {true, 1}).value();
  EXPECT_TRUE(train_a.bit_equal(train_b));
  EXPECT_FALSE(train_a.bit_equal(eval));
}

TEST(Decoder, ReconstructionCoversEveryPosition) {
  std::mt19937_64 rng(47);
  const ModelSpec spec = toy_spec();
  const ParameterStore params = init_parameters(spec, 7);
  for (double rho : {0.0, 0.75}) {
    const MaskPlan plan = sample_mask(2, 16, rho, 1);
    Graph g;
    BoundParameters p(g, params, false);
    Var latent = g.constant(gen::tensor({2, plan.visible_per_sample(), 64}, rng));
    EXPECT_EQ(decode_tokens(p, spec, latent, plan, Modality::kRgb, {}).shape(), (Shape{2, 16, 192}));
    EXPECT_EQ(decode_reconstruct(p, spec, latent, plan, Modality::kRgb, {}).shape(), (Shape{2, 1, 3, 32, 32}));
    EXPECT_THROW(decode_reconstruct(p, spec, latent, plan, Modality::kLdp, {}), ConfigError);
  }
}

TEST(Decoder, PlanLatentMismatchIsRejected) {
  std::mt19937_64 rng(48);
  const ModelSpec spec = toy_spec();
  const ParameterStore params = init_parameters(spec, 8);
  Graph g;
  BoundParameters p(g, params, false);
  Var latent = g.constant(gen::tensor({2, 5, 64}, rng));
  EXPECT_THROW(decode_reconstruct(p, spec, latent, sample_mask(2, 16, 0.75, 1), Modality::kRgb, {}), ShapeError);
}

TEST(Decoder, ReconstructionGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(49);
  const ModelSpec spec = toy_spec();
  const ParameterStore params = init_parameters(spec, 9);
  const ImageTensor target = random_image(spec.geometry.dims(2), rng);
  const MaskPlan plan = sample_mask(2, 16, 0.75, 2);
  const Tensor latent = gen::tensor({2, 4, 64}, rng);
  for (const std::string name : {"decoder.head_rgb.weight", "decoder.blocks.1.mlp.fc1.weight", "decoder.embed.weight",
                                 "decoder.mask_token", "decoder.pos_embed"}) {
    auto f = [&](Graph& g, Var probe) {
      BoundParameters p(g, params, false);
      p.rebind(name, probe);
      Var recon = decode_reconstruct(p, spec, g.constant(latent), plan, Modality::kRgb, {});
      return reconstruction_loss(target, recon, plan, 8);
    };
    const std::size_t n = params.get(name).size();
    std::vector<std::size_t> coords;
    for (std::size_t i = 0; i < 12; ++i) coords.push_back(gen::dim(rng, 0, n - 1));
    EXPECT_LT(finite_difference_check(f, params.get(name), 1e-5, coords), 1e-4) << name;
  }
}

TEST(Classifier, ZeroLatentGivesZeroLogits) {
  ModelSpec spec = toy_spec();
  ParameterStore params = init_parameters(spec, 10);
  Graph g;
  BoundParameters p(g, params, false);
  const Tensor logits = classify(p, spec, g.constant(Tensor::zeros({3, 16, 64}))).value();
  EXPECT_EQ(logits.shape(), (Shape{3, 2}));
  for (double v : logits.data()) EXPECT_EQ(v, 0.0);
}

TEST(Classifier, LogitWidthFollowsTask) {
  std::mt19937_64 rng(50);
  ModelSpec spec = toy_spec();
  spec.num_classes = 8;
  ImageTensor x = random_image(spec.geometry.dims(2), rng);
  EXPECT_EQ(predict_logits(init_parameters(spec, 1), spec, x).shape(), (Shape{2, 8}));
  spec.num_classes = 6;
  spec.task = TaskKind::kMultiAttribute;
  EXPECT_EQ(predict_logits(init_parameters(spec, 1), spec, x).shape(), (Shape{2, 12}));
}

TEST(Composite, JointLossGradientOnFewSeeds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = gen::composite_gradcheck(seed, 12);
    EXPECT_LT(r.worst, 1e-3) << "seed " << seed << " " << r.worst_param;
    EXPECT_LT(r.key_bias_grad, 1e-12) << "seed " << seed;
  }
}
