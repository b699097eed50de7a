#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lssat/error.hpp"
#include "lssat/objectives.hpp"
#include "support/generators.hpp"

using namespace lssat;

namespace {

ImageTensor random_image(ImageDims dims, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(dims.count());
  for (auto& x : v) x = u(rng);
  return ImageTensor(dims, std::move(v));
}

// recon = target + delta on the patches flagged in `which`
ImageTensor offset_patches(const ImageTensor& target, const MaskPlan& plan,
                           const std::vector<std::vector<std::size_t>>& which, double delta, std::size_t p) {
  PatchSet ps = patchify(target, p);
  std::vector<double> v = ps.tokens.to_vector();
  for (std::size_t b = 0; b < plan.batch; ++b)
    for (std::size_t s : which[b])
      for (std::size_t j = 0; j < ps.patch_dim; ++j) v[(b * ps.count + s) * ps.patch_dim + j] += delta;
  ps.tokens = Tensor(ps.tokens.shape(), std::move(v));
  return unpatchify(ps, target.dims());
}

}  // namespace

TEST(ClassificationLoss, Examples) {
  const std::vector<std::size_t> one{0}, two{1, 0};
  EXPECT_NEAR(classification_loss(Tensor({2, 2}, {0.3, 0.3, -1.0, -1.0}), two), std::log(2.0), 1e-12);
  // p_true = 0.25 with K=2: logit gap ln 3 against the true class
  EXPECT_NEAR(classification_loss(Tensor({1, 2}, {0.0, std::log(3.0)}), one), std::log(4.0), 1e-12);
  EXPECT_NEAR(classification_loss(Tensor({1, 2}, {60.0, 0.0}), one), 0.0, 1e-20);
  EXPECT_NEAR(classification_loss(Tensor({1, 4}, {0.0, 0.0, 0.0, 0.0}), one), std::log(4.0), 1e-12);
}

TEST(ClassificationLoss, LabelOutOfRange) {
  const std::vector<std::size_t> bad{2};
  EXPECT_THROW(classification_loss(Tensor({1, 2}, {0.0, 0.0}), bad), RangeError);
}

TEST(ClassificationLoss, AttributeHeadsAreIndependentBinaryLosses) {
  Graph g;
  const std::vector<std::size_t> bits{1, 0, 0, 1};
  Var l = attribute_loss(g.constant(Tensor({2, 4}, {0.0, std::log(3.0), 0.0, 0.0, 0.0, 0.0, 2.0, 2.0})), bits);
  EXPECT_NEAR(l.value().item(), (std::log(4.0 / 3.0) + 3 * std::log(2.0)) / 4.0, 1e-12);
  EXPECT_THROW(attribute_loss(g.constant(Tensor::zeros({2, 3})), bits), ShapeError);
}

TEST(ReconstructionLoss, Examples) {
  std::mt19937_64 rng(1);
  const ImageDims dims{2, 1, 3, 16, 16};
  const ImageTensor target = random_image(dims, rng);
  const MaskPlan plan = sample_mask(2, 4, 0.75, 3);
  EXPECT_EQ(reconstruction_loss(target, target, plan, 8), 0.0);

  MaskPlan single = sample_mask(1, 4, 0.25, 3);
  ASSERT_EQ(single.masked[0].size(), 1u);
  const ImageTensor t1 = random_image({1, 1, 3, 16, 16}, rng);
  EXPECT_NEAR(reconstruction_loss(t1, offset_patches(t1, single, single.masked, 0.5, 8), single, 8), 0.25, 1e-14);

  // constant error 0.5 on every masked patch of every sample: still 0.25 per pixel
  EXPECT_NEAR(reconstruction_loss(target, offset_patches(target, plan, plan.masked, 0.5, 8), plan, 8), 0.25, 1e-14);
  EXPECT_EQ(reconstruction_loss(target, offset_patches(target, plan, plan.visible, 0.5, 8), plan, 8), 0.0);
  EXPECT_EQ(reconstruction_loss(target, offset_patches(target, plan, plan.masked, 0.5, 8), sample_mask(2, 4, 0.0, 3), 8), 0.0);
}

TEST(ReconstructionLoss, Mismatches) {
  std::mt19937_64 rng(2);
  const ImageTensor a = random_image({2, 1, 3, 16, 16}, rng);
  const ImageTensor b = random_image({2, 1, 3, 16, 8}, rng);
  EXPECT_THROW(reconstruction_loss(a, b, sample_mask(2, 4, 0.5, 1), 8), ShapeError);
  EXPECT_THROW(reconstruction_loss(a, a, sample_mask(3, 4, 0.5, 1), 8), ShapeError);
  EXPECT_THROW(reconstruction_loss(a, a, sample_mask(2, 16, 0.5, 1), 8), ShapeError);
}

TEST(ReconstructionLoss, GraphFormMatchesScalarForm) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const ImageDims dims{2, 1, 3, 16, 16};
    const ImageTensor target = random_image(dims, rng), recon = random_image(dims, rng);
    const MaskPlan plan = sample_mask(2, 4, 0.25 * static_cast<double>(trial % 4), trial);
    Graph g;
    const double graph_value = reconstruction_loss(target, g.constant(recon.tensor()), plan, 8).value().item();
    EXPECT_NEAR(graph_value, reconstruction_loss(target, recon, plan, 8), 1e-14);
  }
}

TEST(ReconstructionLoss, GradientIsZeroOnVisiblePatches) {
  std::mt19937_64 rng(4);
  const ImageDims dims{2, 1, 3, 16, 16};
  const ImageTensor target = random_image(dims, rng), recon = random_image(dims, rng);
  const MaskPlan plan = sample_mask(2, 4, 0.5, 7);
  Graph g;
  Var r = g.leaf(recon.tensor().with_requires_grad(true));
  const GradientMap grads = backward(g, reconstruction_loss(target, r, plan, 8));
  const PatchSet tokens = patchify(ImageTensor(grads.at(r.id)), 8);
  std::size_t checked = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t s : plan.visible[b])
      for (std::size_t j = 0; j < tokens.patch_dim; ++j) {
        EXPECT_EQ(tokens.tokens[(b * 4 + s) * tokens.patch_dim + j], 0.0);
        ++checked;
      }
    for (std::size_t s : plan.masked[b]) {
      double mag = 0.0;
      for (std::size_t j = 0; j < tokens.patch_dim; ++j) mag += std::abs(tokens.tokens[(b * 4 + s) * tokens.patch_dim + j]);
      EXPECT_GT(mag, 0.0);
    }
  }
  EXPECT_EQ(checked, 2u * 2u * 192u);
}

TEST(JointLoss, Examples) {
  EXPECT_EQ(joint_loss(1.0, 2.0, 0.1), 1.9);
  EXPECT_EQ(joint_loss(1.0, 2.0, 1.0), 1.0);
  EXPECT_EQ(joint_loss(1.0, 2.0, 0.0), 2.0);
  EXPECT_THROW(joint_loss(1.0, 2.0, 1.5), RangeError);
  EXPECT_THROW(joint_loss(1.0, 2.0, -0.1), RangeError);
  EXPECT_THROW(joint_loss(1.0, 2.0, std::nan("")), RangeError);
}

TEST(JointLoss, GraphFormMatches) {
  Graph g;
  Var c = g.constant(Tensor::scalar(1.0)), r = g.constant(Tensor::scalar(2.0));
  EXPECT_EQ(joint_loss(c, r, 0.1).value().item(), 1.9);
  EXPECT_EQ(joint_loss(c, r, 1.0).value().item(), 1.0);
  EXPECT_EQ(joint_loss(c, r, 0.0).value().item(), 2.0);
}

TEST(JointLoss, AffineAndBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 10.0), l(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double c = u(rng), r = u(rng), lam = l(rng);
    const double j = joint_loss(c, r, lam);
    EXPECT_GE(j, std::min(c, r));
    EXPECT_LE(j, std::max(c, r));
    EXPECT_NEAR(j, lam * c + (1.0 - lam) * r, 1e-12);
    const double d = u(rng);
    EXPECT_NEAR(joint_loss(c + d, r, lam) - j, lam * d, 1e-12);
    EXPECT_NEAR(joint_loss(c, r + d, lam) - j, (1.0 - lam) * d, 1e-12);
  }
}

TEST(CosineLr, EndpointsAndMidpoint) {
  EXPECT_EQ(cosine_lr(0, 100, 5e-5, 1e-6), 5e-5);
  EXPECT_EQ(cosine_lr(100, 100, 5e-5, 1e-6), 1e-6);
  EXPECT_DOUBLE_EQ(cosine_lr(50, 100, 5e-5, 1e-6), 2.55e-5);
  EXPECT_THROW(cosine_lr(101, 100, 5e-5, 1e-6), RangeError);
  EXPECT_THROW(cosine_lr(0, 0, 5e-5, 1e-6), RangeError);
}

TEST(CosineLr, MonotoneNonIncreasing) {
  for (std::size_t total : {1u, 7u, 100u, 1001u}) {
    double prev = cosine_lr(0, total, 5e-5, 1e-6);
    for (std::size_t s = 1; s <= total; ++s) {
      const double lr = cosine_lr(s, total, 5e-5, 1e-6);
      EXPECT_LE(lr, prev);
      prev = lr;
    }
  }
}

TEST(Sgd, Examples) {
  ParameterStore params;
  params.set("w", Tensor({2, 2}, {1.0, -2.0, 0.5, 4.0}));
  params.set("b", Tensor({2}, {1.0, 1.0}));
  MomentumState state;
  sgd_step(params, {}, 1.0, {0.0, 0.9}, state);
  EXPECT_TRUE(params.get("w").bit_equal(Tensor({2, 2}, {1.0, -2.0, 0.5, 4.0})));

  sgd_step(params, {}, 1.0, {0.05, 0.9}, state);
  const std::vector<double> expect{0.95, -1.9, 0.475, 3.8};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(params.get("w")[i], expect[i]);
  EXPECT_EQ(params.get("b")[0], 1.0);  // rank-1 parameters skip decay

  // f(p) = p^2 at p = 1: grad 2, lr 0.1 -> 0.8
  ParameterStore q;
  q.set("p", Tensor({1, 1}, {1.0}));
  MomentumState qs;
  sgd_step(q, {{"p", Tensor({1, 1}, {2.0})}}, 0.1, {0.0, 0.0}, qs);
  EXPECT_DOUBLE_EQ(q.get("p")[0], 0.8);
}

TEST(Sgd, MomentumAccumulates) {
  ParameterStore q;
  q.set("p", Tensor({1}, {0.0}));
  MomentumState s;
  const std::map<std::string, Tensor> g{{"p", Tensor({1}, {1.0})}};
  sgd_step(q, g, 1.0, {0.0, 0.9}, s);
  sgd_step(q, g, 1.0, {0.0, 0.9}, s);
  EXPECT_DOUBLE_EQ(q.get("p")[0], -(1.0 + 1.9));
}

TEST(Sgd, Errors) {
  ParameterStore q;
  q.set("p", Tensor({2}, {0.0, 0.0}));
  MomentumState s;
  EXPECT_THROW(sgd_step(q, {{"p", Tensor({3}, {1.0, 1.0, 1.0})}}, 0.1, {}, s), ShapeError);
  EXPECT_THROW(sgd_step(q, {{"x", Tensor({2}, {1.0, 1.0})}}, 0.1, {}, s), ConfigError);
}

TEST(MultiTarget, IdenticalTargetsMatchSingleTarget) {
  std::mt19937_64 rng(6);
  const ImageDims dims{2, 1, 3, 16, 16};
  const ImageTensor target = random_image(dims, rng), recon = random_image(dims, rng);
  const MaskPlan plan = sample_mask(2, 4, 0.75, 1);
  const double single = reconstruction_loss(target, recon, plan, 8);
  const std::vector<double> both{single, single};
  EXPECT_EQ(multi_target_loss(both), single);
  Graph g;
  Var a = reconstruction_loss(target, g.constant(recon.tensor()), plan, 8);
  Var b = reconstruction_loss(target, g.constant(recon.tensor()), plan, 8);
  const std::vector<Var> vars{a, b};
  EXPECT_NEAR(multi_target_loss(vars).value().item(), single, 1e-15);
  EXPECT_THROW(multi_target_loss(std::span<const double>{}), RangeError);
  const std::vector<double> two{1.0, 3.0};
  EXPECT_EQ(multi_target_loss(two), 2.0);
}
