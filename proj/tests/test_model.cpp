#include <stdexcept>
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "fd_check.hpp"
#include "nrl/adam.hpp"
#include "nrl/augment.hpp"
#include "nrl/checkpoint.hpp"
#include "nrl/dataset.hpp"
#include "nrl/graph.hpp"
#include "nrl/model.hpp"
#include "nrl/rng.hpp"
#include "nrl/train.hpp"

using namespace nrl;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.image_hw = 8;
  cfg.stem_width = 4;
  cfg.stage_widths = {4, 8};
  cfg.blocks_per_stage = 1;
  return cfg;
}

Tensor standardized_batch(const LabeledDataset& ds,
                          const std::vector<std::size_t>& idx) {
  return make_batch(ds, idx, AugmentationConfig::none(),
                    compute_channel_stats(ds), 0, 0);
}

}  // namespace

TEST_CASE("encoder output shape is n x D") {
  const LabeledDataset ds = generate_synthetic(2, 4, 8, 1);
  Encoder enc(tiny_config(), 42);
  Graph g;
  const int y =
      enc.forward(g, g.input(standardized_batch(ds, {0, 1, 2})), NormMode::eval);
  CHECK(g.value(y).shape == std::vector<std::size_t>{3, enc.feature_dim()});
  CHECK(enc.feature_dim() == 8);
}

TEST_CASE("encoder requires an explicit batchnorm mode") {
  const LabeledDataset ds = generate_synthetic(2, 4, 8, 1);
  Encoder enc(tiny_config(), 42);
  Graph g;
  const int x = g.input(standardized_batch(ds, {0}));
  CHECK_THROWS(enc.forward(g, x, NormMode::unset));
}

TEST_CASE("eval-mode features are independent of batch composition") {
  const LabeledDataset ds = generate_synthetic(2, 8, 8, 2);
  Encoder enc(tiny_config(), 42);
  Graph g1, g2;
  const Tensor alone = g1.value(
      enc.forward(g1, g1.input(standardized_batch(ds, {5})), NormMode::eval));
  const Tensor grouped = g2.value(enc.forward(
      g2, g2.input(standardized_batch(ds, {0, 5, 7})), NormMode::eval));
  for (std::size_t d = 0; d < enc.feature_dim(); ++d) {
    CHECK(alone(0, d) == grouped(1, d));
  }
}

TEST_CASE("zero-initialized final block gain silences the residual branch") {
  const LabeledDataset ds = generate_synthetic(2, 4, 8, 3);
  Encoder a(tiny_config(), 7);
  Encoder b(tiny_config(), 7);
  // scrambling the branch weights must not matter while c2's gain is zero
  Param* w = b.store().find("stage0.block0.c1.conv.w");
  REQUIRE(w != nullptr);
  for (double& v : w->value) v = -v * 3.0;
  CHECK(b.store().find("stage0.block0.c2.bn.gamma")->value ==
        std::vector<double>(4, 0.0));
  Graph ga, gb;
  const Tensor ya = ga.value(
      a.forward(ga, ga.input(standardized_batch(ds, {0, 1})), NormMode::eval));
  const Tensor yb = gb.value(
      b.forward(gb, gb.input(standardized_batch(ds, {0, 1})), NormMode::eval));
  CHECK(ya.data == yb.data);
}

TEST_CASE("adam leaves parameters unchanged on zero gradient") {
  Param p("p", {2});
  p.value = {1.0, -2.0};
  Adam adam({&p}, AdamConfig{});
  p.grad_ready = true;
  adam.step();
  CHECK(p.value == std::vector<double>{1.0, -2.0});
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam first-step magnitude is bounded by the learning rate") {
  Param p("p", {3});
  p.value = {0.0, 1.0, -1.0};
  p.grad = {0.5, -3.0, 100.0};
  p.grad_ready = true;
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam adam({&p}, cfg);
  adam.step();
  CHECK(std::abs(p.value[0] - 0.0) <= cfg.lr * 1.001);
  CHECK(std::abs(p.value[1] - 1.0) <= cfg.lr * 1.001);
  CHECK(std::abs(p.value[2] + 1.0) <= cfg.lr * 1.001);
  // direction opposes the gradient
  CHECK(p.value[0] < 0.0);
  CHECK(p.value[1] > 1.0);
  CHECK(p.value[2] < -1.0);
}

TEST_CASE("adam optimizes (p - 3)^2 within 50 steps") {
  Param p("p", {1});
  p.value = {0.0};
  AdamConfig cfg;
  cfg.lr = 0.1;
  Adam adam({&p}, cfg);
  for (int i = 0; i < 50; ++i) {
    p.grad = {2.0 * (p.value[0] - 3.0)};
    p.grad_ready = true;
    adam.step();
  }
  CHECK(std::abs(p.value[0] - 3.0) < 0.5);
}

TEST_CASE("adam refuses to step on missing gradients") {
  Param p("p", {1});
  Adam adam({&p}, AdamConfig{});
  p.grad_ready = false;
  CHECK_THROWS_WITH(adam.step(), doctest::Contains("gradient missing"));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Encoder a(tiny_config(), 1234);
  // make the running stats non-trivial
  a.buffers()[0].running_mean[1] = 0.123456789;
  a.buffers()[2].running_var[3] = 7.5;
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(a);

  Encoder b(tiny_config(), 999);
  deserialize_checkpoint(bytes, b);
  const auto& pa = a.store().all();
  const auto& pb = b.store().all();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].value == pb[i].value);
  }
  for (std::size_t i = 0; i < a.buffers().size(); ++i) {
    CHECK(a.buffers()[i].running_mean == b.buffers()[i].running_mean);
    CHECK(a.buffers()[i].running_var == b.buffers()[i].running_var);
  }
  CHECK(serialize_checkpoint(b) == bytes);

  const std::string path = "/tmp/nrl_test_ckpt.bin";
  save_checkpoint(path, a);
  Encoder c(tiny_config(), 5);
  load_checkpoint(path, c);
  CHECK(serialize_checkpoint(c) == bytes);
  std::remove(path.c_str());
}

TEST_CASE("checkpoints reject mismatched encoder configs") {
  Encoder a(tiny_config(), 1);
  ModelConfig other = tiny_config();
  other.stage_widths = {4, 4};
  Encoder b(other, 1);
  CHECK_THROWS(deserialize_checkpoint(serialize_checkpoint(a), b));
}

TEST_CASE("end-to-end gradient through encoder and head matches fd") {
  const LabeledDataset ds = generate_synthetic(2, 4, 8, 11);
  Encoder enc(tiny_config(), 21);
  ClassifierHead head(enc.feature_dim(), 2, 22);
  const Tensor batch = standardized_batch(ds, {0, 5});
  const std::vector<std::size_t> targets{0, 1};

  const auto build = [&](Graph& g) {
    const int f = enc.forward(g, g.input(batch), NormMode::train);
    return g.softmax_cross_entropy(head.forward(g, f), targets);
  };
  std::vector<Param*> sampled{
      enc.store().find("stem.conv.w"),
      enc.store().find("stage1.block0.c1.conv.w"),
      enc.store().find("stage0.block0.c1.bn.gamma"),
      head.store().find("cls.w"),
      head.store().find("cls.b"),
  };
  for (Param* p : sampled) REQUIRE(p != nullptr);
  CHECK(nrl_test::fd_relative_error(sampled, build, 1e-4, 8) < 1e-3);
}

TEST_CASE("finetuning keeps the handed-off encoder identity at start") {
  const LabeledDataset ds = generate_synthetic(2, 8, 8, 13);
  Encoder pre(tiny_config(), 31);
  const std::vector<std::uint8_t> ckpt = serialize_checkpoint(pre);

  Encoder ft(tiny_config(), 77);
  deserialize_checkpoint(ckpt, ft);
  // the classifier head is fresh; the encoder is exactly the checkpoint
  CHECK(serialize_checkpoint(ft) == ckpt);

  ClassifierHead head(ft.feature_dim(), 2, 32);
  const NoisySplit split = inject_noise(ds, 0.25, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  const FinetuneResult res =
      finetune(ft, head, split, ds, compute_channel_stats(ds), cfg, 5);
  REQUIRE(res.train_loss.size() == 1);
  REQUIRE(res.test_acc.size() == 1);
  // training moved the encoder away from the checkpoint
  CHECK(serialize_checkpoint(ft) != ckpt);
}

TEST_CASE("training paths are deterministic under a fixed seed") {
  const LabeledDataset ds = generate_synthetic(2, 8, 8, 17);
  const ChannelStats stats = compute_channel_stats(ds);
  const NoisySplit split = inject_noise(ds, 0.25, 3);
  const auto run = [&] {
    Encoder enc(tiny_config(), 31);
    ClassifierHead head(enc.feature_dim(), 2, 32);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    finetune(enc, head, split, ds, stats, cfg, 5);
    return serialize_checkpoint(enc);
  };
  CHECK(run() == run());
}
