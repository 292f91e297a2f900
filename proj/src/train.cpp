#include "nrl/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace nrl {
namespace {

constexpr std::size_t kEvalBatch = 128;

// forward a standardized batch in eval mode, returning logits
Tensor eval_logits(Encoder& enc, ClassifierHead& head, const LabeledDataset& ds,
                   const std::vector<std::size_t>& indices,
                   const ChannelStats& stats) {
  const Tensor batch = make_batch(ds, indices, AugmentationConfig::none(),
                                  stats, 0, 0);
  Graph g;
  const int x = g.input(batch);
  const int logits = head.forward(g, enc.forward(g, x, NormMode::eval));
  return g.value(logits);
}

}  // namespace

Tensor make_batch(const LabeledDataset& ds,
                  const std::vector<std::size_t>& indices,
                  const AugmentationConfig& aug, const ChannelStats& stats,
                  std::uint64_t seed, std::size_t epoch) {
  const std::size_t n = indices.size();
  const std::size_t h = ds.height, w = ds.width;
  Tensor batch({n, 3, h, w});
  for (std::size_t i = 0; i < n; ++i) {
    Rng stream(mix_seed(mix_seed(seed, epoch), indices[i]));
    const std::vector<double> hwc =
        augment_view(ds.image(indices[i]), h, w, aug, stats, stream);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          batch.at4(i, c, y, x) = hwc[(y * w + x) * 3 + c];
        }
      }
    }
  }
  return batch;
}

FinetuneResult finetune(Encoder& enc, ClassifierHead& head,
                        const NoisySplit& train, const LabeledDataset& test,
                        const ChannelStats& stats, const TrainConfig& cfg,
                        std::uint64_t seed) {
  if (cfg.epochs == 0) {
    throw std::invalid_argument("finetune: epochs must be positive");
  }
  const std::size_t n = train.base.count();
  Adam adam(collect_params({&enc.store(), &head.store()}), cfg.adam);
  const std::uint64_t aug_seed = mix_seed(seed, "ft-augment");

  FinetuneResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(mix_seed(seed, "ft-shuffle"), epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, n);
      const std::vector<std::size_t> idx(order.begin() + start,
                                         order.begin() + end);
      std::vector<std::size_t> targets(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        targets[i] = train.noisy_labels[idx[i]];
      }
      enc.store().zero_grad();
      head.store().zero_grad();
      Graph g;
      const int x = g.input(make_batch(train.base, idx, cfg.aug, stats,
                                       aug_seed, epoch));
      const int logits = head.forward(g, enc.forward(g, x, NormMode::train));
      const int loss = g.softmax_cross_entropy(logits, std::move(targets));
      loss_sum += g.value(loss)(0);
      ++batches;
      g.backward(loss);
      adam.step();
    }
    result.train_loss.push_back(loss_sum / static_cast<double>(batches));
    result.test_acc.push_back(evaluate_accuracy(enc, head, test, stats));
  }
  return result;
}

double evaluate_accuracy(Encoder& enc, ClassifierHead& head,
                         const LabeledDataset& test,
                         const ChannelStats& stats) {
  const std::size_t n = test.count();
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += kEvalBatch) {
    const std::size_t end = std::min(start + kEvalBatch, n);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = eval_logits(enc, head, test, idx, stats);
    const std::size_t k = logits.shape[1];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (logits(i, j) > logits(i, best)) best = j;
      }
      if (best == test.labels[idx[i]]) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

ProbMatrix predict_probs(Encoder& enc, ClassifierHead& head,
                         const LabeledDataset& images,
                         const std::vector<std::size_t>& given_labels,
                         const ChannelStats& stats) {
  const std::size_t n = images.count();
  if (given_labels.size() != n) {
    throw std::invalid_argument("predict_probs: label count mismatch");
  }
  ProbMatrix pm;
  pm.n = n;
  pm.num_classes = head.num_classes();
  pm.given_labels = given_labels;
  pm.probs.resize(n * pm.num_classes);
  for (std::size_t start = 0; start < n; start += kEvalBatch) {
    const std::size_t end = std::min(start + kEvalBatch, n);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = eval_logits(enc, head, images, idx, stats);
    const std::size_t k = logits.shape[1];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double mx = logits(i, 0);
      for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits(i, j));
      double z = 0.0;
      for (std::size_t j = 0; j < k; ++j) z += std::exp(logits(i, j) - mx);
      for (std::size_t j = 0; j < k; ++j) {
        pm.probs[idx[i] * k + j] = std::exp(logits(i, j) - mx) / z;
      }
    }
  }
  return pm;
}

}  // namespace nrl
