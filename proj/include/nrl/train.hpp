#pragma once

#include <cstdint>
#include <vector>

#include "nrl/adam.hpp"
#include "nrl/augment.hpp"
#include "nrl/dataset.hpp"
#include "nrl/detect.hpp"
#include "nrl/model.hpp"

namespace nrl {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  AdamConfig adam;
  AugmentationConfig aug = AugmentationConfig::supervised_default();
};

struct FinetuneResult {
  std::vector<double> train_loss;  // mean loss per epoch
  std::vector<double> test_acc;    // clean-test accuracy per epoch, percent
};

// Assembles an NCHW batch of augmented, standardized images. Per-example RNG
// streams derive from (seed, epoch, dataset index).
Tensor make_batch(const LabeledDataset& ds,
                  const std::vector<std::size_t>& indices,
                  const AugmentationConfig& aug, const ChannelStats& stats,
                  std::uint64_t seed, std::size_t epoch);

// Supervised training of encoder + classifier on the noisy labels; the
// clean test set is used for the accuracy trace only.
FinetuneResult finetune(Encoder& enc, ClassifierHead& head,
                        const NoisySplit& train, const LabeledDataset& test,
                        const ChannelStats& stats, const TrainConfig& cfg,
                        std::uint64_t seed);

// Clean-test accuracy in percent (eval-mode batchnorm, no augmentation).
double evaluate_accuracy(Encoder& enc, ClassifierHead& head,
                         const LabeledDataset& test, const ChannelStats& stats);

// Softmax probabilities over a dataset paired with the labels it was given.
ProbMatrix predict_probs(Encoder& enc, ClassifierHead& head,
                         const LabeledDataset& images,
                         const std::vector<std::size_t>& given_labels,
                         const ChannelStats& stats);

}  // namespace nrl
