#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nrl/adam.hpp"
#include "nrl/augment.hpp"
#include "nrl/dataset.hpp"
#include "nrl/model.hpp"

namespace nrl {

struct SslConfig {
  enum class Method { simclr, barlow_twins };
  Method method = Method::simclr;
  double tau = 0.5;       // simclr temperature
  double lambda = 5e-3;   // barlow twins redundancy weight
  std::size_t epochs = 25;
  std::size_t batch_size = 64;
  AdamConfig adam;

  void validate() const;
};

std::string method_name(SslConfig::Method m);
SslConfig::Method parse_method(const std::string& name);

struct PretrainResult {
  std::vector<double> epoch_mean_loss;
};

// Label-free pre-training over two augmented views per image. Consumes only
// the images of the split; labels are never read. `on_milestone(e)` fires
// after epoch e completes for each e in `milestones` (0 fires before
// training starts).
PretrainResult pretrain(
    Encoder& enc, ProjectionHead& proj, const NoisySplit& data,
    const SslConfig& cfg, const AugmentationConfig& aug,
    const ChannelStats& stats, std::uint64_t seed,
    const std::vector<std::size_t>& milestones = {},
    const std::function<void(std::size_t)>& on_milestone = nullptr);

}  // namespace nrl
