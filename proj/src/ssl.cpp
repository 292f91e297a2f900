#include "nrl/ssl.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "nrl/train.hpp"

namespace nrl {

void SslConfig::validate() const {
  if (method == Method::simclr && tau <= 0.0) {
    throw std::invalid_argument("ssl config: tau must be positive");
  }
  if (lambda < 0.0) {
    throw std::invalid_argument("ssl config: lambda must be non-negative");
  }
  if (batch_size < 2) {
    throw std::invalid_argument("ssl config: batch_size must be >= 2");
  }
}

std::string method_name(SslConfig::Method m) {
  return m == SslConfig::Method::simclr ? "simclr" : "barlow_twins";
}

SslConfig::Method parse_method(const std::string& name) {
  if (name == "simclr") return SslConfig::Method::simclr;
  if (name == "barlow_twins") return SslConfig::Method::barlow_twins;
  throw std::invalid_argument("unknown ssl method: " + name);
}

PretrainResult pretrain(Encoder& enc, ProjectionHead& proj,
                        const NoisySplit& data, const SslConfig& cfg,
                        const AugmentationConfig& aug,
                        const ChannelStats& stats, std::uint64_t seed,
                        const std::vector<std::size_t>& milestones,
                        const std::function<void(std::size_t)>& on_milestone) {
  cfg.validate();
  // only the images are consumed here; reading data.noisy_labels inside this
  // loop would violate the label-free contract
  const LabeledDataset& images = data.base;
  const std::size_t n = images.count();

  auto at_milestone = [&](std::size_t epoch) {
    if (on_milestone &&
        std::find(milestones.begin(), milestones.end(), epoch) !=
            milestones.end()) {
      on_milestone(epoch);
    }
  };
  at_milestone(0);

  Adam adam(collect_params({&enc.store(), &proj.store()}), cfg.adam);
  const std::uint64_t seed_a = mix_seed(seed, "ssl-view-a");
  const std::uint64_t seed_b = mix_seed(seed, "ssl-view-b");

  PretrainResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(mix_seed(seed, "ssl-shuffle"), epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 2 <= n; start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, n);
      if (end - start < 2) break;  // a contrastive batch needs >= 2 pairs
      const std::vector<std::size_t> idx(order.begin() + start,
                                         order.begin() + end);
      const std::size_t m = idx.size();

      enc.store().zero_grad();
      proj.store().zero_grad();
      try {
        Graph g;
        const int xa =
            g.input(make_batch(images, idx, aug, stats, seed_a, epoch));
        const int xb =
            g.input(make_batch(images, idx, aug, stats, seed_b, epoch));
        const int x = g.concat_batch(xa, xb);
        const int z = proj.forward(g, enc.forward(g, x, NormMode::train));
        const int za = g.slice_rows(z, 0, m);
        const int zb = g.slice_rows(z, m, 2 * m);
        const int loss = cfg.method == SslConfig::Method::simclr
                             ? g.nt_xent(za, zb, cfg.tau)
                             : g.barlow_twins(za, zb, cfg.lambda);
        loss_sum += g.value(loss)(0);
        ++batches;
        g.backward(loss);
        adam.step();
      } catch (const std::exception& e) {
        throw std::runtime_error("pretrain failed at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batches + 1) + ": " + e.what());
      }
    }
    result.epoch_mean_loss.push_back(
        batches ? loss_sum / static_cast<double>(batches) : 0.0);
    at_milestone(epoch);
  }
  return result;
}

}  // namespace nrl
