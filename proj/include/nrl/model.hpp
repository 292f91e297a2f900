#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "nrl/graph.hpp"
#include "nrl/rng.hpp"

namespace nrl {

struct ModelConfig {
  std::size_t image_hw = 16;
  std::size_t in_channels = 3;
  std::size_t stem_width = 16;
  std::vector<std::size_t> stage_widths = {16, 32, 64};
  std::size_t blocks_per_stage = 1;
  double bn_momentum = 0.9;

  std::string echo() const;
};

class ParamStore {
 public:
  Param& add(std::string name, std::vector<std::size_t> shape);
  Param* find(const std::string& name);
  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }
  void zero_grad();
  std::size_t total_size() const;

 private:
  std::deque<Param> params_;
};

// Reduced-scale residual CNN: conv stem, one or more basic blocks per stage
// (two 3x3 convs + skip, batchnorm + relu), global average pooling.
class Encoder {
 public:
  Encoder(ModelConfig cfg, std::uint64_t init_seed);

  int forward(Graph& g, int x, NormMode mode);
  std::size_t feature_dim() const { return cfg_.stage_widths.back(); }
  const ModelConfig& config() const { return cfg_; }

  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  std::deque<BnBuffer>& buffers() { return buffers_; }
  const std::deque<BnBuffer>& buffers() const { return buffers_; }

 private:
  struct ConvBn {
    Param* w = nullptr;
    Param* gamma = nullptr;
    Param* beta = nullptr;
    BnBuffer* buf = nullptr;
    std::size_t stride = 1;
    std::size_t pad = 1;
  };
  struct Block {
    ConvBn c1, c2;
    std::optional<ConvBn> proj;
  };

  ConvBn make_conv_bn(const std::string& name, std::size_t out_ch,
                      std::size_t in_ch, std::size_t k, std::size_t stride,
                      std::size_t pad, Rng& rng, bool zero_gamma);
  int apply_conv_bn(Graph& g, const ConvBn& cb, int x, NormMode mode) const;

  ModelConfig cfg_;
  ParamStore store_;
  std::deque<BnBuffer> buffers_;
  ConvBn stem_;
  std::vector<Block> blocks_;
};

// Two-layer MLP D -> P -> P used only during self-supervised pre-training.
class ProjectionHead {
 public:
  ProjectionHead(std::size_t in_dim, std::size_t proj_dim, std::uint64_t seed);
  int forward(Graph& g, int features);
  std::size_t out_dim() const { return proj_dim_; }
  ParamStore& store() { return store_; }

 private:
  std::size_t proj_dim_;
  ParamStore store_;
  Param* w1_;
  Param* b1_;
  Param* w2_;
  Param* b2_;
};

// Linear D -> K classifier for supervised fine-tuning.
class ClassifierHead {
 public:
  ClassifierHead(std::size_t in_dim, std::size_t num_classes,
                 std::uint64_t seed);
  int forward(Graph& g, int features);
  std::size_t num_classes() const { return num_classes_; }
  ParamStore& store() { return store_; }

 private:
  std::size_t num_classes_;
  ParamStore store_;
  Param* w_;
  Param* b_;
};

std::vector<Param*> collect_params(std::initializer_list<ParamStore*> stores);

}  // namespace nrl
