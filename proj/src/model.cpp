#include "nrl/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nrl {
namespace {

void kaiming_uniform(Param& p, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : p.value) v = rng.uniform(-bound, bound);
}

void linear_uniform(Param& p, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : p.value) v = rng.uniform(-bound, bound);
}

}  // namespace

std::string ModelConfig::echo() const {
  std::ostringstream os;
  os << "image_hw=" << image_hw << ";in_channels=" << in_channels
     << ";stem_width=" << stem_width << ";stage_widths=";
  for (std::size_t i = 0; i < stage_widths.size(); ++i) {
    if (i) os << ",";
    os << stage_widths[i];
  }
  os << ";blocks_per_stage=" << blocks_per_stage
     << ";bn_momentum=" << bn_momentum;
  return os.str();
}

Param& ParamStore::add(std::string name, std::vector<std::size_t> shape) {
  if (find(name)) throw std::logic_error("duplicate parameter name: " + name);
  params_.emplace_back(std::move(name), std::move(shape));
  return params_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (Param& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParamStore::zero_grad() {
  for (Param& p : params_) {
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
    p.grad_ready = false;
  }
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.size();
  return n;
}

Encoder::ConvBn Encoder::make_conv_bn(const std::string& name,
                                      std::size_t out_ch, std::size_t in_ch,
                                      std::size_t k, std::size_t stride,
                                      std::size_t pad, Rng& rng,
                                      bool zero_gamma) {
  ConvBn cb;
  cb.w = &store_.add(name + ".conv.w", {out_ch, in_ch, k, k});
  kaiming_uniform(*cb.w, in_ch * k * k, rng);
  cb.gamma = &store_.add(name + ".bn.gamma", {out_ch});
  cb.beta = &store_.add(name + ".bn.beta", {out_ch});
  std::fill(cb.gamma->value.begin(), cb.gamma->value.end(),
            zero_gamma ? 0.0 : 1.0);
  buffers_.emplace_back(name + ".bn", out_ch);
  cb.buf = &buffers_.back();
  cb.stride = stride;
  cb.pad = pad;
  return cb;
}

int Encoder::apply_conv_bn(Graph& g, const ConvBn& cb, int x,
                           NormMode mode) const {
  const int w = g.param(*cb.w);
  const int y = g.conv2d(x, w, cb.stride, cb.pad);
  return g.batchnorm2d(y, g.param(*cb.gamma), g.param(*cb.beta), *cb.buf, mode,
                       cfg_.bn_momentum);
}

Encoder::Encoder(ModelConfig cfg, std::uint64_t init_seed)
    : cfg_(std::move(cfg)) {
  if (cfg_.stage_widths.empty()) {
    throw std::invalid_argument("encoder needs at least one stage");
  }
  Rng rng(init_seed);
  stem_ = make_conv_bn("stem", cfg_.stem_width, cfg_.in_channels, 3, 1, 1, rng,
                       false);
  std::size_t in_ch = cfg_.stem_width;
  for (std::size_t s = 0; s < cfg_.stage_widths.size(); ++s) {
    const std::size_t width = cfg_.stage_widths[s];
    for (std::size_t b = 0; b < cfg_.blocks_per_stage; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      const std::string name =
          "stage" + std::to_string(s) + ".block" + std::to_string(b);
      Block blk;
      blk.c1 = make_conv_bn(name + ".c1", width, in_ch, 3, stride, 1, rng,
                            false);
      // zero-init final gain so each block starts as its skip connection
      blk.c2 = make_conv_bn(name + ".c2", width, width, 3, 1, 1, rng, true);
      if (stride != 1 || in_ch != width) {
        blk.proj =
            make_conv_bn(name + ".proj", width, in_ch, 1, stride, 0, rng,
                         false);
      }
      blocks_.push_back(std::move(blk));
      in_ch = width;
    }
  }
}

int Encoder::forward(Graph& g, int x, NormMode mode) {
  if (mode == NormMode::unset) {
    throw std::invalid_argument("encoder forward: batchnorm mode unset");
  }
  int h = g.relu(apply_conv_bn(g, stem_, x, mode));
  for (const Block& blk : blocks_) {
    const int skip = blk.proj ? apply_conv_bn(g, *blk.proj, h, mode) : h;
    int main = g.relu(apply_conv_bn(g, blk.c1, h, mode));
    main = apply_conv_bn(g, blk.c2, main, mode);
    h = g.relu(g.add(main, skip));
  }
  return g.global_avg_pool(h);
}

ProjectionHead::ProjectionHead(std::size_t in_dim, std::size_t proj_dim,
                               std::uint64_t seed)
    : proj_dim_(proj_dim) {
  if (proj_dim < 2) throw std::invalid_argument("projection dim must be >= 2");
  Rng rng(seed);
  w1_ = &store_.add("proj.w1", {in_dim, proj_dim});
  b1_ = &store_.add("proj.b1", {proj_dim});
  w2_ = &store_.add("proj.w2", {proj_dim, proj_dim});
  b2_ = &store_.add("proj.b2", {proj_dim});
  linear_uniform(*w1_, in_dim, rng);
  linear_uniform(*b1_, in_dim, rng);
  linear_uniform(*w2_, proj_dim, rng);
  linear_uniform(*b2_, proj_dim, rng);
}

int ProjectionHead::forward(Graph& g, int features) {
  int h = g.add(g.matmul(features, g.param(*w1_)), g.param(*b1_));
  h = g.relu(h);
  return g.add(g.matmul(h, g.param(*w2_)), g.param(*b2_));
}

ClassifierHead::ClassifierHead(std::size_t in_dim, std::size_t num_classes,
                               std::uint64_t seed)
    : num_classes_(num_classes) {
  if (num_classes < 2) throw std::invalid_argument("classifier needs K >= 2");
  Rng rng(seed);
  w_ = &store_.add("cls.w", {in_dim, num_classes});
  b_ = &store_.add("cls.b", {num_classes});
  linear_uniform(*w_, in_dim, rng);
  linear_uniform(*b_, in_dim, rng);
}

int ClassifierHead::forward(Graph& g, int features) {
  return g.add(g.matmul(features, g.param(*w_)), g.param(*b_));
}

std::vector<Param*> collect_params(std::initializer_list<ParamStore*> stores) {
  std::vector<Param*> out;
  for (ParamStore* s : stores) {
    for (Param& p : s->all()) out.push_back(&p);
  }
  return out;
}

}  // namespace nrl
