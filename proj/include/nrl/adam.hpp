#pragma once

#include <cstddef>
#include <vector>

#include "nrl/graph.hpp"

namespace nrl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction over a fixed parameter set.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg);

  // Consumes grads populated by backward; throws if they are missing.
  void step();

  std::size_t step_count() const { return step_; }

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_ = 0;
};

}  // namespace nrl
