#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "nrl/graph.hpp"

namespace nrl_test {

// Central finite-difference gradient check for a scalar loss over a set of
// parameters. `build` must construct the loss node from scratch on each call
// (parameter values are perturbed in place between calls).
// Returns the worst relative error over all checked coordinates.
inline double fd_relative_error(std::vector<nrl::Param*> params,
                                const std::function<int(nrl::Graph&)>& build,
                                double step = 1e-4,
                                std::size_t max_coords_per_param = 64) {
  const auto eval = [&] {
    nrl::Graph g;
    return g.value(build(g))(0);
  };

  nrl::Graph g;
  const int loss = build(g);
  g.backward(loss);

  double worst = 0.0;
  for (nrl::Param* p : params) {
    const std::size_t stride =
        p->size() <= max_coords_per_param ? 1 : p->size() / max_coords_per_param;
    for (std::size_t i = 0; i < p->size(); i += stride) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double up = eval();
      p->value[i] = saved - step;
      const double down = eval();
      p->value[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = p->grad[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

}  // namespace nrl_test
