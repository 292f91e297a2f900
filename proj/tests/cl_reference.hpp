#pragma once

#include <cstddef>
#include <vector>

#include "nrl/detect.hpp"

namespace nrl_test {

// Independently coded confident-learning reference: straightforward loops,
// no shared code with the library implementation.
struct ClReference {
  std::vector<double> thresholds;
  std::vector<std::vector<std::size_t>> joint;  // K x K
  std::vector<bool> flagged;
};

inline ClReference cl_reference(const std::vector<std::vector<double>>& probs,
                                const std::vector<std::size_t>& given) {
  const std::size_t n = probs.size();
  const std::size_t k = probs[0].size();
  ClReference out;

  out.thresholds.assign(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  double global_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.thresholds[given[i]] += probs[i][given[i]];
    ++counts[given[i]];
    global_sum += probs[i][given[i]];
  }
  for (std::size_t j = 0; j < k; ++j) {
    out.thresholds[j] = counts[j] > 0
                            ? out.thresholds[j] / static_cast<double>(counts[j])
                            : global_sum / static_cast<double>(n);
  }

  // membership: argmax over classes meeting their threshold, lowest index on
  // ties; no qualifying class -> contributes nothing
  out.joint.assign(k, std::vector<std::size_t>(k, 0));
  std::vector<int> member(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    int best = -1;
    for (std::size_t j = 0; j < k; ++j) {
      if (probs[i][j] >= out.thresholds[j] &&
          (best < 0 || probs[i][j] > probs[i][static_cast<std::size_t>(best)])) {
        best = static_cast<int>(j);
      }
    }
    member[i] = best;
    if (best >= 0) {
      ++out.joint[given[i]][static_cast<std::size_t>(best)];
    }
  }

  // prune by noise rate: per off-diagonal cell (g, s), flag the joint[g][s]
  // examples with given label g ranked by probs[., s] descending, lowest
  // index first on ties
  out.flagged.assign(n, false);
  for (std::size_t g = 0; g < k; ++g) {
    for (std::size_t s = 0; s < k; ++s) {
      if (g == s || out.joint[g][s] == 0) continue;
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < n; ++i) {
        if (given[i] == g) candidates.push_back(i);
      }
      std::size_t remaining = out.joint[g][s];
      while (remaining > 0 && !candidates.empty()) {
        std::size_t best = candidates[0];
        for (const std::size_t i : candidates) {
          if (probs[i][s] > probs[best][s]) best = i;
        }
        out.flagged[best] = true;
        candidates.erase(
            std::find(candidates.begin(), candidates.end(), best));
        --remaining;
      }
    }
  }
  return out;
}

inline nrl::ProbMatrix make_pm(const std::vector<std::vector<double>>& probs,
                               const std::vector<std::size_t>& given) {
  nrl::ProbMatrix pm;
  pm.n = probs.size();
  pm.num_classes = probs[0].size();
  pm.given_labels = given;
  for (const auto& row : probs) {
    pm.probs.insert(pm.probs.end(), row.begin(), row.end());
  }
  pm.validate();
  return pm;
}

}  // namespace nrl_test
