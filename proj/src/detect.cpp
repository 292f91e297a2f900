#include "nrl/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace nrl {

void ProbMatrix::validate() const {
  if (probs.size() != n * num_classes || given_labels.size() != n) {
    throw std::invalid_argument("prob matrix: inconsistent sizes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (given_labels[i] >= num_classes) {
      throw std::invalid_argument("prob matrix: given label out of range");
    }
    double row = 0.0;
    for (std::size_t j = 0; j < num_classes; ++j) {
      const double p = at(i, j);
      if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("prob matrix: entry outside [0, 1]");
      }
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-6) {
      throw std::invalid_argument("prob matrix: row " + std::to_string(i) +
                                  " sums to " + std::to_string(row));
    }
  }
}

std::vector<double> class_thresholds(const ProbMatrix& pm,
                                     std::vector<std::string>* warnings) {
  pm.validate();
  const std::size_t k = pm.num_classes;
  std::vector<double> sums(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  double global_sum = 0.0;
  for (std::size_t i = 0; i < pm.n; ++i) {
    const double self = pm.at(i, pm.given_labels[i]);
    sums[pm.given_labels[i]] += self;
    counts[pm.given_labels[i]]++;
    global_sum += self;
  }
  const double global_mean = pm.n ? global_sum / static_cast<double>(pm.n) : 0.0;
  std::vector<double> thresholds(k);
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) {
      thresholds[j] = global_mean;
      if (warnings) {
        warnings->push_back("class " + std::to_string(j) +
                            " has no examples; using global mean "
                            "self-probability as threshold");
      }
    } else {
      thresholds[j] = sums[j] / static_cast<double>(counts[j]);
    }
  }
  return thresholds;
}

ConfidentJoint confident_joint(const ProbMatrix& pm,
                               const std::vector<double>& thresholds) {
  pm.validate();
  const std::size_t k = pm.num_classes;
  if (thresholds.size() != k) {
    throw std::invalid_argument("confident_joint: thresholds size mismatch");
  }
  ConfidentJoint cj;
  cj.num_classes = k;
  cj.thresholds = thresholds;
  cj.counts.assign(k * k, 0);
  for (std::size_t i = 0; i < pm.n; ++i) {
    // best class among those meeting their threshold, ties to lowest index
    std::size_t best = k;
    double best_p = -1.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = pm.at(i, j);
      if (p >= thresholds[j] && p > best_p) {
        best = j;
        best_p = p;
      }
    }
    if (best < k) cj.counts[pm.given_labels[i] * k + best]++;
  }
  return cj;
}

std::vector<bool> detect_errors(const ProbMatrix& pm, const ConfidentJoint& cj) {
  pm.validate();
  const std::size_t k = pm.num_classes;
  std::vector<bool> flagged(pm.n, false);

  std::vector<std::vector<std::size_t>> by_given(k);
  for (std::size_t i = 0; i < pm.n; ++i) {
    by_given[pm.given_labels[i]].push_back(i);
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      const std::size_t quota = cj.at(a, b);
      if (quota == 0) continue;
      std::vector<std::size_t> cand = by_given[a];
      std::stable_sort(cand.begin(), cand.end(),
                       [&](std::size_t x, std::size_t y) {
                         if (pm.at(x, b) != pm.at(y, b)) {
                           return pm.at(x, b) > pm.at(y, b);
                         }
                         return x < y;
                       });
      const std::size_t take = std::min(quota, cand.size());
      for (std::size_t t = 0; t < take; ++t) flagged[cand[t]] = true;
    }
  }
  return flagged;
}

DetectionReport score_detection(const std::vector<bool>& flagged,
                                const std::vector<bool>& mask) {
  if (flagged.size() != mask.size()) {
    throw std::invalid_argument("score_detection: length mismatch " +
                                std::to_string(flagged.size()) + " vs " +
                                std::to_string(mask.size()));
  }
  DetectionReport rep;
  rep.flagged = flagged;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      flagged[i] ? ++rep.tp : ++rep.fn;
    } else {
      flagged[i] ? ++rep.fp : ++rep.tn;
    }
  }
  const std::size_t f1_denom = 2 * rep.tp + rep.fp + rep.fn;
  rep.f1 = f1_denom ? 2.0 * static_cast<double>(rep.tp) /
                          static_cast<double>(f1_denom)
                    : 0.0;  // no positives anywhere
  const double tpr =
      (rep.tp + rep.fn) ? static_cast<double>(rep.tp) /
                              static_cast<double>(rep.tp + rep.fn)
                        : 0.0;
  const double tnr =
      (rep.tn + rep.fp) ? static_cast<double>(rep.tn) /
                              static_cast<double>(rep.tn + rep.fp)
                        : 1.0;
  rep.balanced_accuracy = 0.5 * (tpr + tnr);
  return rep;
}

std::string DetectionReport::csv_row(const std::string& run_id, double eta,
                                     const std::string& method) const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.17g,%s,%.17g,%.17g,%zu,%zu,%zu,%zu",
                run_id.c_str(), eta, method.c_str(), f1, balanced_accuracy, tp,
                fp, tn, fn);
  return buf;
}

}  // namespace nrl
