#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nrl {

// Predicted class probabilities paired with the labels the examples were
// given (which may be wrong).
struct ProbMatrix {
  std::size_t n = 0;
  std::size_t num_classes = 0;
  std::vector<double> probs;  // n x K, rows sum to 1
  std::vector<std::size_t> given_labels;

  void validate() const;
  double at(std::size_t i, std::size_t j) const {
    return probs[i * num_classes + j];
  }
};

struct ConfidentJoint {
  std::size_t num_classes = 0;
  std::vector<std::size_t> counts;  // K x K, row = given label, col = suggested
  std::vector<double> thresholds;

  std::size_t at(std::size_t given, std::size_t suggested) const {
    return counts[given * num_classes + suggested];
  }
};

struct DetectionReport {
  std::vector<bool> flagged;
  double f1 = 0.0;
  double balanced_accuracy = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  // run id, eta, method, f1, balanced_accuracy, tp, fp, tn, fn
  std::string csv_row(const std::string& run_id, double eta,
                      const std::string& method) const;
};

// thresholds[j] = mean self-probability over examples given label j. A class
// with no examples falls back to the global mean self-probability and emits
// a warning record.
std::vector<double> class_thresholds(const ProbMatrix& pm,
                                     std::vector<std::string>* warnings = nullptr);

ConfidentJoint confident_joint(const ProbMatrix& pm,
                               const std::vector<double>& thresholds);

// prune-by-noise-rate: per off-diagonal cell (i, j), flags the counts[i][j]
// examples with given label i ranked by probs[., j], ties by lower index.
std::vector<bool> detect_errors(const ProbMatrix& pm, const ConfidentJoint& cj);

DetectionReport score_detection(const std::vector<bool>& flagged,
                                const std::vector<bool>& mask);

}  // namespace nrl
