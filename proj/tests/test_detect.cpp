#include <stdexcept>
#include <doctest.h>

#include <algorithm>
#include <vector>

#include "cl_reference.hpp"
#include "nrl/detect.hpp"
#include "nrl/rng.hpp"

using namespace nrl;
using nrl_test::cl_reference;
using nrl_test::make_pm;

namespace {

std::vector<std::vector<double>> dirichlet_rows(Rng& rng, std::size_t n,
                                                std::size_t k) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(k));
  for (auto& row : rows) {
    double sum = 0.0;
    for (double& v : row) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      v = -std::log(u);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return rows;
}

}  // namespace

TEST_CASE("thresholds of a perfectly confident model are 1") {
  const auto pm = make_pm({{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}}, {0, 1, 0});
  for (const double t : class_thresholds(pm)) {
    CHECK(t == doctest::Approx(1.0));
  }
}

TEST_CASE("thresholds of a uniform model are 1/K") {
  const auto pm = make_pm(
      {{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}}, {1, 3});
  for (const double t : class_thresholds(pm)) {
    CHECK(t == doctest::Approx(0.25));
  }
}

TEST_CASE("thresholds match hand arithmetic") {
  const auto pm = make_pm(
      {{0.9, 0.1}, {0.7, 0.3}, {0.2, 0.8}, {0.4, 0.6}}, {0, 0, 1, 1});
  const std::vector<double> t = class_thresholds(pm);
  CHECK(t[0] == doctest::Approx(0.8));
  CHECK(t[1] == doctest::Approx(0.7));
}

TEST_CASE("empty class falls back to the global mean with a warning") {
  const auto pm = make_pm({{0.9, 0.1}, {0.7, 0.3}}, {0, 0});
  std::vector<std::string> warnings;
  const std::vector<double> t = class_thresholds(pm, &warnings);
  CHECK(t[0] == doctest::Approx(0.8));
  CHECK(t[1] == doctest::Approx(0.8));
  CHECK(!warnings.empty());
}

TEST_CASE("confident joint of a perfect clean model is diagonal") {
  // equal self-confidence per class, so every example meets its threshold
  const auto pm = make_pm(
      {{0.9, 0.1}, {0.9, 0.1}, {0.1, 0.9}, {0.1, 0.9}}, {0, 0, 1, 1});
  const ConfidentJoint cj = confident_joint(pm, class_thresholds(pm));
  CHECK(cj.at(0, 0) == 2);
  CHECK(cj.at(1, 1) == 2);
  CHECK(cj.at(0, 1) == 0);
  CHECK(cj.at(1, 0) == 0);
}

TEST_CASE("single confident example lands in its cell") {
  const auto pm = make_pm({{0.9, 0.1}}, {0});
  ConfidentJoint cj;
  cj.num_classes = 2;
  cj.thresholds = {0.5, 0.5};
  cj.counts = {0, 0, 0, 0};
  cj = confident_joint(pm, {0.5, 0.5});
  CHECK(cj.at(0, 0) == 1);
}

TEST_CASE("six-example joint matches the brute-force reference") {
  const std::vector<std::vector<double>> probs{
      {0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.2, 0.3, 0.5},
      {0.6, 0.3, 0.1}, {0.1, 0.2, 0.7}, {0.3, 0.4, 0.3}};
  const std::vector<std::size_t> given{0, 0, 1, 1, 2, 2};
  const auto pm = make_pm(probs, given);
  const auto ref = cl_reference(probs, given);
  const std::vector<double> t = class_thresholds(pm);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(t[j] == doctest::Approx(ref.thresholds[j]).epsilon(1e-12));
  }
  const ConfidentJoint cj = confident_joint(pm, t);
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t s = 0; s < 3; ++s) {
      CHECK(cj.at(g, s) == ref.joint[g][s]);
    }
  }
  CHECK(detect_errors(pm, cj) == ref.flagged);
}

TEST_CASE("no off-diagonal mass means no flags") {
  const auto pm = make_pm(
      {{0.9, 0.1}, {0.8, 0.2}, {0.1, 0.9}}, {0, 0, 1});
  const ConfidentJoint cj = confident_joint(pm, class_thresholds(pm));
  const std::vector<bool> flags = detect_errors(pm, cj);
  CHECK(std::none_of(flags.begin(), flags.end(), [](bool b) { return b; }));
}

TEST_CASE("a single confidently cross-labeled example is flagged") {
  // example 4 is given label 0 but the model is confident it is class 1
  const std::vector<std::vector<double>> probs{
      {0.9, 0.1}, {0.8, 0.2}, {0.1, 0.9}, {0.2, 0.8}, {0.05, 0.95}};
  const std::vector<std::size_t> given{0, 0, 1, 1, 0};
  const auto pm = make_pm(probs, given);
  const ConfidentJoint cj = confident_joint(pm, class_thresholds(pm));
  const std::vector<bool> flags = detect_errors(pm, cj);
  CHECK(flags == cl_reference(probs, given).flagged);
  CHECK(flags[4]);
  CHECK(std::count(flags.begin(), flags.end(), true) == 1);
}

TEST_CASE("scoring matches the F1 and balanced-accuracy definitions") {
  SUBCASE("exact detection") {
    const std::vector<bool> mask{true, false, true, false};
    const DetectionReport r = score_detection(mask, mask);
    CHECK(r.f1 == doctest::Approx(1.0));
    CHECK(r.balanced_accuracy == doctest::Approx(1.0));
  }
  SUBCASE("no flags on a corrupted set") {
    const DetectionReport r =
        score_detection({false, false, false}, {true, false, false});
    CHECK(r.f1 == doctest::Approx(0.0));
    CHECK(r.balanced_accuracy == doctest::Approx(0.5));
  }
  SUBCASE("hand-built confusion") {
    // TP=3 FP=1 FN=2 TN=4
    const std::vector<bool> flagged{true, true, true, true,
                                    false, false, false, false, false, false};
    const std::vector<bool> mask{true, true, true, false,
                                 true, true, false, false, false, false};
    const DetectionReport r = score_detection(flagged, mask);
    CHECK(r.tp == 3);
    CHECK(r.fp == 1);
    CHECK(r.fn == 2);
    CHECK(r.tn == 4);
    CHECK(r.f1 == doctest::Approx(6.0 / 9.0));
    CHECK(r.balanced_accuracy == doctest::Approx(0.7));
  }
  SUBCASE("nothing corrupted, nothing flagged") {
    const DetectionReport r = score_detection({false, false}, {false, false});
    CHECK(r.f1 == 0.0);
    CHECK(r.balanced_accuracy == doctest::Approx(0.5));
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS(score_detection({true}, {true, false}));
  }
}

TEST_CASE("pipeline is invariant to row renormalization") {
  Rng rng(61);
  const std::size_t n = 40, k = 3;
  auto probs = dirichlet_rows(rng, n, k);
  std::vector<std::size_t> given(n);
  for (std::size_t& g : given) g = rng.uniform_index(k);
  const auto pm = make_pm(probs, given);

  // scale each row by a positive constant, then renormalize
  auto scaled = probs;
  for (auto& row : scaled) {
    const double c = rng.uniform(0.5, 3.0);
    double sum = 0.0;
    for (double& v : row) {
      v *= c;
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  const auto pm2 = make_pm(scaled, given);

  const std::vector<double> t1 = class_thresholds(pm);
  const std::vector<double> t2 = class_thresholds(pm2);
  for (std::size_t j = 0; j < k; ++j) {
    CHECK(t1[j] == doctest::Approx(t2[j]).epsilon(1e-9));
  }
  CHECK(detect_errors(pm, confident_joint(pm, t1)) ==
        detect_errors(pm2, confident_joint(pm2, t2)));
}

TEST_CASE("library agrees exactly with the reference on random instances") {
  Rng rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(3);
    const std::size_t n = k + rng.uniform_index(60);
    const auto probs = dirichlet_rows(rng, n, k);
    std::vector<std::size_t> given(n);
    for (std::size_t& g : given) g = rng.uniform_index(k);
    const auto pm = make_pm(probs, given);
    const auto ref = cl_reference(probs, given);

    const std::vector<double> t = class_thresholds(pm);
    for (std::size_t j = 0; j < k; ++j) {
      REQUIRE(t[j] == doctest::Approx(ref.thresholds[j]).epsilon(1e-12));
    }
    const ConfidentJoint cj = confident_joint(pm, t);
    for (std::size_t g = 0; g < k; ++g) {
      for (std::size_t s = 0; s < k; ++s) {
        REQUIRE(cj.at(g, s) == ref.joint[g][s]);
      }
    }
    REQUIRE(detect_errors(pm, cj) == ref.flagged);
  }
}

TEST_CASE("probability matrices must have rows summing to one") {
  ProbMatrix pm;
  pm.n = 1;
  pm.num_classes = 2;
  pm.probs = {0.9, 0.3};
  pm.given_labels = {0};
  CHECK_THROWS(pm.validate());
}
