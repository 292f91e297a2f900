// Acceptance gate: one check per criterion, each printing a PASS/FAIL line.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cl_reference.hpp"
#include "fd_check.hpp"
#include "nrl/checkpoint.hpp"
#include "nrl/dataset.hpp"
#include "nrl/detect.hpp"
#include "nrl/experiment.hpp"
#include "nrl/graph.hpp"
#include "nrl/model.hpp"
#include "nrl/rng.hpp"
#include "nrl/ssl.hpp"

using namespace nrl;

namespace {

int failures = 0;

void report(int number, const std::string& what, bool ok, double seconds,
            const std::string& detail) {
  std::printf("%s criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL",
              number, what.c_str(), seconds,
              detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++failures;
}

template <typename F>
void criterion(int number, const std::string& what, F body) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report(number, what, ok, seconds, detail);
}

Param random_param(Rng& rng, const std::string& name,
                   std::vector<std::size_t> shape, double margin = 0.0) {
  Param p(name, std::move(shape));
  for (double& v : p.value) {
    v = rng.uniform(-1.0, 1.0);
    if (margin > 0.0 && std::abs(v) < margin) v = v < 0 ? -margin : margin;
  }
  return p;
}

Tensor random_input(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

// ---- criterion 1: finite-difference checks over every primitive ----------

bool gradient_criterion(std::string& detail) {
  Rng rng(1001);
  const double tol = 1e-4;
  double worst = 0.0;
  std::string worst_op;
  const auto record = [&](const std::string& op, double err) {
    if (err > worst) {
      worst = err;
      worst_op = op;
    }
  };

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(4);
    const std::size_t c = 1 + rng.uniform_index(8);
    const std::size_t hw = 2 + rng.uniform_index(7);
    const std::size_t co = 1 + rng.uniform_index(8);
    const std::size_t cols = 1 + rng.uniform_index(6);

    {  // add, mul, scalar_mul, relu, sum over a shared shape
      Param a = random_param(rng, "a", {n, cols}, 1e-2);
      Param b = random_param(rng, "b", {n, cols}, 1e-2);
      const auto build = [&](Graph& g) {
        const int s = g.add(g.param(a), g.param(b));
        const int m = g.mul(s, g.param(b));
        return g.sum(g.scalar_mul(g.relu(m), 0.7));
      };
      record("add/mul/relu", nrl_test::fd_relative_error({&a, &b}, build));
    }
    {  // row-broadcast add
      Param a = random_param(rng, "a", {n, cols});
      Param bias = random_param(rng, "bias", {cols});
      Tensor probe = random_input(rng, {n, cols});
      const auto build = [&](Graph& g) {
        return g.sum(g.mul(g.add(g.param(a), g.param(bias)), g.input(probe)));
      };
      record("broadcast add",
             nrl_test::fd_relative_error({&a, &bias}, build));
    }
    {  // matmul + reshape
      Param a = random_param(rng, "a", {n, cols});
      Param b = random_param(rng, "b", {cols, 3});
      Tensor probe = random_input(rng, {n * 3});
      const auto build = [&](Graph& g) {
        const int y = g.reshape(g.matmul(g.param(a), g.param(b)), {n * 3});
        return g.sum(g.mul(y, g.input(probe)));
      };
      record("matmul/reshape", nrl_test::fd_relative_error({&a, &b}, build));
    }
    {  // conv2d + global_avg_pool
      Param x = random_param(rng, "x", {n, c, hw, hw});
      Param w = random_param(rng, "w", {co, c, 3, 3});
      Tensor probe = random_input(rng, {n, co});
      const auto build = [&](Graph& g) {
        const int y = g.conv2d(g.param(x), g.param(w), 1, 1);
        return g.sum(g.mul(g.global_avg_pool(y), g.input(probe)));
      };
      record("conv2d/pool", nrl_test::fd_relative_error({&x, &w}, build));
    }
    {  // strided conv2d
      Param x = random_param(rng, "x", {n, c, hw + 2, hw + 2});
      Param w = random_param(rng, "w", {co, c, 3, 3});
      Tensor probe = random_input(rng, {n, co});
      const auto build = [&](Graph& g) {
        const int y = g.conv2d(g.param(x), g.param(w), 2, 1);
        return g.sum(g.mul(g.global_avg_pool(y), g.input(probe)));
      };
      record("conv2d stride 2", nrl_test::fd_relative_error({&x, &w}, build));
    }
    {  // batchnorm2d train mode
      Param x = random_param(rng, "x", {2 + n, c, hw, hw});
      Param gamma = random_param(rng, "gamma", {c});
      Param beta = random_param(rng, "beta", {c});
      for (double& v : gamma.value) v = 1.0 + 0.2 * v;
      BnBuffer buf("bn", c);
      Tensor probe = random_input(rng, {2 + n, c, hw, hw});
      const auto build = [&](Graph& g) {
        const int y = g.batchnorm2d(g.param(x), g.param(gamma), g.param(beta),
                                    buf, NormMode::train, 0.9);
        return g.sum(g.mul(y, g.input(probe)));
      };
      record("batchnorm2d",
             nrl_test::fd_relative_error({&x, &gamma, &beta}, build));
    }
    {  // concat + slice + l2 normalize
      Param a = random_param(rng, "a", {n, cols}, 1e-1);
      Param b = random_param(rng, "b", {1 + rng.uniform_index(3), cols}, 1e-1);
      Tensor probe = random_input(rng, {n, cols});
      const auto build = [&](Graph& g) {
        const int z = g.l2_normalize_rows(
            g.concat_batch(g.param(a), g.param(b)));
        return g.sum(g.mul(g.slice_rows(z, 0, n), g.input(probe)));
      };
      record("concat/slice/l2norm",
             nrl_test::fd_relative_error({&a, &b}, build));
    }
    {  // softmax cross-entropy
      const std::size_t k = 2 + rng.uniform_index(5);
      Param logits = random_param(rng, "logits", {n, k});
      std::vector<std::size_t> targets(n);
      for (std::size_t& t : targets) t = rng.uniform_index(k);
      const auto build = [&](Graph& g) {
        return g.softmax_cross_entropy(g.param(logits), targets);
      };
      record("softmax_ce", nrl_test::fd_relative_error({&logits}, build));
    }
    {  // nt_xent
      const std::size_t pairs = 2 + rng.uniform_index(3);
      Param za = random_param(rng, "za", {pairs, cols + 1}, 1e-1);
      Param zb = random_param(rng, "zb", {pairs, cols + 1}, 1e-1);
      const auto build = [&](Graph& g) {
        return g.nt_xent(g.param(za), g.param(zb), 0.5);
      };
      record("nt_xent", nrl_test::fd_relative_error({&za, &zb}, build));
    }
    {  // barlow twins
      const std::size_t pairs = 3 + rng.uniform_index(3);
      Param za = random_param(rng, "za", {pairs, cols});
      Param zb = random_param(rng, "zb", {pairs, cols});
      const auto build = [&](Graph& g) {
        return g.barlow_twins(g.param(za), g.param(zb), 5e-3);
      };
      record("barlow_twins", nrl_test::fd_relative_error({&za, &zb}, build));
    }
  }
  std::ostringstream os;
  os << "worst relative error " << worst << " (" << worst_op << ")";
  detail = os.str();
  return worst < tol;
}

// ---- criterion 2: confident-learning oracle equivalence ------------------

bool cl_criterion(std::string& detail) {
  Rng rng(2002);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.uniform_index(3);       // K <= 4
    const std::size_t n = k + rng.uniform_index(200 - k); // n <= 200
    std::vector<std::vector<double>> probs(n, std::vector<double>(k));
    for (auto& row : probs) {
      double sum = 0.0;
      for (double& v : row) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        v = -std::log(u);
        sum += v;
      }
      for (double& v : row) v /= sum;
    }
    std::vector<std::size_t> given(n);
    for (std::size_t& g : given) g = rng.uniform_index(k);

    const ProbMatrix pm = nrl_test::make_pm(probs, given);
    const nrl_test::ClReference ref = nrl_test::cl_reference(probs, given);
    const std::vector<double> t = class_thresholds(pm);
    for (std::size_t j = 0; j < k; ++j) {
      if (std::abs(t[j] - ref.thresholds[j]) > 1e-12) {
        detail = "threshold mismatch at trial " + std::to_string(trial);
        return false;
      }
    }
    const ConfidentJoint cj = confident_joint(pm, t);
    for (std::size_t g = 0; g < k; ++g) {
      for (std::size_t s = 0; s < k; ++s) {
        if (cj.at(g, s) != ref.joint[g][s]) {
          detail = "joint mismatch at trial " + std::to_string(trial);
          return false;
        }
      }
    }
    if (detect_errors(pm, cj) != ref.flagged) {
      detail = "flag set mismatch at trial " + std::to_string(trial);
      return false;
    }
  }
  detail = "1000 instances, exact agreement";
  return true;
}

// ---- criterion 3: noise-injection statistics ------------------------------

bool noise_criterion(std::string& detail) {
  const LabeledDataset small = generate_synthetic(4, 53, 8, 3003);  // n = 212
  for (const double eta : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const NoisySplit split = inject_noise(small, eta, 17);
    const auto flips = std::count(split.corrupted_mask.begin(),
                                  split.corrupted_mask.end(), true);
    const auto expected =
        static_cast<long>(std::llround(eta * static_cast<double>(small.count())));
    if (flips != expected) {
      detail = "flip count " + std::to_string(flips) + " != " +
               std::to_string(expected) + " at eta " + std::to_string(eta);
      return false;
    }
  }

  // flip-target uniformity over the K-1 other classes, 10,000 flips
  const std::size_t k = 10;
  const LabeledDataset big = generate_synthetic(k, 1000, 8, 3004);
  const NoisySplit split = inject_noise(big, 1.0, 99);
  std::vector<std::size_t> bins(k - 1, 0);
  for (std::size_t i = 0; i < big.count(); ++i) {
    const std::size_t offset =
        (split.noisy_labels[i] + k - big.labels[i]) % k;
    ++bins[offset - 1];
  }
  const double expected = 10000.0 / static_cast<double>(k - 1);
  double chi2 = 0.0;
  for (const std::size_t b : bins) {
    const double d = static_cast<double>(b) - expected;
    chi2 += d * d / expected;
  }
  std::ostringstream os;
  os << "counts exact; chi-square " << chi2 << " (df 8, p=0.01 cutoff 20.09)";
  detail = os.str();
  return chi2 < 20.09;
}

// ---- shared setup for the trend criteria -----------------------------------

ExperimentConfig reference_config(const std::string& out) {
  ExperimentConfig cfg;  // defaults already match the reference protocol
  cfg.out_dir = out;
  return cfg;
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows,
                           const std::string& method, double eta,
                           std::size_t pretrain_epochs) {
  for (const SummaryRow& r : rows) {
    if (r.method == method && std::abs(r.eta - eta) < 1e-9 &&
        r.pretrain_epochs == pretrain_epochs) {
      return &r;
    }
  }
  return nullptr;
}

bool main_trend_criterion(std::string& detail) {
  ExperimentRunner runner(reference_config("out/acceptance_main"), true);
  const SweepResult res = runner.run_main_sweep();
  runner.emit_outputs(res);
  if (!res.ok()) {
    detail = "runs failed: " + res.failures.front();
    return false;
  }
  const std::vector<SummaryRow> rows = aggregate(res.records);

  std::ostringstream os;
  bool ok = true;
  for (const double eta : {0.0, 0.4, 0.8}) {
    const SummaryRow* base = find_row(rows, "baseline", eta, 0);
    const SummaryRow* ssl = find_row(rows, "simclr", eta, 25);
    if (!base || !ssl) {
      detail = "missing condition rows";
      return false;
    }
    os << "eta=" << eta << " base=" << base->acc_mean
       << " ssl=" << ssl->acc_mean << "; ";
    if (ssl->acc_mean < base->acc_mean) ok = false;
  }
  const double gap0 = find_row(rows, "simclr", 0.0, 25)->acc_mean -
                      find_row(rows, "baseline", 0.0, 0)->acc_mean;
  const double gap8 = find_row(rows, "simclr", 0.8, 25)->acc_mean -
                      find_row(rows, "baseline", 0.8, 0)->acc_mean;
  os << "gap(0.8)=" << gap8 << " vs gap(0)=" << gap0 << "; ";
  if (!(gap8 > gap0)) ok = false;
  const double f1_base = find_row(rows, "baseline", 0.4, 0)->f1_mean;
  const double f1_ssl = find_row(rows, "simclr", 0.4, 25)->f1_mean;
  os << "F1(0.4) base=" << f1_base << " ssl=" << f1_ssl;
  if (!(f1_ssl > f1_base)) ok = false;
  detail = os.str();
  return ok;
}

bool duration_trend_criterion(std::string& detail) {
  ExperimentConfig cfg = reference_config("out/acceptance_duration");
  cfg.noise_grid = {0.4};
  cfg.milestones = {0, 5, 25};
  ExperimentRunner runner(cfg, true);
  const SweepResult res = runner.run_duration_sweep();
  runner.emit_outputs(res);
  if (!res.ok()) {
    detail = "runs failed: " + res.failures.front();
    return false;
  }
  const std::vector<SummaryRow> rows = aggregate(res.records);
  std::ostringstream os;
  bool ok = true;
  const SummaryRow* prev = nullptr;
  for (const std::size_t m : cfg.milestones) {
    const SummaryRow* row = find_row(rows, "simclr", 0.4, m);
    if (!row) {
      detail = "missing milestone row";
      return false;
    }
    os << "m" << m << ": F1 " << row->f1_mean << "+/-" << row->f1_stderr
       << "; ";
    if (prev &&
        row->f1_mean < prev->f1_mean - (prev->f1_stderr + row->f1_stderr)) {
      ok = false;
    }
    prev = row;
  }
  detail = os.str();
  return ok;
}

bool overfitting_criterion(std::string& detail) {
  ExperimentConfig cfg = reference_config("out/acceptance_extended");
  cfg.noise_grid = {0.6};
  cfg.finetune_epochs = 40;
  // long-schedule protocol: 4x the epochs, half the step size
  cfg.finetune_lr = 5e-4;
  ExperimentRunner runner(cfg, true);
  const SweepResult res = runner.run_extended_training();
  runner.emit_outputs(res);
  if (!res.ok()) {
    detail = "runs failed: " + res.failures.front();
    return false;
  }
  double base_decline = 0.0, ssl_decline = 0.0;
  std::size_t base_n = 0, ssl_n = 0;
  for (const RunRecord& r : res.records) {
    if (r.test_acc.size() != 40) {
      detail = "trace length " + std::to_string(r.test_acc.size());
      return false;
    }
    if (r.method == "baseline") {
      base_decline += post_peak_decline(r.test_acc);
      ++base_n;
    } else {
      ssl_decline += post_peak_decline(r.test_acc);
      ++ssl_n;
    }
  }
  base_decline /= static_cast<double>(base_n);
  ssl_decline /= static_cast<double>(ssl_n);
  std::ostringstream os;
  os << "mean post-peak decline: baseline " << base_decline << ", ssl "
     << ssl_decline;
  detail = os.str();
  return base_decline > ssl_decline;
}

// ---- criterion 7: byte-identical reruns ------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool determinism_criterion(std::string& detail) {
  ExperimentConfig cfg = reference_config("");
  cfg.train_spec = "synthetic:K=4,n=160,H=16";
  cfg.test_spec = "synthetic:K=4,n=80,H=16";
  cfg.pretrain_epochs = 2;
  cfg.finetune_epochs = 2;
  cfg.noise_grid = {0.0, 0.4};
  cfg.seeds = {1};
  std::vector<std::string> outputs;
  for (const char* dir :
       {"out/acceptance_det_a", "out/acceptance_det_b"}) {
    cfg.out_dir = dir;
    ExperimentRunner runner(cfg, true);
    runner.emit_outputs(runner.run_main_sweep());
    outputs.push_back(slurp(std::string(dir) + "/runs.csv"));
  }
  if (outputs[0].empty()) {
    detail = "no runs.csv produced";
    return false;
  }
  detail = "two sweeps, " + std::to_string(outputs[0].size()) +
           " bytes of runs.csv each";
  return outputs[0] == outputs[1];
}

// ---- criterion 8: label independence of pretraining ------------------------

bool label_independence_criterion(std::string& detail) {
  const LabeledDataset ds = generate_synthetic(4, 40, 16, 8008);
  NoisySplit split = inject_noise(ds, 0.4, 5);
  NoisySplit permuted = split;
  std::reverse(permuted.noisy_labels.begin(), permuted.noisy_labels.end());
  permuted.corrupted_mask.assign(permuted.corrupted_mask.size(), false);

  const auto run = [&](const NoisySplit& data) {
    ModelConfig mc;
    mc.image_hw = 16;
    Encoder enc(mc, 77);
    ProjectionHead proj(enc.feature_dim(), 64, 78);
    SslConfig sc;
    sc.epochs = 2;
    sc.batch_size = 32;
    pretrain(enc, proj, data, sc, AugmentationConfig::ssl_default(),
             compute_channel_stats(ds), 79);
    return serialize_checkpoint(enc);
  };
  const bool ok = run(split) == run(permuted);
  detail = ok ? "checkpoints bitwise identical under label permutation"
              : "checkpoint bytes differ";
  return ok;
}

}  // namespace

int main() {
  std::filesystem::create_directories("out");
  criterion(1, "gradient correctness via finite differences",
            gradient_criterion);
  criterion(2, "confident-learning oracle equivalence", cl_criterion);
  criterion(3, "noise-injection statistics", noise_criterion);
  criterion(4, "main trend: ssl beats baseline across noise rates",
            main_trend_criterion);
  criterion(5, "duration trend: detection F1 non-decreasing",
            duration_trend_criterion);
  criterion(6, "overfitting dynamics: slower post-peak decline with ssl",
            overfitting_criterion);
  criterion(7, "byte-identical reruns", determinism_criterion);
  criterion(8, "label independence of pretraining",
            label_independence_criterion);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures;
}
