#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nrl/dataset.hpp"
#include "nrl/model.hpp"
#include "nrl/ssl.hpp"
#include "nrl/train.hpp"

namespace nrl {

// Flat key-value config with [section] headers; parse/to_string round-trip
// losslessly.
struct ExperimentConfig {
  // [dataset] — "synthetic:K=<k>,n=<n>,H=<h>" or "cifar:<path>"
  std::string train_spec = "synthetic:K=4,n=800,H=16";
  std::string test_spec = "synthetic:K=4,n=400,H=16";
  std::uint64_t train_data_seed = 12345;
  std::uint64_t test_data_seed = 54321;
  std::size_t cifar_classes = 10;

  // [encoder]
  std::size_t stem_width = 16;
  std::vector<std::size_t> stage_widths = {16, 32, 64};
  std::size_t blocks_per_stage = 1;
  std::size_t proj_dim = 64;

  // [ssl]
  std::vector<std::string> methods = {"simclr"};
  double tau = 0.5;
  double lambda = 5e-3;
  std::size_t pretrain_epochs = 25;
  std::size_t ssl_batch_size = 64;
  double ssl_lr = 1e-3;
  std::vector<std::size_t> milestones = {1, 5, 10, 25, 50, 100};

  // [finetune]
  std::size_t finetune_epochs = 10;
  std::size_t finetune_batch_size = 64;
  double finetune_lr = 1e-3;

  // [noise]
  std::vector<double> noise_grid = {0.0, 0.4, 0.8};
  double test_eta = -1.0;  // < 0: corrupt the test set at the train eta

  // [run]
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::string out_dir = "out";

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_string() const;
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

struct RunRecord {
  std::string run_id;
  std::string method;  // "baseline" or an ssl method
  double eta = 0.0;
  std::size_t pretrain_epochs = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // clean-test accuracy, percent
  double f1 = 0.0;
  double balanced_accuracy = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::vector<double> train_loss;
  std::vector<double> test_acc;

  bool operator==(const RunRecord&) const = default;
};

std::string runs_csv_header();
std::string to_csv_row(const RunRecord& r);
RunRecord parse_csv_row(const std::string& line);
void write_runs_csv(const std::string& path,
                    const std::vector<RunRecord>& records);
std::vector<RunRecord> read_runs_csv(const std::string& path);

struct SummaryRow {
  std::string method;
  double eta = 0.0;
  std::size_t pretrain_epochs = 0;
  std::size_t n_seeds = 0;
  double acc_mean = 0.0, acc_stderr = 0.0;
  double f1_mean = 0.0, f1_stderr = 0.0;
  double ba_mean = 0.0, ba_stderr = 0.0;
  bool single_seed = false;
};

// Per (method, eta, pretrain_epochs) condition: mean and standard error
// (sample std / sqrt(seeds)) of each metric.
std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records,
                                  std::vector<std::string>* warnings = nullptr);
void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> read_summary_csv(const std::string& path);

void write_plots(const std::string& out_dir,
                 const std::vector<SummaryRow>& rows);

struct SweepResult {
  std::vector<RunRecord> records;
  std::vector<std::string> failures;  // context strings; empty = all ok

  bool ok() const { return failures.empty(); }
};

class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentConfig cfg, bool quiet = false);

  SweepResult run_main_sweep();
  SweepResult run_duration_sweep();
  SweepResult run_extended_training();

  // single-shot commands backing the CLI
  void run_pretrain_only(std::uint64_t seed);
  RunRecord run_finetune_only(std::uint64_t seed,
                              const std::string& checkpoint_path);
  std::string run_detect_only(std::uint64_t seed,
                              const std::string& checkpoint_path);

  const LabeledDataset& train_data() const { return train_; }
  const LabeledDataset& test_data() const { return test_; }

  // writes runs.csv, summary.csv and the SVG charts
  void emit_outputs(const SweepResult& result) const;

 private:
  ModelConfig model_config() const;
  SslConfig ssl_config(const std::string& method) const;
  TrainConfig train_config() const;
  NoisySplit corrupt_train(double eta, std::uint64_t seed) const;
  NoisySplit corrupt_test(double eta, std::uint64_t seed) const;
  // label-free, so shared across noise rates of a sweep
  std::vector<std::uint8_t> pretrain_checkpoint(const std::string& method,
                                                std::uint64_t seed,
                                                std::size_t epochs);
  RunRecord evaluate_arm(const std::string& method, double eta,
                         std::size_t pretrain_epochs, std::uint64_t seed,
                         Encoder& enc);
  void log(const std::string& msg) const;

  ExperimentConfig cfg_;
  bool quiet_;
  LabeledDataset train_;
  LabeledDataset test_;
  ChannelStats stats_;
  std::map<std::pair<std::string, std::uint64_t>, std::vector<std::uint8_t>>
      pretrain_cache_;
  std::vector<std::string> ssl_loss_rows_;
};

LabeledDataset load_dataset_spec(const std::string& spec,
                                 std::uint64_t data_seed,
                                 std::size_t cifar_classes);

double post_peak_decline(const std::vector<double>& trace);

}  // namespace nrl
