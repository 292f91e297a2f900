#include "nrl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "nrl/checkpoint.hpp"
#include "nrl/svg.hpp"

namespace nrl {
namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_eta(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number: " + s);
  return v;
}

std::uint64_t to_u64(const std::string& s) { return std::stoull(s); }

template <typename T, typename F>
std::vector<T> parse_list(const std::string& s, F conv) {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  for (const std::string& part : split(s, ',')) {
    out.push_back(conv(trim(part)));
  }
  return out;
}

template <typename T, typename F>
std::string join_list(const std::vector<T>& v, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += fmt(v[i]);
  }
  return out;
}

std::string join_trace(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ";";
    out += fmt_double(v[i]);
  }
  return out;
}

std::vector<double> parse_trace(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  for (const std::string& part : split(s, ';')) out.push_back(to_double(part));
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - mu) * (x - mu);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return sd / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  while (std::getline(in, raw)) {
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected key = value, got: " + line);
    }
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "dataset.train") cfg.train_spec = val;
    else if (key == "dataset.test") cfg.test_spec = val;
    else if (key == "dataset.train_seed") cfg.train_data_seed = to_u64(val);
    else if (key == "dataset.test_seed") cfg.test_data_seed = to_u64(val);
    else if (key == "dataset.cifar_classes") cfg.cifar_classes = to_u64(val);
    else if (key == "encoder.stem_width") cfg.stem_width = to_u64(val);
    else if (key == "encoder.stage_widths")
      cfg.stage_widths = parse_list<std::size_t>(val, [](const std::string& s) {
        return static_cast<std::size_t>(to_u64(s));
      });
    else if (key == "encoder.blocks_per_stage") cfg.blocks_per_stage = to_u64(val);
    else if (key == "encoder.proj_dim") cfg.proj_dim = to_u64(val);
    else if (key == "ssl.methods")
      cfg.methods = parse_list<std::string>(val, [](const std::string& s) { return s; });
    else if (key == "ssl.tau") cfg.tau = to_double(val);
    else if (key == "ssl.lambda") cfg.lambda = to_double(val);
    else if (key == "ssl.epochs") cfg.pretrain_epochs = to_u64(val);
    else if (key == "ssl.batch_size") cfg.ssl_batch_size = to_u64(val);
    else if (key == "ssl.lr") cfg.ssl_lr = to_double(val);
    else if (key == "ssl.milestones")
      cfg.milestones = parse_list<std::size_t>(val, [](const std::string& s) {
        return static_cast<std::size_t>(to_u64(s));
      });
    else if (key == "finetune.epochs") cfg.finetune_epochs = to_u64(val);
    else if (key == "finetune.batch_size") cfg.finetune_batch_size = to_u64(val);
    else if (key == "finetune.lr") cfg.finetune_lr = to_double(val);
    else if (key == "noise.grid")
      cfg.noise_grid = parse_list<double>(val, [](const std::string& s) { return to_double(s); });
    else if (key == "noise.test_eta")
      cfg.test_eta = val == "same" ? -1.0 : to_double(val);
    else if (key == "run.seeds")
      cfg.seeds = parse_list<std::uint64_t>(val, [](const std::string& s) { return to_u64(s); });
    else if (key == "run.out") cfg.out_dir = val;
    else throw std::invalid_argument("config: unknown key " + key);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::to_string() const {
  std::ostringstream os;
  os << "[dataset]\n";
  os << "train = " << train_spec << "\n";
  os << "test = " << test_spec << "\n";
  os << "train_seed = " << train_data_seed << "\n";
  os << "test_seed = " << test_data_seed << "\n";
  os << "cifar_classes = " << cifar_classes << "\n";
  os << "[encoder]\n";
  os << "stem_width = " << stem_width << "\n";
  os << "stage_widths = "
     << join_list(stage_widths, [](std::size_t v) { return std::to_string(v); })
     << "\n";
  os << "blocks_per_stage = " << blocks_per_stage << "\n";
  os << "proj_dim = " << proj_dim << "\n";
  os << "[ssl]\n";
  os << "methods = " << join_list(methods, [](const std::string& s) { return s; })
     << "\n";
  os << "tau = " << fmt_double(tau) << "\n";
  os << "lambda = " << fmt_double(lambda) << "\n";
  os << "epochs = " << pretrain_epochs << "\n";
  os << "batch_size = " << ssl_batch_size << "\n";
  os << "lr = " << fmt_double(ssl_lr) << "\n";
  os << "milestones = "
     << join_list(milestones, [](std::size_t v) { return std::to_string(v); })
     << "\n";
  os << "[finetune]\n";
  os << "epochs = " << finetune_epochs << "\n";
  os << "batch_size = " << finetune_batch_size << "\n";
  os << "lr = " << fmt_double(finetune_lr) << "\n";
  os << "[noise]\n";
  os << "grid = " << join_list(noise_grid, fmt_double) << "\n";
  os << "test_eta = " << (test_eta < 0 ? "same" : fmt_double(test_eta)) << "\n";
  os << "[run]\n";
  os << "seeds = "
     << join_list(seeds, [](std::uint64_t v) { return std::to_string(v); })
     << "\n";
  os << "out = " << out_dir << "\n";
  return os.str();
}

void ExperimentConfig::validate() const {
  for (const double eta : noise_grid) {
    if (eta < 0.0 || eta > 1.0) {
      throw std::invalid_argument("config: noise grid value outside [0, 1]");
    }
  }
  if (noise_grid.empty()) throw std::invalid_argument("config: empty noise grid");
  if (seeds.empty()) throw std::invalid_argument("config: at least one seed required");
  for (const std::string& m : methods) parse_method(m);
  for (std::size_t i = 1; i < milestones.size(); ++i) {
    if (milestones[i] <= milestones[i - 1]) {
      throw std::invalid_argument(
          "config: milestones must be strictly ascending");
    }
  }
}

LabeledDataset load_dataset_spec(const std::string& spec,
                                 std::uint64_t data_seed,
                                 std::size_t cifar_classes) {
  if (spec.rfind("synthetic:", 0) == 0) {
    std::size_t k = 0, n = 0, h = 0;
    for (const std::string& part : split(spec.substr(10), ',')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("bad synthetic spec: " + spec);
      }
      const std::string key = part.substr(0, eq);
      const std::uint64_t val = to_u64(part.substr(eq + 1));
      if (key == "K") k = val;
      else if (key == "n") n = val;
      else if (key == "H") h = val;
      else throw std::invalid_argument("bad synthetic spec key: " + key);
    }
    if (k == 0 || n == 0 || h == 0 || n % k != 0) {
      throw std::invalid_argument(
          "synthetic spec needs K, H and n divisible by K: " + spec);
    }
    return generate_synthetic(k, n / k, h, data_seed);
  }
  if (spec.rfind("cifar:", 0) == 0) {
    return load_cifar_binary(spec.substr(6), cifar_classes);
  }
  throw std::invalid_argument("unknown dataset spec: " + spec);
}

std::string runs_csv_header() {
  return "run_id,method,eta,pretrain_epochs,seed,accuracy,f1,"
         "balanced_accuracy,tp,fp,tn,fn,train_loss_trace,test_acc_trace";
}

std::string to_csv_row(const RunRecord& r) {
  std::ostringstream os;
  os << r.run_id << "," << r.method << "," << fmt_double(r.eta) << ","
     << r.pretrain_epochs << "," << r.seed << "," << fmt_double(r.accuracy)
     << "," << fmt_double(r.f1) << "," << fmt_double(r.balanced_accuracy)
     << "," << r.tp << "," << r.fp << "," << r.tn << "," << r.fn << ","
     << join_trace(r.train_loss) << "," << join_trace(r.test_acc);
  return os.str();
}

RunRecord parse_csv_row(const std::string& line) {
  const std::vector<std::string> f = split(line, ',');
  if (f.size() != 14) {
    throw std::invalid_argument("runs csv: expected 14 fields, got " +
                                std::to_string(f.size()));
  }
  RunRecord r;
  r.run_id = f[0];
  r.method = f[1];
  r.eta = to_double(f[2]);
  r.pretrain_epochs = to_u64(f[3]);
  r.seed = to_u64(f[4]);
  r.accuracy = to_double(f[5]);
  r.f1 = to_double(f[6]);
  r.balanced_accuracy = to_double(f[7]);
  r.tp = to_u64(f[8]);
  r.fp = to_u64(f[9]);
  r.tn = to_u64(f[10]);
  r.fn = to_u64(f[11]);
  r.train_loss = parse_trace(f[12]);
  r.test_acc = parse_trace(f[13]);
  return r;
}

void write_runs_csv(const std::string& path,
                    const std::vector<RunRecord>& records) {
  std::ostringstream os;
  os << runs_csv_header() << "\n";
  for (const RunRecord& r : records) os << to_csv_row(r) << "\n";
  write_text_file(path, os.str());
}

std::vector<RunRecord> read_runs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != runs_csv_header()) {
    throw std::runtime_error(path + ": unexpected runs.csv header");
  }
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) out.push_back(parse_csv_row(line));
  }
  return out;
}

std::vector<SummaryRow> aggregate(const std::vector<RunRecord>& records,
                                  std::vector<std::string>* warnings) {
  if (records.empty() && warnings) {
    warnings->push_back("aggregate: no records");
  }
  struct Bucket {
    std::vector<double> acc, f1, ba;
  };
  std::map<std::tuple<double, std::string, std::size_t>, Bucket> buckets;
  for (const RunRecord& r : records) {
    Bucket& b = buckets[{r.eta, r.method, r.pretrain_epochs}];
    b.acc.push_back(r.accuracy);
    b.f1.push_back(r.f1);
    b.ba.push_back(r.balanced_accuracy);
  }
  std::vector<SummaryRow> rows;
  for (const auto& [key, b] : buckets) {
    SummaryRow row;
    row.eta = std::get<0>(key);
    row.method = std::get<1>(key);
    row.pretrain_epochs = std::get<2>(key);
    row.n_seeds = b.acc.size();
    row.acc_mean = mean_of(b.acc);
    row.acc_stderr = stderr_of(b.acc);
    row.f1_mean = mean_of(b.f1);
    row.f1_stderr = stderr_of(b.f1);
    row.ba_mean = mean_of(b.ba);
    row.ba_stderr = stderr_of(b.ba);
    row.single_seed = b.acc.size() == 1;
    if (row.single_seed && warnings) {
      warnings->push_back("condition " + row.method + " eta=" +
                          fmt_eta(row.eta) + " has a single seed; standard "
                          "error reported as 0");
    }
    rows.push_back(row);
  }
  return rows;
}

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "method,eta,pretrain_epochs,n_seeds,acc_mean,acc_stderr,f1_mean,"
        "f1_stderr,ba_mean,ba_stderr,single_seed\n";
  for (const SummaryRow& r : rows) {
    os << r.method << "," << fmt_double(r.eta) << "," << r.pretrain_epochs
       << "," << r.n_seeds << "," << fmt_double(r.acc_mean) << ","
       << fmt_double(r.acc_stderr) << "," << fmt_double(r.f1_mean) << ","
       << fmt_double(r.f1_stderr) << "," << fmt_double(r.ba_mean) << ","
       << fmt_double(r.ba_stderr) << "," << (r.single_seed ? 1 : 0) << "\n";
  }
  write_text_file(path, os.str());
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 11) throw std::runtime_error(path + ": bad summary row");
    SummaryRow r;
    r.method = f[0];
    r.eta = to_double(f[1]);
    r.pretrain_epochs = to_u64(f[2]);
    r.n_seeds = to_u64(f[3]);
    r.acc_mean = to_double(f[4]);
    r.acc_stderr = to_double(f[5]);
    r.f1_mean = to_double(f[6]);
    r.f1_stderr = to_double(f[7]);
    r.ba_mean = to_double(f[8]);
    r.ba_stderr = to_double(f[9]);
    r.single_seed = f[10] == "1";
    rows.push_back(r);
  }
  return rows;
}

void write_plots(const std::string& out_dir,
                 const std::vector<SummaryRow>& rows) {
  // accuracy vs eta, one series per (method, pretrain duration)
  std::map<std::pair<std::string, std::size_t>, SvgSeries> acc_series;
  std::set<std::size_t> durations_per_method;
  for (const SummaryRow& r : rows) {
    SvgSeries& s = acc_series[{r.method, r.pretrain_epochs}];
    s.x.push_back(r.eta);
    s.y.push_back(r.acc_mean);
    s.yerr.push_back(r.acc_stderr);
  }
  std::map<std::string, std::set<std::size_t>> method_durations;
  for (const auto& [key, s] : acc_series) {
    method_durations[key.first].insert(key.second);
  }
  std::vector<SvgSeries> acc_list;
  for (auto& [key, s] : acc_series) {
    s.label = method_durations[key.first].size() > 1
                  ? key.first + " (pre=" + std::to_string(key.second) + ")"
                  : key.first;
    acc_list.push_back(s);
  }
  write_text_file(out_dir + "/accuracy_vs_eta.svg",
                  render_line_chart("Clean-test accuracy vs noise rate",
                                    "noise rate eta", "accuracy (%)",
                                    acc_list));

  // detection F1 vs pre-training duration, one series per (method, eta)
  std::map<std::pair<std::string, double>, SvgSeries> f1_series;
  for (const SummaryRow& r : rows) {
    SvgSeries& s = f1_series[{r.method, r.eta}];
    s.x.push_back(static_cast<double>(r.pretrain_epochs));
    s.y.push_back(r.f1_mean);
    s.yerr.push_back(r.f1_stderr);
  }
  std::vector<SvgSeries> f1_list;
  for (auto& [key, s] : f1_series) {
    s.label = key.first + " eta=" + fmt_eta(key.second);
    f1_list.push_back(s);
  }
  write_text_file(out_dir + "/f1_vs_pretrain_epochs.svg",
                  render_line_chart("Label-error detection F1 vs pre-training",
                                    "pre-training epochs", "detection F1",
                                    f1_list));
}

double post_peak_decline(const std::vector<double>& trace) {
  if (trace.empty()) return 0.0;
  const double peak = *std::max_element(trace.begin(), trace.end());
  return peak - trace.back();
}

ExperimentRunner::ExperimentRunner(ExperimentConfig cfg, bool quiet)
    : cfg_(std::move(cfg)), quiet_(quiet) {
  cfg_.validate();
  train_ = load_dataset_spec(cfg_.train_spec, cfg_.train_data_seed,
                             cfg_.cifar_classes);
  test_ = load_dataset_spec(cfg_.test_spec, cfg_.test_data_seed,
                            cfg_.cifar_classes);
  if (train_.num_classes != test_.num_classes ||
      train_.height != test_.height) {
    throw std::invalid_argument("train and test datasets are incompatible");
  }
  stats_ = compute_channel_stats(train_);
}

void ExperimentRunner::log(const std::string& msg) const {
  if (!quiet_) std::cerr << "[nrl] " << msg << "\n";
}

ModelConfig ExperimentRunner::model_config() const {
  ModelConfig mc;
  mc.image_hw = train_.height;
  mc.stem_width = cfg_.stem_width;
  mc.stage_widths = cfg_.stage_widths;
  mc.blocks_per_stage = cfg_.blocks_per_stage;
  return mc;
}

SslConfig ExperimentRunner::ssl_config(const std::string& method) const {
  SslConfig sc;
  sc.method = parse_method(method);
  sc.tau = cfg_.tau;
  sc.lambda = cfg_.lambda;
  sc.epochs = cfg_.pretrain_epochs;
  sc.batch_size = cfg_.ssl_batch_size;
  sc.adam.lr = cfg_.ssl_lr;
  return sc;
}

TrainConfig ExperimentRunner::train_config() const {
  TrainConfig tc;
  tc.epochs = cfg_.finetune_epochs;
  tc.batch_size = cfg_.finetune_batch_size;
  tc.adam.lr = cfg_.finetune_lr;
  return tc;
}

NoisySplit ExperimentRunner::corrupt_train(double eta,
                                           std::uint64_t seed) const {
  return inject_noise(train_, eta,
                      mix_seed(mix_seed(seed, "noise-train"),
                               tag_hash(fmt_double(eta))));
}

NoisySplit ExperimentRunner::corrupt_test(double eta,
                                          std::uint64_t seed) const {
  // independent stream from the train-set corruption
  const double test_eta = cfg_.test_eta < 0.0 ? eta : cfg_.test_eta;
  return inject_noise(test_, test_eta,
                      mix_seed(mix_seed(seed, "noise-test"),
                               tag_hash(fmt_double(test_eta))));
}

std::vector<std::uint8_t> ExperimentRunner::pretrain_checkpoint(
    const std::string& method, std::uint64_t seed, std::size_t epochs) {
  const auto key = std::make_pair(method + "@" + std::to_string(epochs), seed);
  if (const auto it = pretrain_cache_.find(key); it != pretrain_cache_.end()) {
    return it->second;
  }
  log("pretrain " + method + " seed=" + std::to_string(seed) + " epochs=" +
      std::to_string(epochs));
  Encoder enc(model_config(), mix_seed(seed, "init"));
  ProjectionHead proj(enc.feature_dim(), cfg_.proj_dim, mix_seed(seed, "proj"));
  SslConfig sc = ssl_config(method);
  sc.epochs = epochs;
  // pretraining never reads labels, so the eta = 0 split stands in for all
  const NoisySplit data = inject_noise(train_, 0.0, 0);
  const PretrainResult res = pretrain(enc, proj, data, sc,
                                      AugmentationConfig::ssl_default(),
                                      stats_, mix_seed(seed, "ssl"));
  const std::string run_id = "pre-" + method + "-s" + std::to_string(seed);
  for (std::size_t e = 0; e < res.epoch_mean_loss.size(); ++e) {
    ssl_loss_rows_.push_back(run_id + "," + std::to_string(e + 1) + "," +
                             fmt_double(res.epoch_mean_loss[e]));
  }
  std::vector<std::uint8_t> bytes = serialize_checkpoint(enc);
  pretrain_cache_[key] = bytes;
  return bytes;
}

RunRecord ExperimentRunner::evaluate_arm(const std::string& method, double eta,
                                         std::size_t pretrain_epochs,
                                         std::uint64_t seed, Encoder& enc) {
  const NoisySplit noisy_train = corrupt_train(eta, seed);
  const NoisySplit noisy_test = corrupt_test(eta, seed);

  ClassifierHead head(enc.feature_dim(), train_.num_classes,
                      mix_seed(seed, "head"));
  const FinetuneResult ft = finetune(enc, head, noisy_train, test_, stats_,
                                     train_config(), seed);

  const ProbMatrix pm = predict_probs(enc, head, noisy_test.base,
                                      noisy_test.noisy_labels, stats_);
  const std::vector<double> thresholds = class_thresholds(pm);
  const ConfidentJoint cj = confident_joint(pm, thresholds);
  const std::vector<bool> flagged = detect_errors(pm, cj);
  std::vector<bool> mask(noisy_test.corrupted_mask.begin(),
                         noisy_test.corrupted_mask.end());
  const DetectionReport rep = score_detection(flagged, mask);

  RunRecord r;
  r.run_id = method + "-eta" + fmt_eta(eta) + "-pre" +
             std::to_string(pretrain_epochs) + "-s" + std::to_string(seed);
  r.method = method;
  r.eta = eta;
  r.pretrain_epochs = pretrain_epochs;
  r.seed = seed;
  r.accuracy = ft.test_acc.back();
  r.f1 = rep.f1;
  r.balanced_accuracy = rep.balanced_accuracy;
  r.tp = rep.tp;
  r.fp = rep.fp;
  r.tn = rep.tn;
  r.fn = rep.fn;
  r.train_loss = ft.train_loss;
  r.test_acc = ft.test_acc;
  return r;
}

SweepResult ExperimentRunner::run_main_sweep() {
  SweepResult out;
  std::vector<double> grid = cfg_.noise_grid;
  std::sort(grid.begin(), grid.end());
  std::vector<std::string> arms = cfg_.methods;
  arms.push_back("baseline");
  std::sort(arms.begin(), arms.end());

  for (const double eta : grid) {
    for (const std::string& arm : arms) {
      for (const std::uint64_t seed : cfg_.seeds) {
        try {
          Encoder enc(model_config(), mix_seed(seed, "init"));
          if (arm != "baseline" && cfg_.pretrain_epochs > 0) {
            const std::vector<std::uint8_t> bytes =
                pretrain_checkpoint(arm, seed, cfg_.pretrain_epochs);
            deserialize_checkpoint(bytes, enc);
          }
          const std::size_t pe = arm == "baseline" ? 0 : cfg_.pretrain_epochs;
          log("finetune " + arm + " eta=" + fmt_eta(eta) + " seed=" +
              std::to_string(seed));
          out.records.push_back(evaluate_arm(arm, eta, pe, seed, enc));
        } catch (const std::exception& e) {
          out.failures.push_back("run " + arm + " eta=" + fmt_eta(eta) +
                                 " seed=" + std::to_string(seed) +
                                 " failed: " + e.what());
        }
      }
    }
  }
  return out;
}

SweepResult ExperimentRunner::run_duration_sweep() {
  if (cfg_.milestones.empty()) {
    throw std::invalid_argument("duration sweep: no milestones configured");
  }
  SweepResult out;
  const double eta = cfg_.noise_grid.front();
  std::vector<std::string> arms = cfg_.methods;
  std::sort(arms.begin(), arms.end());
  const std::size_t max_epochs = cfg_.milestones.back();

  for (const std::string& arm : arms) {
    for (const std::uint64_t seed : cfg_.seeds) {
      try {
        // one pretrain run with a snapshot per milestone
        std::map<std::size_t, std::vector<std::uint8_t>> snapshots;
        Encoder enc(model_config(), mix_seed(seed, "init"));
        ProjectionHead proj(enc.feature_dim(), cfg_.proj_dim,
                            mix_seed(seed, "proj"));
        SslConfig sc = ssl_config(arm);
        sc.epochs = max_epochs;
        const NoisySplit data = inject_noise(train_, 0.0, 0);
        log("pretrain " + arm + " seed=" + std::to_string(seed) +
            " milestones to " + std::to_string(max_epochs));
        pretrain(enc, proj, data, sc, AugmentationConfig::ssl_default(),
                 stats_, mix_seed(seed, "ssl"), cfg_.milestones,
                 [&](std::size_t e) { snapshots[e] = serialize_checkpoint(enc); });
        for (const std::size_t milestone : cfg_.milestones) {
          Encoder ft_enc(model_config(), mix_seed(seed, "init"));
          deserialize_checkpoint(snapshots.at(milestone), ft_enc);
          out.records.push_back(
              evaluate_arm(arm, eta, milestone, seed, ft_enc));
        }
      } catch (const std::exception& e) {
        out.failures.push_back("duration run " + arm + " seed=" +
                               std::to_string(seed) + " failed: " + e.what());
      }
    }
  }
  return out;
}

SweepResult ExperimentRunner::run_extended_training() {
  if (cfg_.finetune_epochs < 20) {
    throw std::invalid_argument(
        "extended training requires finetune epochs >= 20");
  }
  SweepResult out;
  const double eta = cfg_.noise_grid.front();
  std::vector<std::string> arms = cfg_.methods;
  arms.push_back("baseline");
  std::sort(arms.begin(), arms.end());
  for (const std::string& arm : arms) {
    for (const std::uint64_t seed : cfg_.seeds) {
      try {
        Encoder enc(model_config(), mix_seed(seed, "init"));
        if (arm != "baseline" && cfg_.pretrain_epochs > 0) {
          deserialize_checkpoint(
              pretrain_checkpoint(arm, seed, cfg_.pretrain_epochs), enc);
        }
        const std::size_t pe = arm == "baseline" ? 0 : cfg_.pretrain_epochs;
        log("extended finetune " + arm + " seed=" + std::to_string(seed));
        out.records.push_back(evaluate_arm(arm, eta, pe, seed, enc));
      } catch (const std::exception& e) {
        out.failures.push_back("extended run " + arm + " seed=" +
                               std::to_string(seed) + " failed: " + e.what());
      }
    }
  }
  return out;
}

void ExperimentRunner::run_pretrain_only(std::uint64_t seed) {
  std::filesystem::create_directories(cfg_.out_dir);
  for (const std::string& method : cfg_.methods) {
    Encoder enc(model_config(), mix_seed(seed, "init"));
    ProjectionHead proj(enc.feature_dim(), cfg_.proj_dim,
                        mix_seed(seed, "proj"));
    SslConfig sc = ssl_config(method);
    std::vector<std::size_t> milestones;
    for (const std::size_t m : cfg_.milestones) {
      if (m <= sc.epochs) milestones.push_back(m);
    }
    if (milestones.empty() || milestones.back() != sc.epochs) {
      milestones.push_back(sc.epochs);
    }
    const NoisySplit data = inject_noise(train_, 0.0, 0);
    const std::string run_id = "pre-" + method + "-s" + std::to_string(seed);
    const PretrainResult res = pretrain(
        enc, proj, data, sc, AugmentationConfig::ssl_default(), stats_,
        mix_seed(seed, "ssl"), milestones, [&](std::size_t e) {
          save_checkpoint(cfg_.out_dir + "/ckpt-" + method + "-s" +
                              std::to_string(seed) + "-e" + std::to_string(e) +
                              ".bin",
                          enc);
        });
    for (std::size_t e = 0; e < res.epoch_mean_loss.size(); ++e) {
      ssl_loss_rows_.push_back(run_id + "," + std::to_string(e + 1) + "," +
                               fmt_double(res.epoch_mean_loss[e]));
    }
  }
  std::ostringstream os;
  os << "run_id,epoch,mean_loss\n";
  for (const std::string& row : ssl_loss_rows_) os << row << "\n";
  write_text_file(cfg_.out_dir + "/ssl_loss.csv", os.str());
}

RunRecord ExperimentRunner::run_finetune_only(
    std::uint64_t seed, const std::string& checkpoint_path) {
  std::filesystem::create_directories(cfg_.out_dir);
  const double eta = cfg_.noise_grid.front();
  Encoder enc(model_config(), mix_seed(seed, "init"));
  std::string method = "baseline";
  std::size_t pe = 0;
  if (!checkpoint_path.empty()) {
    load_checkpoint(checkpoint_path, enc);
    method = cfg_.methods.empty() ? "ssl" : cfg_.methods.front();
    pe = cfg_.pretrain_epochs;
  }
  RunRecord r = evaluate_arm(method, eta, pe, seed, enc);
  write_runs_csv(cfg_.out_dir + "/runs.csv", {r});
  return r;
}

std::string ExperimentRunner::run_detect_only(
    std::uint64_t seed, const std::string& checkpoint_path) {
  const RunRecord r = run_finetune_only(seed, checkpoint_path);
  DetectionReport rep;
  rep.f1 = r.f1;
  rep.balanced_accuracy = r.balanced_accuracy;
  rep.tp = r.tp;
  rep.fp = r.fp;
  rep.tn = r.tn;
  rep.fn = r.fn;
  const std::string row = rep.csv_row(r.run_id, r.eta, r.method);
  write_text_file(cfg_.out_dir + "/detection.csv",
                  "run_id,eta,method,f1,balanced_accuracy,tp,fp,tn,fn\n" +
                      row + "\n");
  return row;
}

void ExperimentRunner::emit_outputs(const SweepResult& result) const {
  std::filesystem::create_directories(cfg_.out_dir);
  write_runs_csv(cfg_.out_dir + "/runs.csv", result.records);
  std::vector<std::string> warnings;
  const std::vector<SummaryRow> summary = aggregate(result.records, &warnings);
  write_summary_csv(cfg_.out_dir + "/summary.csv", summary);
  write_plots(cfg_.out_dir, summary);
  if (!ssl_loss_rows_.empty()) {
    std::ostringstream os;
    os << "run_id,epoch,mean_loss\n";
    for (const std::string& row : ssl_loss_rows_) os << row << "\n";
    write_text_file(cfg_.out_dir + "/ssl_loss.csv", os.str());
  }
  for (const std::string& w : warnings) log("warning: " + w);
  for (const std::string& f : result.failures) log("failure: " + f);
}

}  // namespace nrl
