#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrl/experiment.hpp"
#include "nrl/kernels.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::int64_t seed = -1;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts.config, "experiment config file");
  if (config_required) c->required();
  cmd->add_option("--seed", opts.seed, "override the configured seed list");
  cmd->add_option("--out", opts.out, "override the configured output dir");
  cmd->add_flag("--quiet", opts.quiet, "suppress progress logging");
}

nrl::ExperimentConfig load_config(const CommonOpts& opts) {
  nrl::ExperimentConfig cfg = nrl::ExperimentConfig::load(opts.config);
  if (opts.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(opts.seed)};
  if (!opts.out.empty()) cfg.out_dir = opts.out;
  return cfg;
}

int finish_sweep(nrl::ExperimentRunner& runner, const nrl::SweepResult& res,
                 bool quiet) {
  runner.emit_outputs(res);
  for (const std::string& f : res.failures) {
    std::cerr << "error: " << f << "\n";
  }
  if (!quiet) {
    std::cerr << "[nrl] " << res.records.size() << " runs completed, "
              << res.failures.size() << " failed\n";
  }
  return res.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisy-label representation-learning lab"};
  app.require_subcommand(1);

  CommonOpts pre_o, ft_o, det_o, main_o, dur_o, ext_o, agg_o, plot_o;
  std::string ft_ckpt, det_ckpt;

  auto* cmd_pre = app.add_subcommand("pretrain", "self-supervised pre-training");
  add_common(cmd_pre, pre_o, true);

  auto* cmd_ft = app.add_subcommand("finetune", "supervised fine-tuning");
  add_common(cmd_ft, ft_o, true);
  cmd_ft->add_option("--checkpoint", ft_ckpt, "encoder checkpoint to start from");

  auto* cmd_det = app.add_subcommand("detect", "label-error detection");
  add_common(cmd_det, det_o, true);
  cmd_det->add_option("--checkpoint", det_ckpt, "encoder checkpoint to start from");

  auto* cmd_main = app.add_subcommand("sweep-main", "noise-rate sweep");
  add_common(cmd_main, main_o, true);

  auto* cmd_dur = app.add_subcommand("sweep-duration", "pre-training duration sweep");
  add_common(cmd_dur, dur_o, true);

  auto* cmd_ext = app.add_subcommand("extended", "extended fine-tuning protocol");
  add_common(cmd_ext, ext_o, true);

  auto* cmd_agg = app.add_subcommand("aggregate", "rebuild summary.csv from runs.csv");
  add_common(cmd_agg, agg_o, false);

  auto* cmd_plot = app.add_subcommand("plot", "rebuild charts from summary.csv");
  add_common(cmd_plot, plot_o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_pre->parsed()) {
      const nrl::ExperimentConfig cfg = load_config(pre_o);
      nrl::ExperimentRunner runner(cfg, pre_o.quiet);
      for (const std::uint64_t seed : cfg.seeds) runner.run_pretrain_only(seed);
      return 0;
    }
    if (cmd_ft->parsed()) {
      const nrl::ExperimentConfig cfg = load_config(ft_o);
      nrl::ExperimentRunner runner(cfg, ft_o.quiet);
      for (const std::uint64_t seed : cfg.seeds) {
        const nrl::RunRecord r = runner.run_finetune_only(seed, ft_ckpt);
        std::cout << nrl::to_csv_row(r) << "\n";
      }
      return 0;
    }
    if (cmd_det->parsed()) {
      const nrl::ExperimentConfig cfg = load_config(det_o);
      nrl::ExperimentRunner runner(cfg, det_o.quiet);
      for (const std::uint64_t seed : cfg.seeds) {
        std::cout << runner.run_detect_only(seed, det_ckpt) << "\n";
      }
      return 0;
    }
    if (cmd_main->parsed()) {
      nrl::ExperimentRunner runner(load_config(main_o), main_o.quiet);
      return finish_sweep(runner, runner.run_main_sweep(), main_o.quiet);
    }
    if (cmd_dur->parsed()) {
      nrl::ExperimentRunner runner(load_config(dur_o), dur_o.quiet);
      return finish_sweep(runner, runner.run_duration_sweep(), dur_o.quiet);
    }
    if (cmd_ext->parsed()) {
      nrl::ExperimentRunner runner(load_config(ext_o), ext_o.quiet);
      return finish_sweep(runner, runner.run_extended_training(), ext_o.quiet);
    }
    if (cmd_agg->parsed()) {
      const std::string dir = agg_o.out.empty() ? "out" : agg_o.out;
      const std::vector<nrl::RunRecord> records =
          nrl::read_runs_csv(dir + "/runs.csv");
      std::vector<std::string> warnings;
      const std::vector<nrl::SummaryRow> rows =
          nrl::aggregate(records, &warnings);
      nrl::write_summary_csv(dir + "/summary.csv", rows);
      if (!agg_o.quiet) {
        for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
      }
      return 0;
    }
    if (cmd_plot->parsed()) {
      const std::string dir = plot_o.out.empty() ? "out" : plot_o.out;
      nrl::write_plots(dir, nrl::read_summary_csv(dir + "/summary.csv"));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
