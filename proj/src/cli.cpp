#include "ensemjudge/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/pipeline.hpp"

namespace ensemjudge::cli {

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ensemble detector for LLM-generated Chinese text"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool verbose = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("-o,--out-dir", out_dir, "Base directory for outputs and artifacts");
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_flag("-v,--verbose", verbose, "Print warnings and progress");
  };
  auto* fit = app.add_subcommand("fit", "Mine the lexicon, build token tables, calibrate, fit the strategy book");
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate per-length thresholds for score detectors");
  auto* predict = app.add_subcommand("predict", "Judge the input set and write predictions");
  auto* evaluate = app.add_subcommand("eval", "Score predictions against gold labels");
  auto* augment = app.add_subcommand("augment", "Write an adversarially transformed copy of a dataset");
  for (auto* sub : {fit, calibrate, predict, evaluate, augment}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    std::optional<std::filesystem::path> out_path;
    if (!out_dir.empty()) out_path = out_dir;
    const auto cfg = pipeline::load_config(config_path, out_path, seed);
    std::vector<std::string> warnings;
    if (fit->parsed()) {
      warnings = pipeline::cmd_fit(cfg);
      if (verbose) out << "artifacts written to " << cfg.artifacts_dir.string() << '\n';
    } else if (calibrate->parsed()) {
      warnings = pipeline::cmd_calibrate(cfg);
      if (verbose) out << "threshold profiles written to " << (cfg.artifacts_dir / "thresholds").string() << '\n';
    } else if (predict->parsed()) {
      pipeline::cmd_predict(cfg);
      if (verbose) out << "predictions written to " << cfg.predictions.string() << '\n';
    } else if (evaluate->parsed()) {
      const auto report = pipeline::cmd_eval(cfg);
      out << eval::report_to_table(report, cfg.system_name);
    } else if (augment->parsed()) {
      pipeline::cmd_augment(cfg);
      if (verbose) out << "augmented set written to " << cfg.augmented.string() << '\n';
    }
    if (verbose) {
      for (const auto& w : warnings) err << "warning: " << w << '\n';
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const AdapterError& e) {
    err << "adapter error: " << e.what() << '\n';
    return kAdapterError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace ensemjudge::cli
