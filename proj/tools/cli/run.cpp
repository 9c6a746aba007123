#include "run.hpp"

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace imia::cli {

namespace {

void error_record(const std::string& kind, const std::string& command, const std::string& message, int code) {
  const json rec{{"error", kind}, {"command", command}, {"message", message}, {"exit_code", code}};
  std::cerr << rec.dump() << '\n';
}

const char* kind_of(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const ParseError*>(&e)) return "parse_error";
  if (dynamic_cast<const FormatError*>(&e)) return "format_error";
  if (dynamic_cast<const ShapeError*>(&e)) return "shape_error";
  if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
  return "internal_error";
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Membership-inference attack lab for tabular MLPs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "imia 0.1.0");

  std::string config_path;
  std::string output_dir;
  int jobs = 1;
  bool verbose = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Experiment config (JSON) or a stage manifest")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", output_dir, "Override output_dir from the config");
    sub->add_option("-j,--jobs", jobs, "Upper bound on worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("-v,--verbose", verbose, "Progress messages on stderr");
  };

  struct Stage {
    const char* name;
    const char* help;
    void (*fn)(const ExperimentConfig&, const RunOptions&);
  };
  const Stage stages[] = {
      {"gen-data", "Generate or import the dataset and its five-way split", cmd_gen_data},
      {"train-target", "Play the membership game and train the target", cmd_train_target},
      {"prepare", "Train the attack's ensemble (imitative, adaptive or shadow)", cmd_prepare},
      {"attack", "Score every query and write scores.csv", cmd_attack},
      {"analyze", "Residual, Q-Q, Wasserstein and likelihood-ratio diagnostics", cmd_analyze},
  };
  for (const auto& s : stages) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    sub->get_option("--config")->required();
  }

  auto* evaluate = app.add_subcommand("evaluate", "Metrics from a score CSV");
  add_common(evaluate);
  std::string scores_path;
  std::vector<double> fprs;
  bool no_roc = false;
  evaluate->add_option("--scores", scores_path, "Score CSV; metrics go next to --output-dir or ./metrics")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--fpr", fprs, "FPR operating points (overrides the config)");
  evaluate->add_flag("--no-roc", no_roc, "Skip roc.csv");

  auto* bench = app.add_subcommand("bench", "Run every stage and report wall-clock time per phase");
  add_common(bench);
  bench->get_option("--config")->required();

  std::string command = "imia";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    for (auto* sub : app.get_subcommands()) command = sub->get_name();
    error_record("usage_error", command, e.what(), kExitUserError);
    return kExitUserError;
  }
  command = app.get_subcommands().front()->get_name();

  set_log_sink([verbose](LogLevel level, std::string_view msg) {
    if (level == LogLevel::kInfo && !verbose) return;
    std::fprintf(stderr, "%s: %.*s\n", level == LogLevel::kInfo ? "info" : "warning",
                 static_cast<int>(msg.size()), msg.data());
  });

  try {
    const RunOptions opts{jobs};
    if (command == "evaluate" && config_path.empty()) {
      if (scores_path.empty()) throw ConfigError("evaluate needs --scores or --config");
      const std::filesystem::path out = output_dir.empty() ? std::filesystem::path("metrics") : std::filesystem::path(output_dir);
      EvaluateRequest req{scores_path, resolve_output_dir(out), fprs.empty() ? MetricsSection{}.fpr : fprs,
                          !no_roc};
      std::printf("%s\n", cmd_evaluate(req).dump().c_str());
      return kExitOk;
    }
    ExperimentConfig config = load_experiment_config(config_path);
    if (!output_dir.empty()) config.output_dir = output_dir;
    if (!fprs.empty()) config.metrics.fpr = fprs;
    if (no_roc) config.metrics.roc = false;
    config.validate();

    if (command == "evaluate") {
      if (!scores_path.empty()) {
        EvaluateRequest req{scores_path, layout_for(config).metrics(), config.metrics.fpr, config.metrics.roc};
        std::printf("%s\n", cmd_evaluate(req).dump().c_str());
      } else {
        cmd_evaluate(config, opts);
      }
    } else if (command == "bench") {
      cmd_bench(config, opts);
    } else {
      for (const auto& s : stages)
        if (command == s.name) s.fn(config, opts);
    }
    return kExitOk;
  } catch (const InternalError& e) {
    error_record("internal_error", command, e.what(), kExitInternalError);
    return kExitInternalError;
  } catch (const Error& e) {
    error_record(kind_of(e), command, e.what(), kExitUserError);
    return kExitUserError;
  } catch (const std::filesystem::filesystem_error& e) {
    error_record("io_error", command, e.what(), kExitUserError);
    return kExitUserError;
  } catch (const std::exception& e) {
    error_record("internal_error", command, e.what(), kExitInternalError);
    return kExitInternalError;
  }
}

}  // namespace imia::cli
