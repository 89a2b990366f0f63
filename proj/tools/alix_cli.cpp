#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alix/config.hpp"
#include "alix/errors.hpp"
#include "alix/experiment.hpp"
#include "alix/metrics_io.hpp"

using namespace alix;

namespace {

struct RunArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seeds, out, name, resume;
  std::int64_t stop_at = -1;
  bool print_config = false;
  bool quiet = false;
};

void add_run_flags(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("config", a.config_path, "INI config file (defaults are used when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--set", a.sets, "Override a config field: section.key=value (repeatable)");
  cmd->add_option("--seeds", a.seeds, "Comma-separated seeds (same as --set run.seeds=...)");
  cmd->add_option("--out", a.out, "Output directory (run.output_dir)");
  cmd->add_option("--name", a.name, "Run name (run.name)");
  cmd->add_flag("--print-config", a.print_config, "Print the resolved config as JSON and exit");
  cmd->add_flag("-q,--quiet", a.quiet, "No progress output");
}

// Precedence: dedicated flags > --set > file > defaults.
ExperimentConfig resolve(const RunArgs& a, const std::string& mode) {
  std::vector<std::string> overrides{"run.mode=" + mode};
  overrides.insert(overrides.end(), a.sets.begin(), a.sets.end());
  if (!a.seeds.empty()) overrides.push_back("run.seeds=" + a.seeds);
  if (!a.out.empty()) overrides.push_back("run.output_dir=" + a.out);
  if (!a.name.empty()) overrides.push_back("run.name=" + a.name);
  if (a.config_path.empty()) return config_from_string("", overrides);
  return load_config(a.config_path, overrides);
}

RunOptions options(const RunArgs& a) {
  RunOptions o;
  o.resume_from = a.resume;
  if (a.stop_at >= 0) o.stop_at = static_cast<std::uint64_t>(a.stop_at);
  if (!a.quiet) o.log = [](const std::string& m) { std::cerr << m << '\n'; };
  return o;
}

int run_mode(const RunArgs& a, const std::string& mode) {
  ExperimentConfig cfg = resolve(a, mode);
  if (a.print_config) {
    std::cout << to_json(cfg).dump(2) << '\n';
    return 0;
  }
  if (!a.resume.empty() && cfg.seeds.size() != 1) throw UsageError("--resume needs exactly one seed");
  auto results = run_experiment(cfg, options(a));
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.ok;
    std::cout << r.dir << ": " << r.summary.value("status", "?");
    if (r.summary.contains("return_mean"))
      std::cout << "  return " << r.summary["return_mean"].get<double>() << " +- " << r.summary["return_sd"].get<double>();
    std::cout << '\n';
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LIX / A-LIX experiments on the dot-reacher task"};
  app.require_subcommand(1);

  RunArgs train_args, offline_args, probe_args, sweep_args;
  auto* train = app.add_subcommand("train", "Online actor-critic training");
  add_run_flags(train, train_args);
  auto* offline = app.add_subcommand("offline", "Offline SARSA evaluation then policy improvement on random data");
  add_run_flags(offline, offline_args);
  auto* probe = app.add_subcommand("probe", "Offline evaluation followed by encoder sensitivity probes");
  add_run_flags(probe, probe_args);
  for (auto [cmd, args] : {std::pair{train, &train_args}, {offline, &offline_args}, {probe, &probe_args}}) {
    cmd->add_option("--resume", args->resume, "Continue from a checkpoint of the same config and seed")
        ->check(CLI::ExistingFile);
    cmd->add_option("--stop-at", args->stop_at, "Checkpoint and stop after this step");
  }

  auto* sweep = app.add_subcommand("sweep", "Run every row of a preset sweep");
  add_run_flags(sweep, sweep_args);
  std::string sweep_name = "ablations";
  std::string sweep_mode = "offline-eval";
  sweep->add_option("--sweep", sweep_name, "Sweep: ablations | regularizers")->capture_default_str();
  sweep->add_option("--mode", sweep_mode, "Run mode for every row")->capture_default_str();
  bool dry_run = false;
  sweep->add_flag("--dry-run", dry_run, "List the expanded runs without executing them");

  auto* plot = app.add_subcommand("plot", "Render metrics.csv columns as an SVG line chart");
  std::string csv, svg, title;
  std::vector<std::string> columns;
  plot->add_option("metrics", csv, "metrics.csv file")->required()->check(CLI::ExistingFile);
  plot->add_option("-c,--columns", columns, "Columns to plot")->required()->delimiter(',');
  plot->add_option("-o,--output", svg, "Output SVG (stdout when omitted)");
  plot->add_option("--title", title, "Chart title");

  auto* keys = app.add_subcommand("keys", "List every config key with its default");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return run_mode(train_args, "online");
    if (*offline) return run_mode(offline_args, "offline-eval");
    if (*probe) return run_mode(probe_args, "probe");
    if (*sweep) {
      ExperimentConfig base = resolve(sweep_args, sweep_mode);
      auto rows = expand_sweep(base, sweep_name);
      if (dry_run || sweep_args.print_config) {
        for (const auto& r : rows)
          for (auto s : r.seeds) std::cout << seed_directory(r, s) << '\n';
        return 0;
      }
      RunOptions o = options(sweep_args);
      bool ok = true;
      for (const auto& r : rows)
        for (const auto& res : run_experiment(r, o)) ok = ok && res.ok;
      const std::string path = base.output_dir + "/" + base.name + "/sweep_summary.json";
      std::ofstream(path) << collect_sweep(rows).dump(2) << '\n';
      std::cout << path << '\n';
      return ok ? 0 : 1;
    }
    if (*plot) {
      const std::string out = render_plot(read_metrics(csv), columns, title);
      if (svg.empty()) {
        std::cout << out;
      } else {
        std::ofstream f(svg);
        if (!f) throw UsageError("cannot write " + svg);
        f << out;
      }
      return 0;
    }
    if (*keys) {
      const auto j = to_json(ExperimentConfig{});
      for (const auto& k : config_keys()) {
        const auto dot = k.find('.');
        std::cout << k << " = " << j[k.substr(0, dot)][k.substr(dot + 1)].dump() << '\n';
      }
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IncompatibleVersion& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
