#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "panoref/commands.hpp"
#include "panoref/errors.hpp"
#include "panoref/io.hpp"

namespace fs = std::filesystem;
using namespace panoref;

namespace {

void log_line(const std::string& line) {
  std::fputs(line.c_str(), stderr);
  std::fputc('\n', stderr);
}

int report_error(const char* category, const std::string& message, int code) {
  nlohmann::ordered_json j{{"event", "error"}, {"category", category}, {"message", message}};
  log_line(j.dump());
  return code;
}

struct Overrides {
  std::string config;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dataset;
  std::optional<std::string> output;
  std::optional<std::size_t> scene_window;
  std::optional<std::size_t> min_cluster_size;
  std::optional<std::size_t> min_samples;
  std::optional<double> tau;
  std::optional<double> tau_void;
  std::optional<std::string> primal_dir;
  std::optional<std::string> refined_dir;
  std::optional<std::string> gt_dir;
  std::optional<std::string> pred_dir;
  std::optional<std::string> baseline;
  std::optional<std::string> world;
  std::optional<double> corruption;
  std::vector<std::size_t> sizes;
};

Config load(const Overrides& o) {
  Config cfg = o.config.empty() ? parse_config("{}", fs::current_path()) : read_config(o.config);
  if (o.workers) cfg.workers = *o.workers;
  if (o.seed) cfg.seed = *o.seed;
  if (o.dataset) cfg.dataset_root = *o.dataset;
  if (o.output) cfg.output_dir = *o.output;
  if (o.scene_window) cfg.scene_window = *o.scene_window;
  if (o.min_cluster_size) cfg.pipeline.cluster.min_cluster_size = *o.min_cluster_size;
  if (o.min_samples) cfg.pipeline.cluster.min_samples = *o.min_samples;
  if (o.tau) cfg.pipeline.refine.tau = *o.tau;
  if (o.tau_void) cfg.pipeline.refine.tau_void = *o.tau_void;
  if (o.primal_dir) cfg.primal_dir = *o.primal_dir;
  if (o.refined_dir) cfg.refined_dir = cfg.eval_dir = *o.refined_dir;
  if (o.gt_dir) cfg.gt_dir = *o.gt_dir;
  if (o.pred_dir) cfg.eval_dir = *o.pred_dir;
  if (o.world) cfg.synth.world_spec = fs::path(*o.world);
  if (o.corruption) cfg.synth.corruption.probability = *o.corruption;
  if (!o.sizes.empty()) cfg.ablate_sizes = o.sizes;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Refines projected 2D panoptic labels into 3D point-cloud labels and evaluates them."};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "JSON config file");
  app.add_option("--workers", o.workers, "Worker threads (0 = all cores)");
  app.add_option("--seed", o.seed, "Root random seed");
  app.add_option("--dataset", o.dataset, "Dataset root (overrides dataset_root)");
  app.add_option("--output", o.output, "Output directory (overrides output_dir)");

  auto* project = app.add_subcommand("project", "Project camera label images onto the scans");
  auto* refine = app.add_subcommand("refine", "Refine primal labels scene by scene");
  auto* eval = app.add_subcommand("eval", "Score labels against ground truth");
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  auto* ablate = app.add_subcommand("ablate", "Sweep the minimum cluster size");
  for (auto* sub : {project, refine, eval, synth, ablate}) sub->fallthrough();

  for (auto* sub : {refine, ablate}) {
    sub->add_option("--scene-window", o.scene_window, "Scans per scene when scenes.txt is absent");
    sub->add_option("--min-samples", o.min_samples, "HDBSCAN min_samples");
    sub->add_option("--tau", o.tau, "Rare-class frequency threshold");
    sub->add_option("--tau-void", o.tau_void, "Void-dominance threshold");
    sub->add_option("--primal-dir", o.primal_dir, "Primal label directory");
  }
  refine->add_option("--min-cluster-size", o.min_cluster_size, "HDBSCAN minimum cluster size");
  refine->add_option("--refined-dir", o.refined_dir, "Refined label directory");
  eval->add_option("--pred-dir", o.pred_dir, "Label directory to score");
  eval->add_option("--gt-dir", o.gt_dir, "Ground-truth label directory");
  eval->add_option("--baseline", o.baseline, "Earlier eval_report.json to diff against");
  synth->add_option("--world", o.world, "World spec JSON (default: standard world)");
  synth->add_option("--corruption", o.corruption, "Label flip probability for the primal labels");
  ablate->add_option("--sizes", o.sizes, "Minimum cluster sizes to sweep")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const Config cfg = load(o);
    if (*project) {
      cmd_project(cfg, log_line);
    } else if (*refine) {
      cmd_refine(cfg, log_line);
    } else if (*eval) {
      std::optional<fs::path> baseline;
      if (o.baseline) baseline = *o.baseline;
      const EvalReport report = cmd_eval(cfg, log_line, {}, {}, baseline);
      std::cout << render_report_text(report);
      if (baseline) std::cout << read_file_text(cfg.output_dir / "eval_delta.txt");
    } else if (*synth) {
      cmd_synth(cfg, log_line);
    } else if (*ablate) {
      std::cout << render_ablation_text(cmd_ablate(cfg, log_line));
    }
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorCategory::Config: return report_error("config", e.what(), 1);
      case ErrorCategory::Data: return report_error("data", e.what(), 2);
      default: return report_error("internal", e.what(), 3);
    }
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 3);
  }
  return 0;
}
