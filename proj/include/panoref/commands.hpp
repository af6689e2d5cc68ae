#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "panoref/config.hpp"
#include "panoref/metrics.hpp"

namespace panoref {

// Receives one JSON object per call (already serialized, no newline).
using LogSink = std::function<void(const std::string&)>;

struct SceneLog {
  std::size_t scene{0};
  std::size_t scans{0};
  std::size_t points{0};
  std::size_t ground_points{0};
  std::int32_t ground_clusters{0};
  std::int32_t other_clusters{0};
  std::size_t noise_points{0};
  double runtime_s{0.0};  // refinement compute, file I/O excluded
};

struct RefineSummary {
  std::vector<SceneLog> scenes;
  double mean_scene_runtime_s{0.0};
};

struct AblationRow {
  std::size_t min_cluster_size{0};
  double mean_scene_runtime_s{0.0};
  double pq{0.0};
  double miou{0.0};
};

// Primal labels for every scan: images -> <primal dir>.
void cmd_project(const Config& cfg, const LogSink& log = {});
// <primal dir> -> <refined dir> (or `refined_dir` when given), plus
// <output_dir>/refine_log.jsonl.
RefineSummary cmd_refine(const Config& cfg, const LogSink& log = {},
                         const std::optional<std::filesystem::path>& refined_dir = {});
// Scores <eval dir> against <gt dir>; writes eval_report.json/.txt into
// output_dir (or `report_dir`). With a baseline report, also writes the
// delta table.
EvalReport cmd_eval(const Config& cfg, const LogSink& log = {},
                    const std::optional<std::filesystem::path>& pred_dir = {},
                    const std::optional<std::filesystem::path>& report_dir = {},
                    const std::optional<std::filesystem::path>& baseline = {});
// Materializes a synthetic dataset at dataset_root.
void cmd_synth(const Config& cfg, const LogSink& log = {});
// refine + eval per min cluster size; writes ablation.txt/.json.
std::vector<AblationRow> cmd_ablate(const Config& cfg, const LogSink& log = {});

std::string render_ablation_text(const std::vector<AblationRow>& rows);

}  // namespace panoref
