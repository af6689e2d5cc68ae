#include "panoref/commands.hpp"

#include <chrono>
#include <cstdio>
#include <mutex>

#include <json.hpp>

#include "panoref/errors.hpp"
#include "panoref/parallel.hpp"
#include "panoref/projection.hpp"
#include "panoref/random.hpp"

namespace panoref {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

namespace {

void emit(const LogSink& log, const ordered& j) {
  if (log) log(j.dump());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<PointCloud> read_scans(const DatasetIndex& ds, std::span<const std::size_t> ids) {
  std::vector<PointCloud> out;
  for (auto s : ids) {
    out.push_back(read_point_cloud(scan_path(ds, s)));
    out.back().scan_id = ds.scan_ids[s];
  }
  return out;
}

std::vector<PanopticLabels> read_label_set(const DatasetIndex& ds, const fs::path& dir,
                                           std::span<const std::size_t> ids, std::span<const PointCloud> scans) {
  std::vector<PanopticLabels> out;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    out.push_back(read_labels(label_path(dir, ds.scan_ids[ids[k]]), ds.classes));
    if (out.back().size() != scans[k].size())
      throw LengthMismatch(label_path(dir, ds.scan_ids[ids[k]]).string() + ": " +
                           std::to_string(out.back().size()) + " labels for " +
                           std::to_string(scans[k].size()) + " points");
  }
  return out;
}

}  // namespace

void cmd_project(const Config& cfg, const LogSink& log) {
  const DatasetIndex ds = load_dataset(cfg.dataset_root, cfg.scene_window);
  const fs::path out_dir = cfg.labels(cfg.primal_dir);
  make_dirs(out_dir);
  std::vector<std::size_t> labeled(ds.scan_ids.size());
  parallel_for(ds.scan_ids.size(), cfg.workers, [&](std::size_t s) {
    PointCloud cloud = read_point_cloud(scan_path(ds, s));
    std::vector<LabelImage> images;
    for (std::size_t c = 0; c < ds.cameras.size(); ++c)
      images.push_back(read_label_image(image_path(ds, s, c), ds.classes));
    const PanopticLabels labels = label_points(cloud, ds.cameras, images, cfg.pipeline.min_depth);
    write_labels(labels, label_path(out_dir, ds.scan_ids[s]));
    for (auto sem : labels.semantic) labeled[s] += sem != kVoid;
  });
  for (std::size_t s = 0; s < ds.scan_ids.size(); ++s)
    emit(log, {{"event", "project"}, {"scan", ds.scan_ids[s]}, {"labeled_points", labeled[s]}});
}

RefineSummary cmd_refine(const Config& cfg, const LogSink& log, const std::optional<fs::path>& refined_dir) {
  const DatasetIndex ds = load_dataset(cfg.dataset_root, cfg.scene_window);
  cfg.pipeline.validate();
  const fs::path in_dir = cfg.labels(cfg.primal_dir);
  const fs::path out_dir = refined_dir ? *refined_dir : cfg.labels(cfg.refined_dir);
  make_dirs(out_dir);
  make_dirs(cfg.output_dir);

  PipelineParams params = cfg.pipeline;
  params.ground.seed = cfg.seed;

  RefineSummary summary;
  summary.scenes.resize(ds.scenes.size());
  parallel_for(ds.scenes.size(), cfg.workers, [&](std::size_t k) {
    const auto& ids = ds.scenes[k];
    const auto scans = read_scans(ds, ids);
    const auto primal = read_label_set(ds, in_dir, ids, scans);
    std::vector<RigidTransform> poses;
    for (auto s : ids) poses.push_back(ds.poses[s]);

    const auto start = std::chrono::steady_clock::now();
    const SceneResult result = refine_scene(scans, primal, poses, params, ds.classes);
    const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (std::size_t j = 0; j < ids.size(); ++j)
      write_labels(result.refined[j], label_path(out_dir, ds.scan_ids[ids[j]]));
    SceneLog& entry = summary.scenes[k];
    entry.scene = k;
    entry.scans = ids.size();
    entry.points = result.ground_mask.size();
    for (auto g : result.ground_mask) entry.ground_points += g;
    entry.ground_clusters = result.clustering.ground_clusters;
    entry.other_clusters = result.clustering.other_clusters;
    entry.noise_points = result.clustering.ground_noise + result.clustering.other_noise;
    entry.runtime_s = runtime;
  });

  std::string lines;
  for (const auto& e : summary.scenes) {
    ordered j{{"event", "refine_scene"},
              {"scene", e.scene},
              {"scans", e.scans},
              {"points", e.points},
              {"ground_points", e.ground_points},
              {"ground_clusters", e.ground_clusters},
              {"other_clusters", e.other_clusters},
              {"noise_points", e.noise_points},
              {"runtime_s", e.runtime_s}};
    lines += j.dump() + "\n";
    emit(log, j);
    summary.mean_scene_runtime_s += e.runtime_s;
  }
  if (!summary.scenes.empty()) summary.mean_scene_runtime_s /= static_cast<double>(summary.scenes.size());
  write_file_text(cfg.output_dir / "refine_log.jsonl", lines);
  return summary;
}

EvalReport cmd_eval(const Config& cfg, const LogSink& log, const std::optional<fs::path>& pred_dir,
                    const std::optional<fs::path>& report_dir, const std::optional<fs::path>& baseline) {
  const DatasetIndex ds = load_dataset(cfg.dataset_root, cfg.scene_window);
  const fs::path pred = pred_dir ? *pred_dir : cfg.labels(cfg.eval_dir);
  const fs::path gt = cfg.labels(cfg.gt_dir);
  const fs::path out = report_dir ? *report_dir : cfg.output_dir;
  std::optional<EvalReport> base;
  if (baseline) base = report_from_json(read_file_text(*baseline));
  make_dirs(out);

  const std::size_t n = ds.scan_ids.size();
  std::vector<PanopticEvaluator> partial(n, PanopticEvaluator(ds.classes));
  parallel_for(n, cfg.workers, [&](std::size_t s) {
    const auto p = read_labels(label_path(pred, ds.scan_ids[s]), ds.classes);
    const auto g = read_labels(label_path(gt, ds.scan_ids[s]), ds.classes);
    if (p.size() != g.size()) throw LengthMismatch("scan " + ds.scan_ids[s] + ": prediction and ground truth differ in length");
    partial[s].add_scan(p, g);
  });
  PanopticEvaluator total(ds.classes);
  for (const auto& e : partial) total.merge(e);
  EvalReport report = total.report();
  report.config_hash = config_hash(cfg);

  write_file_text(out / "eval_report.json", report_to_json(report));
  write_file_text(out / "eval_report.txt", render_report_text(report));
  if (base) {
    const ReportDelta delta = report_diff(report, *base);
    write_file_text(out / "eval_delta.json", delta_to_json(delta));
    write_file_text(out / "eval_delta.txt", render_delta_text(delta));
  }
  emit(log, {{"event", "eval"}, {"scans", report.scan_count}, {"pq", report.pq}, {"miou", report.miou}});
  return report;
}

void cmd_synth(const Config& cfg, const LogSink& log) {
  const WorldSpec spec = cfg.synth.world_spec ? parse_world_spec(read_file_text(*cfg.synth.world_spec))
                                              : standard_world(cfg.seed, cfg.synth.standard);
  const SyntheticDataset data = generate_world(spec, cfg.seed, cfg.workers);
  write_dataset(data, cfg.dataset_root);
  write_file_text(cfg.dataset_root / "world.json", format_world_spec(spec));

  std::size_t corrupted = 0;
  if (cfg.synth.write_primal) {
    const fs::path dir = cfg.labels(cfg.primal_dir);
    make_dirs(dir);
    std::vector<std::size_t> flips(data.scans.size());
    parallel_for(data.scans.size(), cfg.workers, [&](std::size_t s) {
      const PanopticLabels primal =
          label_points(data.scans[s], data.cameras, data.label_images[s], cfg.pipeline.min_depth);
      std::vector<std::uint8_t> eligible;
      if (cfg.synth.corrupt_things_only) {
        eligible.resize(primal.size());
        for (std::size_t i = 0; i < eligible.size(); ++i)
          eligible[i] = data.classes.is_thing(data.gt_labels[s].semantic[i]);
      }
      const auto result = corrupt_labels(primal, cfg.synth.corruption, derive_seed(cfg.seed, 0xC000 + s),
                                         data.classes, data.scans[s].points, eligible);
      flips[s] = result.corrupted.size();
      write_labels(result.labels, label_path(dir, data.scans[s].scan_id));
    });
    for (auto f : flips) corrupted += f;
  }
  std::size_t points = 0;
  for (const auto& s : data.scans) points += s.size();
  emit(log, {{"event", "synth"},
             {"root", cfg.dataset_root.string()},
             {"scans", data.scans.size()},
             {"points", points},
             {"objects", spec.objects.size()},
             {"corrupted_labels", corrupted}});
}

std::vector<AblationRow> cmd_ablate(const Config& cfg, const LogSink& log) {
  std::vector<AblationRow> rows;
  for (const std::size_t s : cfg.ablate_sizes) {
    Config run = cfg;
    run.pipeline.cluster.min_cluster_size = s;
    const fs::path dir = cfg.output_dir / "ablate" / ("s" + std::to_string(s));
    run.output_dir = dir;
    const RefineSummary refine = cmd_refine(run, {}, dir / "labels");
    const EvalReport report = cmd_eval(run, {}, dir / "labels", dir);
    rows.push_back({s, refine.mean_scene_runtime_s, report.pq, report.miou});
    emit(log, {{"event", "ablate"},
               {"min_cluster_size", s},
               {"mean_scene_runtime_s", refine.mean_scene_runtime_s},
               {"pq", report.pq},
               {"miou", report.miou}});
  }
  make_dirs(cfg.output_dir);
  write_file_text(cfg.output_dir / "ablation.txt", render_ablation_text(rows));
  ordered j{{"schema", "panoref.ablation"}, {"version", 1}, {"rows", ordered::array()}};
  for (const auto& r : rows)
    j["rows"].push_back({{"min_cluster_size", r.min_cluster_size},
                         {"mean_scene_runtime_s", r.mean_scene_runtime_s},
                         {"pq", r.pq},
                         {"miou", r.miou}});
  write_file_text(cfg.output_dir / "ablation.json", j.dump(2) + "\n");
  return rows;
}

std::string render_ablation_text(const std::vector<AblationRow>& rows) {
  std::string out = "  s   runtime_s      PQ    mIoU\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%3zu  %10.3f  %6.1f  %6.1f\n", r.min_cluster_size, r.mean_scene_runtime_s,
                  100.0 * r.pq, 100.0 * r.miou);
    out += line;
  }
  return out;
}

}  // namespace panoref
