#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "panoref/pipeline.hpp"
#include "panoref/synth.hpp"

namespace panoref {

inline constexpr int kConfigVersion = 1;

struct SynthConfig {
  std::optional<std::filesystem::path> world_spec;  // else the standard world
  StandardWorldOptions standard;
  CorruptionModel corruption{CorruptionModel::uniform_flip(0.0)};
  bool corrupt_things_only{true};
  // Also write primal labels (projection of the rendered images, then
  // corruption) so refine can run without a separate project step.
  bool write_primal{true};
};

struct Config {
  std::filesystem::path dataset_root{"."};
  std::string gt_dir{"labels_gt"};
  std::string primal_dir{"labels_primal"};
  std::string refined_dir{"labels_refined"};
  std::string eval_dir{"labels_refined"};  // labels that cmd_eval scores
  std::filesystem::path output_dir{"out"};
  std::uint64_t seed{0};
  std::size_t workers{0};  // 0 = all cores
  std::size_t scene_window{40};
  PipelineParams pipeline;
  std::vector<std::size_t> ablate_sizes{3, 5, 10, 20, 50};
  SynthConfig synth;

  // Label directories resolved against the dataset root.
  std::filesystem::path labels(const std::string& dir) const;
  void validate() const;
};

// Parses a config document. Relative paths resolve against `base_dir`.
// Unknown keys and wrong types are ConfigErrors.
Config parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
Config read_config(const std::filesystem::path& path);
std::string format_config(const Config& cfg);

// FNV-1a over the canonical form of everything that affects outputs
// (paths and worker count excluded), as 16 hex digits.
std::string config_hash(const Config& cfg);

}  // namespace panoref
