#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sarnarrator/types.hpp"

namespace sarnarrator {

struct SourceConfig {
  std::string name;
  TaskType task = TaskType::detection;
  std::string adapter;  // coco | voc | mask | paired_tsv
  std::vector<std::string> paths;
  std::string image_root;
  std::string mapping_path;      // segmentation
  std::string optical_captions;  // segmentation fusion TSV, optional
};

struct DedupConfig {
  int global_max_distance = 0;
  std::map<std::string, int> per_source_max_distance;
};

struct CaptionStageConfig {
  double threshold_percent = 1.0;
  bool spatial_enabled = true;
  int mask_color_tolerance = 0;
};

enum class RewriteMode { replay, live };

const char* rewrite_mode_name(RewriteMode mode);

struct RewriteStageConfig {
  std::string base_url;  // required in live mode
  std::string model = "deepseek-chat";
  int n_examples = 3;
  int max_concurrency = 4;
  int retries = 3;
  int backoff_initial_ms = 200;
  bool fallback_enabled = true;
  double temperature = 0.0;
  double requests_per_second = 0.0;
  std::string cassette;
  std::string icl_store;
  RewriteMode mode = RewriteMode::replay;
};

struct SplitStageConfig {
  double train = 0.8;
  double test = 0.2;
  uint64_t seed = 0;
};

struct PipelineConfig {
  std::string output_dir = "out";
  uint64_t seed = 0;
  std::vector<SourceConfig> sources;
  DedupConfig dedup;
  CaptionStageConfig caption;
  RewriteStageConfig rewrite;
  SplitStageConfig split;
};

// Strict parse: unknown keys anywhere are a ConfigError. Relative source,
// cassette, and ICL-store paths resolve against the config file's directory.
PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::string& where,
                                     const std::string& base_dir);

// flag > env > file. Env: SAR_NARRATOR_MODE, SAR_NARRATOR_SEED,
// SAR_NARRATOR_OUT.
void apply_overrides(PipelineConfig& config,
                     const std::optional<std::string>& mode_flag,
                     const std::optional<uint64_t>& seed_flag,
                     const std::optional<std::string>& out_flag);

// Canonical dump of the effective config; its SHA-256 is the manifest
// fingerprint. output_dir is excluded so the fingerprint tracks corpus
// content, not artifact placement.
std::string canonical_config_json(const PipelineConfig& config);
std::string config_fingerprint(const PipelineConfig& config);

// Live mode requires SAR_NARRATOR_API_KEY; raises ConfigError otherwise.
void check_live_credentials(const PipelineConfig& config);
std::string api_key_from_env();

}  // namespace sarnarrator
