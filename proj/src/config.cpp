#include "sarnarrator/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <string>

#include <nlohmann/json.hpp>

#include "sarnarrator/errors.hpp"
#include "sarnarrator/util.hpp"

namespace sarnarrator {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) raise(errc::config_error, where + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known)
      raise(errc::config_error, where + ": unknown key '" + item.key() + "'");
  }
}

std::string get_string(const json& j, const char* key, const std::string& where,
                       const std::string& fallback = "") {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string())
    raise(errc::config_error, where + ": '" + key + "' must be a string");
  return j[key].get<std::string>();
}

std::string require_string(const json& j, const char* key,
                           const std::string& where) {
  if (!j.contains(key))
    raise(errc::config_error, where + ": missing required key '" + key + "'");
  if (!j[key].is_string() || j[key].get<std::string>().empty())
    raise(errc::config_error,
          where + ": '" + key + "' must be a non-empty string");
  return j[key].get<std::string>();
}

double get_number(const json& j, const char* key, const std::string& where,
                  double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number())
    raise(errc::config_error, where + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const char* key, const std::string& where,
            int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer())
    raise(errc::config_error, where + ": '" + key + "' must be an integer");
  return j[key].get<int>();
}

bool get_bool(const json& j, const char* key, const std::string& where,
              bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean())
    raise(errc::config_error, where + ": '" + key + "' must be a boolean");
  return j[key].get<bool>();
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

SourceConfig parse_source(const json& j, const std::string& where,
                          const std::string& base_dir) {
  check_keys(j,
             {"name", "task", "adapter", "paths", "image_root", "mapping",
              "optical_captions"},
             where);
  SourceConfig source;
  source.name = require_string(j, "name", where);
  source.task = task_from_name(require_string(j, "task", where));
  source.adapter = require_string(j, "adapter", where);
  if (source.adapter != "coco" && source.adapter != "voc" &&
      source.adapter != "mask" && source.adapter != "paired_tsv")
    raise(errc::config_error,
          where + ": unknown adapter '" + source.adapter + "'");
  if (!j.contains("paths") || !j["paths"].is_array() || j["paths"].empty())
    raise(errc::config_error,
          where + ": 'paths' must be a non-empty array of strings");
  for (const auto& entry : j["paths"]) {
    if (!entry.is_string())
      raise(errc::config_error, where + ": 'paths' must contain only strings");
    source.paths.push_back(resolve_path(entry.get<std::string>(), base_dir));
  }
  source.image_root =
      resolve_path(get_string(j, "image_root", where), base_dir);
  source.mapping_path = resolve_path(get_string(j, "mapping", where), base_dir);
  source.optical_captions =
      resolve_path(get_string(j, "optical_captions", where), base_dir);
  if (source.task == TaskType::segmentation && source.mapping_path.empty())
    raise(errc::config_error,
          where + ": segmentation sources require 'mapping'");
  return source;
}

DedupConfig parse_dedup(const json& j, const std::string& where) {
  check_keys(j, {"global_max_distance", "per_source_max_distance"}, where);
  DedupConfig dedup;
  dedup.global_max_distance =
      get_int(j, "global_max_distance", where, dedup.global_max_distance);
  if (j.contains("per_source_max_distance")) {
    const json& per = j["per_source_max_distance"];
    if (!per.is_object())
      raise(errc::config_error,
            where + ": 'per_source_max_distance' must be an object");
    for (const auto& item : per.items()) {
      if (!item.value().is_number_integer())
        raise(errc::config_error, where + ": per-source distance for '" +
                                      item.key() + "' must be an integer");
      dedup.per_source_max_distance[item.key()] = item.value().get<int>();
    }
  }
  return dedup;
}

CaptionStageConfig parse_caption(const json& j, const std::string& where) {
  check_keys(j, {"threshold_percent", "spatial_enabled", "mask_color_tolerance"},
             where);
  CaptionStageConfig caption;
  caption.threshold_percent =
      get_number(j, "threshold_percent", where, caption.threshold_percent);
  caption.spatial_enabled =
      get_bool(j, "spatial_enabled", where, caption.spatial_enabled);
  caption.mask_color_tolerance =
      get_int(j, "mask_color_tolerance", where, caption.mask_color_tolerance);
  return caption;
}

RewriteMode mode_from_name(const std::string& name, const std::string& where) {
  if (name == "replay") return RewriteMode::replay;
  if (name == "live") return RewriteMode::live;
  raise(errc::config_error,
        where + ": mode must be 'live' or 'replay', got '" + name + "'");
}

RewriteStageConfig parse_rewrite(const json& j, const std::string& where,
                                 const std::string& base_dir) {
  check_keys(j,
             {"base_url", "model", "n_examples", "max_concurrency", "retries",
              "backoff_initial_ms", "fallback_enabled", "temperature",
              "requests_per_second", "cassette", "icl_store", "mode"},
             where);
  RewriteStageConfig rewrite;
  rewrite.base_url = get_string(j, "base_url", where);
  rewrite.model = get_string(j, "model", where, rewrite.model);
  rewrite.n_examples = get_int(j, "n_examples", where, rewrite.n_examples);
  rewrite.max_concurrency =
      get_int(j, "max_concurrency", where, rewrite.max_concurrency);
  rewrite.retries = get_int(j, "retries", where, rewrite.retries);
  rewrite.backoff_initial_ms =
      get_int(j, "backoff_initial_ms", where, rewrite.backoff_initial_ms);
  rewrite.fallback_enabled =
      get_bool(j, "fallback_enabled", where, rewrite.fallback_enabled);
  rewrite.temperature =
      get_number(j, "temperature", where, rewrite.temperature);
  rewrite.requests_per_second = get_number(j, "requests_per_second", where,
                                           rewrite.requests_per_second);
  rewrite.cassette = resolve_path(get_string(j, "cassette", where), base_dir);
  rewrite.icl_store = resolve_path(get_string(j, "icl_store", where), base_dir);
  if (j.contains("mode"))
    rewrite.mode = mode_from_name(require_string(j, "mode", where), where);
  if (rewrite.n_examples < 0)
    raise(errc::config_error, where + ": 'n_examples' must be >= 0");
  if (rewrite.max_concurrency < 1)
    raise(errc::config_error, where + ": 'max_concurrency' must be >= 1");
  if (rewrite.retries < 1)
    raise(errc::config_error, where + ": 'retries' must be >= 1");
  return rewrite;
}

SplitStageConfig parse_split(const json& j, const std::string& where) {
  check_keys(j, {"train", "test", "seed"}, where);
  SplitStageConfig split;
  split.train = get_number(j, "train", where, split.train);
  split.test = get_number(j, "test", where, split.test);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      raise(errc::config_error, where + ": 'seed' must be an integer");
    split.seed = j["seed"].get<uint64_t>();
  }
  return split;
}

}  // namespace

const char* rewrite_mode_name(RewriteMode mode) {
  return mode == RewriteMode::live ? "live" : "replay";
}

PipelineConfig parse_pipeline_config(const std::string& json_text,
                                     const std::string& where,
                                     const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(errc::config_error, where + ": invalid JSON: " + e.what());
  }
  check_keys(j,
             {"output_dir", "seed", "sources", "dedup", "caption", "rewrite",
              "split"},
             where);

  PipelineConfig config;
  config.output_dir = get_string(j, "output_dir", where, config.output_dir);
  if (config.output_dir.empty())
    raise(errc::config_error, where + ": 'output_dir' must be non-empty");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      raise(errc::config_error, where + ": 'seed' must be an integer");
    config.seed = j["seed"].get<uint64_t>();
  }

  if (!j.contains("sources") || !j["sources"].is_array())
    raise(errc::config_error, where + ": 'sources' must be an array");
  size_t index = 0;
  for (const auto& entry : j["sources"]) {
    config.sources.push_back(parse_source(
        entry, where + ": sources[" + std::to_string(index) + "]", base_dir));
    ++index;
  }
  if (config.sources.empty())
    raise(errc::config_error, where + ": 'sources' must not be empty");
  for (size_t a = 0; a < config.sources.size(); ++a)
    for (size_t b = a + 1; b < config.sources.size(); ++b)
      if (config.sources[a].name == config.sources[b].name)
        raise(errc::config_error, where + ": duplicate source name '" +
                                      config.sources[a].name + "'");

  if (j.contains("dedup"))
    config.dedup = parse_dedup(j["dedup"], where + ": dedup");
  if (j.contains("caption"))
    config.caption = parse_caption(j["caption"], where + ": caption");
  if (j.contains("rewrite"))
    config.rewrite = parse_rewrite(j["rewrite"], where + ": rewrite", base_dir);
  if (j.contains("split"))
    config.split = parse_split(j["split"], where + ": split");
  return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  const std::string text = read_file(path);
  const std::string base_dir =
      std::filesystem::path(path).parent_path().string();
  return parse_pipeline_config(text, path, base_dir);
}

void apply_overrides(PipelineConfig& config,
                     const std::optional<std::string>& mode_flag,
                     const std::optional<uint64_t>& seed_flag,
                     const std::optional<std::string>& out_flag) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* value = std::getenv(name);
    if (value == nullptr || *value == '\0') return std::nullopt;
    return std::string(value);
  };

  std::optional<std::string> mode = mode_flag;
  if (!mode) mode = env("SAR_NARRATOR_MODE");
  if (mode) config.rewrite.mode = mode_from_name(*mode, "mode override");

  std::optional<uint64_t> seed = seed_flag;
  if (!seed) {
    if (auto text = env("SAR_NARRATOR_SEED")) {
      try {
        seed = std::stoull(*text);
      } catch (const std::exception&) {
        raise(errc::config_error,
              "SAR_NARRATOR_SEED must be an unsigned integer, got '" + *text +
                  "'");
      }
    }
  }
  if (seed) config.seed = *seed;

  std::optional<std::string> out = out_flag;
  if (!out) out = env("SAR_NARRATOR_OUT");
  if (out) {
    if (out->empty())
      raise(errc::config_error, "output directory override must be non-empty");
    config.output_dir = *out;
  }
}

std::string canonical_config_json(const PipelineConfig& config) {
  // output_dir is deliberately absent: the fingerprint identifies the
  // corpus-producing configuration, not where the artifacts land.
  ordered_json j;
  j["seed"] = config.seed;
  j["sources"] = ordered_json::array();
  for (const SourceConfig& source : config.sources) {
    ordered_json s;
    s["name"] = source.name;
    s["task"] = task_name(source.task);
    s["adapter"] = source.adapter;
    s["paths"] = source.paths;
    s["image_root"] = source.image_root;
    s["mapping"] = source.mapping_path;
    s["optical_captions"] = source.optical_captions;
    j["sources"].push_back(std::move(s));
  }
  j["dedup"]["global_max_distance"] = config.dedup.global_max_distance;
  j["dedup"]["per_source_max_distance"] = ordered_json::object();
  for (const auto& [name, dist] : config.dedup.per_source_max_distance)
    j["dedup"]["per_source_max_distance"][name] = dist;
  j["caption"]["threshold_percent"] = config.caption.threshold_percent;
  j["caption"]["spatial_enabled"] = config.caption.spatial_enabled;
  j["caption"]["mask_color_tolerance"] = config.caption.mask_color_tolerance;
  j["rewrite"]["base_url"] = config.rewrite.base_url;
  j["rewrite"]["model"] = config.rewrite.model;
  j["rewrite"]["n_examples"] = config.rewrite.n_examples;
  j["rewrite"]["max_concurrency"] = config.rewrite.max_concurrency;
  j["rewrite"]["retries"] = config.rewrite.retries;
  j["rewrite"]["backoff_initial_ms"] = config.rewrite.backoff_initial_ms;
  j["rewrite"]["fallback_enabled"] = config.rewrite.fallback_enabled;
  j["rewrite"]["temperature"] = config.rewrite.temperature;
  j["rewrite"]["requests_per_second"] = config.rewrite.requests_per_second;
  j["rewrite"]["cassette"] = config.rewrite.cassette;
  j["rewrite"]["icl_store"] = config.rewrite.icl_store;
  j["rewrite"]["mode"] = rewrite_mode_name(config.rewrite.mode);
  j["split"]["train"] = config.split.train;
  j["split"]["test"] = config.split.test;
  j["split"]["seed"] = config.split.seed;
  return j.dump();
}

std::string config_fingerprint(const PipelineConfig& config) {
  return sha256_hex(canonical_config_json(config));
}

std::string api_key_from_env() {
  const char* value = std::getenv("SAR_NARRATOR_API_KEY");
  return value == nullptr ? std::string() : std::string(value);
}

void check_live_credentials(const PipelineConfig& config) {
  if (config.rewrite.mode != RewriteMode::live) return;
  if (config.rewrite.base_url.empty())
    raise(errc::config_error, "live mode requires rewrite.base_url");
  if (api_key_from_env().empty())
    raise(errc::config_error,
          "live mode requires the SAR_NARRATOR_API_KEY environment variable");
}

}  // namespace sarnarrator
