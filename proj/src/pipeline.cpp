#include "sarnarrator/pipeline.hpp"

#include <algorithm>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>

#include <nlohmann/json.hpp>

#include "sarnarrator/caption.hpp"
#include "sarnarrator/dedup.hpp"
#include "sarnarrator/errors.hpp"
#include "sarnarrator/image.hpp"
#include "sarnarrator/ingest.hpp"
#include "sarnarrator/rewrite.hpp"
#include "sarnarrator/util.hpp"

namespace sarnarrator::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string join_path(const std::string& root, const std::string& rel) {
  if (root.empty()) return rel;
  if (!rel.empty() && fs::path(rel).is_absolute()) return rel;
  return (fs::path(root) / rel).lexically_normal().string();
}

void ensure_parent_dir(const std::string& file_path) {
  const fs::path parent = fs::path(file_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  ensure_parent_dir(path);
  std::string body;
  for (const std::string& line : lines) {
    body += line;
    body += '\n';
  }
  write_file(path, body);
}

void write_caption_records(const std::string& path,
                           const std::vector<CaptionRecord>& records) {
  std::vector<std::string> lines;
  lines.reserve(records.size());
  for (const CaptionRecord& record : records)
    lines.push_back(caption_record_to_json_line(record));
  write_lines(path, lines);
}

std::vector<std::string> expand_mask_paths(const std::vector<std::string>& paths) {
  std::vector<std::string> files;
  for (const std::string& entry : paths) {
    if (fs::is_directory(entry)) {
      std::vector<std::string> found;
      for (const auto& item : fs::directory_iterator(entry)) {
        if (!item.is_regular_file()) continue;
        if (item.path().extension() != ".png") continue;
        found.push_back(item.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(entry);
    }
  }
  return files;
}

void fill_dims_from_image(AnnotatedSample& sample) {
  try {
    const ImageU8 image = load_png(sample.image_path);
    sample.width = image.width;
    sample.height = image.height;
  } catch (const Error&) {
    sample.width = 0;
    sample.height = 0;
  }
}

std::unordered_map<std::string, std::string> load_optical_map(
    const std::string& tsv_path) {
  std::unordered_map<std::string, std::string> map;
  if (tsv_path.empty()) return map;
  for (const PairedCaption& row : parse_paired_tsv(tsv_path))
    map[row.id] = row.caption;
  return map;
}

std::vector<AnnotatedSample> adapt_source(const SourceConfig& source) {
  std::vector<AnnotatedSample> samples;
  if (source.adapter == "coco") {
    for (const std::string& path : source.paths) {
      for (AnnotatedSample sample : parse_detection_coco(path)) {
        sample.image_path = join_path(source.image_root, sample.image_path);
        samples.push_back(std::move(sample));
      }
    }
  } else if (source.adapter == "voc") {
    for (const std::string& path : source.paths) {
      AnnotatedSample sample = parse_detection_voc(path);
      const std::string rel =
          sample.image_path.empty() ? sample.id + ".png" : sample.image_path;
      sample.image_path = join_path(source.image_root, rel);
      samples.push_back(std::move(sample));
    }
  } else if (source.adapter == "mask") {
    const auto optical = load_optical_map(source.optical_captions);
    for (const std::string& mask_file : expand_mask_paths(source.paths)) {
      AnnotatedSample sample;
      sample.id = fs::path(mask_file).stem().string();
      sample.task = TaskType::segmentation;
      sample.mask_path = mask_file;
      sample.image_path = join_path(source.image_root, sample.id + ".png");
      fill_dims_from_image(sample);
      const auto it = optical.find(sample.id);
      if (it != optical.end()) sample.optical_caption = it->second;
      samples.push_back(std::move(sample));
    }
  } else if (source.adapter == "paired_tsv") {
    for (const std::string& path : source.paths) {
      for (const PairedCaption& row : parse_paired_tsv(path)) {
        AnnotatedSample sample;
        sample.id = row.id;
        sample.task = TaskType::paired;
        sample.optical_caption = row.caption;
        sample.image_path = join_path(source.image_root, row.id + ".png");
        fill_dims_from_image(sample);
        samples.push_back(std::move(sample));
      }
    }
  } else {
    raise(errc::config_error, "unknown adapter '" + source.adapter + "'");
  }
  for (AnnotatedSample& sample : samples) {
    sample.source_dataset = source.name;
    sample.task = source.task;
  }
  return samples;
}

const SourceConfig& source_by_name(const PipelineConfig& config,
                                   const std::string& name) {
  for (const SourceConfig& source : config.sources)
    if (source.name == name) return source;
  raise(errc::config_error, "sample references unknown source '" + name + "'");
}

std::unique_ptr<ChatEndpoint> make_endpoint(const PipelineConfig& config) {
  const RewriteStageConfig& rw = config.rewrite;
  if (rw.mode == RewriteMode::replay)
    return std::make_unique<ReplayEndpoint>(rw.cassette);
  check_live_credentials(config);
  HttpEndpointConfig http;
  http.base_url = rw.base_url;
  http.api_key = api_key_from_env();
  http.max_concurrency = rw.max_concurrency;
  http.requests_per_second = rw.requests_per_second;
  auto live = std::make_unique<HttpChatEndpoint>(http);
  if (rw.cassette.empty())
    return live;
  return std::make_unique<ReplayEndpoint>(rw.cassette, std::move(live));
}

}  // namespace

ArtifactPaths::ArtifactPaths(const std::string& dir) : out_dir(dir) {
  const fs::path base(dir);
  samples = (base / "samples.jsonl").string();
  validation = (base / "validation.jsonl").string();
  captions_raw = (base / "captions_raw.jsonl").string();
  captions = (base / "captions.jsonl").string();
  captions_dedup = (base / "captions_dedup.jsonl").string();
  dedup_ledger = (base / "dedup_ledger.jsonl").string();
  manifest_records = (base / "manifest" / "records.jsonl").string();
  manifest_header = (base / "manifest" / "header.json").string();
  stats = (base / "stats.json").string();
  train_records = (base / "split" / "train_records.jsonl").string();
  train_header = (base / "split" / "train_header.json").string();
  test_records = (base / "split" / "test_records.jsonl").string();
  test_header = (base / "split" / "test_header.json").string();
}

std::string manifest_created_stamp(RewriteMode mode) {
  if (mode == RewriteMode::replay) return "1970-01-01T00:00:00Z";
  const std::time_t now = std::time(nullptr);
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

std::vector<AnnotatedSample> run_ingest(const PipelineConfig& config) {
  if (config.sources.empty())
    raise(errc::config_error, "no sources configured");
  const ArtifactPaths paths(config.output_dir);

  std::vector<AnnotatedSample> kept;
  std::vector<std::string> report;
  for (const SourceConfig& source : config.sources) {
    std::vector<AnnotatedSample> samples;
    try {
      samples = adapt_source(source);
    } catch (const Error& e) {
      ordered_json line;
      line["type"] = "source_error";
      line["source"] = source.name;
      line["message"] = e.what();
      report.push_back(line.dump());
      continue;
    }
    for (AnnotatedSample& sample : samples) {
      const ValidationVerdict verdict = validate_sample(sample);
      ordered_json line;
      line["type"] = "sample";
      line["id"] = sample.id;
      line["source"] = source.name;
      line["keep"] = verdict.keep;
      line["reason"] = verdict.reason;
      report.push_back(line.dump());
      if (verdict.keep) kept.push_back(std::move(sample));
    }
  }
  write_lines(paths.validation, report);
  write_samples_jsonl(paths.samples, kept);
  return kept;
}

std::vector<CaptionRecord> run_caption(const PipelineConfig& config) {
  const ArtifactPaths paths(config.output_dir);
  const std::vector<AnnotatedSample> samples = read_samples_jsonl(paths.samples);

  std::map<std::string, CategoryMapping> mappings;
  std::vector<CaptionRecord> records;
  records.reserve(samples.size());
  for (const AnnotatedSample& sample : samples) {
    CaptionRecord record;
    record.id = sample.id;
    record.image_path = sample.image_path;
    record.source_dataset = sample.source_dataset;
    switch (sample.task) {
      case TaskType::detection:
        if (config.caption.spatial_enabled) {
          record.caption = a2c_caption_spatial(sample.detections, sample.width,
                                               sample.height);
          record.method = CaptionMethod::a2c_spatial;
        } else {
          record.caption = a2c_caption(sample.detections);
          record.method = CaptionMethod::a2c;
        }
        break;
      case TaskType::segmentation: {
        const SourceConfig& source = source_by_name(config, sample.source_dataset);
        auto it = mappings.find(source.name);
        if (it == mappings.end())
          it = mappings.emplace(source.name,
                                load_category_mapping(source.mapping_path))
                   .first;
        const CategoryGrid grid = load_mask(sample.mask_path, it->second,
                                            config.caption.mask_color_tolerance);
        record.caption = sa2c_caption(grid, it->second,
                                      config.caption.threshold_percent);
        record.method = CaptionMethod::sa2c;
        break;
      }
      case TaskType::paired:
        record.caption = sample.optical_caption;
        record.raw_caption = sample.optical_caption;
        record.method = CaptionMethod::paired_rewritten;
        break;
    }
    records.push_back(std::move(record));
  }
  write_caption_records(paths.captions_raw, records);
  return records;
}

std::vector<CaptionRecord> run_rewrite(const PipelineConfig& config) {
  const ArtifactPaths paths(config.output_dir);
  std::vector<CaptionRecord> records = read_records(paths.captions_raw);

  std::unordered_map<std::string, std::string> optical;
  bool needs_fusion = false;
  bool needs_rewrite = false;
  for (const CaptionRecord& record : records) {
    if (record.method == CaptionMethod::sa2c) needs_fusion = true;
    if (record.method == CaptionMethod::paired_rewritten) needs_rewrite = true;
  }
  if (needs_fusion) {
    for (const AnnotatedSample& sample : read_samples_jsonl(paths.samples))
      if (sample.task == TaskType::segmentation && !sample.optical_caption.empty())
        optical[sample.id] = sample.optical_caption;
  }

  std::vector<IclExample> store;
  if (needs_rewrite && !config.rewrite.icl_store.empty())
    store = read_icl_store(config.rewrite.icl_store);

  RewriteOptions options;
  options.model = config.rewrite.model;
  options.temperature = config.rewrite.temperature;
  options.retries = config.rewrite.retries;
  options.backoff_initial_ms = config.rewrite.backoff_initial_ms;
  options.fallback_enabled = config.rewrite.fallback_enabled;

  std::unique_ptr<ChatEndpoint> endpoint;
  if (needs_fusion || needs_rewrite) endpoint = make_endpoint(config);

  for (CaptionRecord& record : records) {
    if (record.method == CaptionMethod::paired_rewritten) {
      const RewriteJob job =
          make_rewrite_job(record.id, record.caption, store,
                           static_cast<size_t>(config.rewrite.n_examples),
                           config.seed);
      const RewriteOutcome outcome = rewrite_caption(*endpoint, job, options);
      record.raw_caption = record.caption;
      record.caption = outcome.caption;
      record.fallback_used = outcome.fallback_used;
    } else if (record.method == CaptionMethod::sa2c) {
      const auto it = optical.find(record.id);
      if (it == optical.end()) continue;
      const RewriteOutcome outcome =
          fuse_captions(*endpoint, record.caption, it->second, options);
      record.raw_caption = record.caption;
      record.caption = outcome.caption;
      record.method = CaptionMethod::sa2c_fused;
      record.fallback_used = outcome.fallback_used;
    }
  }
  write_caption_records(paths.captions, records);
  return records;
}

std::vector<CaptionRecord> run_dedup(const PipelineConfig& config) {
  const ArtifactPaths paths(config.output_dir);
  const std::vector<CaptionRecord> records = read_records(paths.captions);

  std::vector<HashedSample> hashed;
  hashed.reserve(records.size());
  for (const CaptionRecord& record : records) {
    try {
      const ImageU8 image = load_png(record.image_path);
      hashed.push_back({record.id, record.source_dataset, phash64(image)});
    } catch (const Error& e) {
      raise(e.code(), "record " + record.id + ": " + e.what());
    }
  }

  DedupPolicy policy;
  policy.global_max_distance = config.dedup.global_max_distance;
  policy.per_source_max_distance = config.dedup.per_source_max_distance;
  const DedupResult result = dedup_hashes(hashed, policy);

  std::vector<CaptionRecord> kept;
  kept.reserve(result.kept_indices.size());
  for (const size_t index : result.kept_indices) kept.push_back(records[index]);

  std::vector<std::string> ledger;
  ledger.reserve(result.dropped.size());
  for (const DropRecord& drop : result.dropped)
    ledger.push_back(drop_record_to_json_line(drop));

  write_caption_records(paths.captions_dedup, kept);
  write_lines(paths.dedup_ledger, ledger);
  return kept;
}

CorpusManifest run_assemble(const PipelineConfig& config) {
  const ArtifactPaths paths(config.output_dir);
  std::vector<CaptionRecord> records = read_records(paths.captions_dedup);
  const CorpusManifest manifest =
      assemble(std::move(records), manifest_created_stamp(config.rewrite.mode),
               config_fingerprint(config));
  ensure_parent_dir(paths.manifest_records);
  write_manifest(manifest, paths.manifest_records, paths.manifest_header);
  return manifest;
}

CorpusStats run_stats(const PipelineConfig& config) {
  const ArtifactPaths paths(config.output_dir);
  const CorpusManifest manifest =
      read_manifest(paths.manifest_records, paths.manifest_header);
  const CorpusStats stats = compute_stats(manifest);
  write_file(paths.stats, stats_to_json(stats) + "\n");
  return stats;
}

SplitResult run_split(const PipelineConfig& config) {
  const ArtifactPaths paths(config.output_dir);
  const CorpusManifest manifest =
      read_manifest(paths.manifest_records, paths.manifest_header);
  SplitResult result =
      split(manifest, config.split.train, config.split.test, config.split.seed);
  ensure_parent_dir(paths.train_records);
  write_manifest(result.train, paths.train_records, paths.train_header);
  write_manifest(result.test, paths.test_records, paths.test_header);
  return result;
}

CorpusManifest run_all(const PipelineConfig& config) {
  run_ingest(config);
  run_caption(config);
  run_rewrite(config);
  run_dedup(config);
  CorpusManifest manifest = run_assemble(config);
  run_stats(config);
  run_split(config);
  return manifest;
}

}  // namespace sarnarrator::pipeline
