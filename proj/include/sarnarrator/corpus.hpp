#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sarnarrator {

enum class CaptionMethod { a2c, a2c_spatial, sa2c, sa2c_fused, paired_rewritten };

const char* caption_method_name(CaptionMethod m);
CaptionMethod caption_method_from_name(const std::string& name);

struct CaptionRecord {
  std::string id;
  std::string image_path;
  std::string caption;
  std::string raw_caption;  // empty = absent
  CaptionMethod method = CaptionMethod::a2c;
  std::string source_dataset;
  bool fallback_used = false;

  bool operator==(const CaptionRecord&) const = default;
};

struct ManifestHeader {
  int64_t total = 0;
  std::map<std::string, int64_t> per_source;
  std::map<std::string, int64_t> per_method;
  std::string created;
  std::string pipeline_version;
  std::string config_sha256;
};

struct CorpusManifest {
  std::vector<CaptionRecord> records;
  ManifestHeader header;
};

// Record JSON: {"id","image","caption","raw_caption"?,"method","source",
// "fallback"}; raw_caption is omitted when empty.
std::string caption_record_to_json_line(const CaptionRecord& record);
CaptionRecord caption_record_from_json_line(const std::string& line);

// Builds the header (counts, fingerprint, version) over the records,
// preserving append order. Rejects duplicate ids and empty captions.
CorpusManifest assemble(std::vector<CaptionRecord> records,
                        const std::string& created,
                        const std::string& config_sha256);

void write_manifest(const CorpusManifest& manifest,
                    const std::string& records_path,
                    const std::string& header_path);
CorpusManifest read_manifest(const std::string& records_path,
                             const std::string& header_path);
std::vector<CaptionRecord> read_records(const std::string& records_path);

struct HistogramBucket {
  std::string label;  // "0-4", "5-9", ...
  int64_t lo = 0;
  int64_t count = 0;
};

struct CorpusStats {
  int64_t total_records = 0;
  double mean_caption_length_words = 0.0;
  std::vector<HistogramBucket> length_histogram;  // ascending, width 5
  std::vector<std::pair<std::string, int64_t>> top_words;
  std::map<std::string, int64_t> per_source_counts;
  std::map<std::string, int64_t> per_method_counts;
};

// Word counts use the canonical tokenizer; top_words drops the fixed
// 50-entry stopword list and keeps the 20 most frequent (count descending,
// ties by word ascending).
CorpusStats compute_stats(const CorpusManifest& manifest);
std::string stats_to_json(const CorpusStats& stats);

const std::vector<std::string>& stopword_list();

struct SplitResult {
  CorpusManifest train;
  CorpusManifest test;
};

// Stratified by source_dataset with a per-source generator seeded from
// seed + fnv1a(source); each side keeps the original manifest order.
SplitResult split(const CorpusManifest& manifest, double train_ratio,
                  double test_ratio, uint64_t seed);

}  // namespace sarnarrator
