#include "sarnarrator/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sarnarrator/errors.hpp"
#include "sarnarrator/eval.hpp"
#include "sarnarrator/util.hpp"
#include "sarnarrator/version.hpp"

namespace sarnarrator {

namespace {

constexpr size_t kTopWords = 20;
constexpr int64_t kBucketWidth = 5;
constexpr double kRatioTolerance = 1e-9;

nlohmann::json parse_json_or_raise(const std::string& text,
                                   const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(errc::malformed_document, what + ": " + e.what());
  }
}

ManifestHeader header_from_json(const nlohmann::json& j) {
  ManifestHeader h;
  try {
    h.total = j.at("total").get<int64_t>();
    h.per_source = j.at("per_source").get<std::map<std::string, int64_t>>();
    h.per_method = j.at("per_method").get<std::map<std::string, int64_t>>();
    h.created = j.at("created").get<std::string>();
    h.pipeline_version = j.at("pipeline_version").get<std::string>();
    h.config_sha256 = j.at("config_sha256").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    raise(errc::malformed_document, std::string("bad manifest header: ") + e.what());
  }
  return h;
}

std::string header_to_json(const ManifestHeader& h) {
  nlohmann::ordered_json j;
  j["total"] = h.total;
  j["per_source"] = h.per_source;
  j["per_method"] = h.per_method;
  j["created"] = h.created;
  j["pipeline_version"] = h.pipeline_version;
  j["config_sha256"] = h.config_sha256;
  return j.dump(2) + "\n";
}

}  // namespace

const char* caption_method_name(CaptionMethod m) {
  switch (m) {
    case CaptionMethod::a2c: return "a2c";
    case CaptionMethod::a2c_spatial: return "a2c_spatial";
    case CaptionMethod::sa2c: return "sa2c";
    case CaptionMethod::sa2c_fused: return "sa2c_fused";
    case CaptionMethod::paired_rewritten: return "paired_rewritten";
  }
  return "a2c";
}

CaptionMethod caption_method_from_name(const std::string& name) {
  if (name == "a2c") return CaptionMethod::a2c;
  if (name == "a2c_spatial") return CaptionMethod::a2c_spatial;
  if (name == "sa2c") return CaptionMethod::sa2c;
  if (name == "sa2c_fused") return CaptionMethod::sa2c_fused;
  if (name == "paired_rewritten") return CaptionMethod::paired_rewritten;
  raise(errc::malformed_document, "unknown caption method: " + name);
}

std::string caption_record_to_json_line(const CaptionRecord& record) {
  nlohmann::ordered_json j;
  j["id"] = record.id;
  j["image"] = record.image_path;
  j["caption"] = record.caption;
  if (!record.raw_caption.empty()) j["raw_caption"] = record.raw_caption;
  j["method"] = caption_method_name(record.method);
  j["source"] = record.source_dataset;
  j["fallback"] = record.fallback_used;
  return j.dump();
}

CaptionRecord caption_record_from_json_line(const std::string& line) {
  const nlohmann::json j = parse_json_or_raise(line, "bad caption record");
  CaptionRecord record;
  try {
    record.id = j.at("id").get<std::string>();
    record.image_path = j.at("image").get<std::string>();
    record.caption = j.at("caption").get<std::string>();
    if (j.contains("raw_caption")) {
      record.raw_caption = j.at("raw_caption").get<std::string>();
    }
    record.method = caption_method_from_name(j.at("method").get<std::string>());
    record.source_dataset = j.at("source").get<std::string>();
    record.fallback_used = j.at("fallback").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    raise(errc::malformed_document, std::string("bad caption record: ") + e.what());
  }
  return record;
}

CorpusManifest assemble(std::vector<CaptionRecord> records,
                        const std::string& created,
                        const std::string& config_sha256) {
  if (records.empty()) {
    raise(errc::empty_manifest, "no records to assemble");
  }
  std::unordered_set<std::string> seen;
  CorpusManifest manifest;
  manifest.header.created = created;
  manifest.header.pipeline_version = kPipelineVersion;
  manifest.header.config_sha256 = config_sha256;
  for (const CaptionRecord& record : records) {
    if (!seen.insert(record.id).second) {
      raise(errc::duplicate_id, "duplicate record id: " + record.id);
    }
    if (record.caption.empty()) {
      raise(errc::invalid_argument, "record " + record.id + ": empty caption");
    }
    ++manifest.header.per_source[record.source_dataset];
    ++manifest.header.per_method[caption_method_name(record.method)];
  }
  manifest.header.total = static_cast<int64_t>(records.size());
  manifest.records = std::move(records);
  return manifest;
}

void write_manifest(const CorpusManifest& manifest,
                    const std::string& records_path,
                    const std::string& header_path) {
  std::string body;
  for (const CaptionRecord& record : manifest.records) {
    body += caption_record_to_json_line(record);
    body += '\n';
  }
  write_file(records_path, body);
  write_file(header_path, header_to_json(manifest.header));
}

std::vector<CaptionRecord> read_records(const std::string& records_path) {
  std::vector<CaptionRecord> records;
  size_t line_no = 0;
  for (const std::string& line : read_lines(records_path)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      records.push_back(caption_record_from_json_line(line));
    } catch (const Error& e) {
      raise(e.code(), records_path + ":" + std::to_string(line_no) + ": " +
                          e.what());
    }
  }
  return records;
}

CorpusManifest read_manifest(const std::string& records_path,
                             const std::string& header_path) {
  CorpusManifest manifest;
  manifest.records = read_records(records_path);
  manifest.header = header_from_json(
      parse_json_or_raise(read_file(header_path), header_path));
  if (manifest.header.total !=
      static_cast<int64_t>(manifest.records.size())) {
    raise(errc::malformed_document,
          header_path + ": header total " +
              std::to_string(manifest.header.total) + " does not match " +
              std::to_string(manifest.records.size()) + " records");
  }
  return manifest;
}

const std::vector<std::string>& stopword_list() {
  static const std::vector<std::string> words = {
      "a",    "an",   "the",  "and",   "or",    "but",  "of",   "in",
      "on",   "at",   "to",   "from",  "by",    "with", "for",  "as",
      "is",   "are",  "was",  "were",  "be",    "been", "being", "am",
      "it",   "its",  "this", "that",  "these", "those", "there", "here",
      "he",   "she",  "they", "them",  "his",   "her",  "their", "we",
      "you",  "i",    "not",  "no",    "so",    "if",   "than",  "then",
      "into", "over"};
  return words;
}

CorpusStats compute_stats(const CorpusManifest& manifest) {
  if (manifest.records.empty()) {
    raise(errc::empty_manifest, "cannot compute stats over an empty manifest");
  }
  const std::unordered_set<std::string> stopwords(stopword_list().begin(),
                                                  stopword_list().end());
  CorpusStats stats;
  stats.total_records = static_cast<int64_t>(manifest.records.size());

  int64_t total_words = 0;
  std::map<int64_t, int64_t> buckets;
  std::unordered_map<std::string, int64_t> word_counts;
  for (const CaptionRecord& record : manifest.records) {
    const TokenizedCaption tokens = tokenize(record.caption);
    const auto n = static_cast<int64_t>(tokens.size());
    total_words += n;
    ++buckets[(n / kBucketWidth) * kBucketWidth];
    for (const std::string& token : tokens) {
      if (stopwords.count(token) == 0) ++word_counts[token];
    }
    ++stats.per_source_counts[record.source_dataset];
    ++stats.per_method_counts[caption_method_name(record.method)];
  }

  stats.mean_caption_length_words =
      static_cast<double>(total_words) / static_cast<double>(stats.total_records);
  for (const auto& [lo, count] : buckets) {
    stats.length_histogram.push_back(
        {std::to_string(lo) + "-" + std::to_string(lo + kBucketWidth - 1), lo,
         count});
  }

  std::vector<std::pair<std::string, int64_t>> ranked(word_counts.begin(),
                                                      word_counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > kTopWords) ranked.resize(kTopWords);
  stats.top_words = std::move(ranked);
  return stats;
}

std::string stats_to_json(const CorpusStats& stats) {
  nlohmann::ordered_json j;
  j["total_records"] = stats.total_records;
  j["mean_caption_length_words"] =
      std::round(stats.mean_caption_length_words * 10.0) / 10.0;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const HistogramBucket& b : stats.length_histogram) {
    hist.push_back(nlohmann::ordered_json::array({b.label, b.count}));
  }
  j["length_histogram"] = hist;
  nlohmann::ordered_json words = nlohmann::ordered_json::array();
  for (const auto& [word, count] : stats.top_words) {
    words.push_back(nlohmann::ordered_json::array({word, count}));
  }
  j["top_words"] = words;
  j["per_source"] = stats.per_source_counts;
  j["per_method"] = stats.per_method_counts;
  return j.dump(2) + "\n";
}

SplitResult split(const CorpusManifest& manifest, double train_ratio,
                  double test_ratio, uint64_t seed) {
  if (train_ratio <= 0.0 || test_ratio <= 0.0 ||
      std::abs(train_ratio + test_ratio - 1.0) > kRatioTolerance) {
    raise(errc::invalid_argument,
          "split ratios must be positive and sum to 1.0");
  }

  std::map<std::string, std::vector<size_t>> by_source;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    by_source[manifest.records[i].source_dataset].push_back(i);
  }

  std::vector<bool> in_train(manifest.records.size(), false);
  for (auto& [source, indices] : by_source) {
    std::mt19937_64 rng(seed + fnv1a64(source));
    deterministic_shuffle(indices, rng);
    const auto train_n = static_cast<size_t>(std::llround(
        train_ratio * static_cast<double>(indices.size())));
    for (size_t i = 0; i < indices.size(); ++i) {
      if (i < train_n) in_train[indices[i]] = true;
    }
  }

  std::vector<CaptionRecord> train_records;
  std::vector<CaptionRecord> test_records;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    (in_train[i] ? train_records : test_records)
        .push_back(manifest.records[i]);
  }
  if (train_records.empty() || test_records.empty()) {
    raise(errc::degenerate_split,
          "split produced an empty side (train=" +
              std::to_string(train_records.size()) + ", test=" +
              std::to_string(test_records.size()) + ")");
  }

  SplitResult result;
  result.train = assemble(std::move(train_records), manifest.header.created,
                          manifest.header.config_sha256);
  result.test = assemble(std::move(test_records), manifest.header.created,
                         manifest.header.config_sha256);
  return result;
}

}  // namespace sarnarrator
