#pragma once

#include <string>
#include <vector>

#include "sarnarrator/config.hpp"
#include "sarnarrator/corpus.hpp"
#include "sarnarrator/types.hpp"

namespace sarnarrator::pipeline {

// Fixed artifact layout under the output directory. Every stage reads the
// previous stage's artifact, so subcommands compose with run-all.
struct ArtifactPaths {
  explicit ArtifactPaths(const std::string& out_dir);

  std::string out_dir;
  std::string samples;          // samples.jsonl
  std::string validation;       // validation.jsonl
  std::string captions_raw;     // captions_raw.jsonl
  std::string captions;         // captions.jsonl
  std::string captions_dedup;   // captions_dedup.jsonl
  std::string dedup_ledger;     // dedup_ledger.jsonl
  std::string manifest_records; // manifest/records.jsonl
  std::string manifest_header;  // manifest/header.json
  std::string stats;            // stats.json
  std::string train_records;    // split/train_records.jsonl
  std::string train_header;     // split/train_header.json
  std::string test_records;     // split/test_records.jsonl
  std::string test_header;      // split/test_header.json
};

// Adapters -> validation -> samples.jsonl + validation.jsonl. An adapter
// error aborts that source (logged in the validation report); other sources
// still run.
std::vector<AnnotatedSample> run_ingest(const PipelineConfig& config);

// samples.jsonl -> captions_raw.jsonl (detection -> A2C, segmentation ->
// SA2C, paired -> optical passthrough).
std::vector<CaptionRecord> run_caption(const PipelineConfig& config);

// captions_raw.jsonl -> captions.jsonl. Paired captions are rewritten, SA2C
// captions with a matching optical caption are fused; raw_caption keeps the
// pre-rewrite text.
std::vector<CaptionRecord> run_rewrite(const PipelineConfig& config);

// captions.jsonl -> captions_dedup.jsonl + dedup_ledger.jsonl.
std::vector<CaptionRecord> run_dedup(const PipelineConfig& config);

// captions_dedup.jsonl -> manifest/. The created stamp is pinned in replay
// mode so reruns are byte-identical.
CorpusManifest run_assemble(const PipelineConfig& config);

// manifest/ -> stats.json.
CorpusStats run_stats(const PipelineConfig& config);

// manifest/ -> split/.
SplitResult run_split(const PipelineConfig& config);

// All stages in order: ingest, caption, rewrite, dedup, assemble, stats,
// split. Returns the assembled manifest.
CorpusManifest run_all(const PipelineConfig& config);

std::string manifest_created_stamp(RewriteMode mode);

}  // namespace sarnarrator::pipeline
