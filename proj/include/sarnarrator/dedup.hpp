#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sarnarrator/image.hpp"
#include "sarnarrator/types.hpp"

namespace sarnarrator {

struct PHash {
  uint64_t bits = 0;

  bool operator==(const PHash&) const = default;
};

// 64-bit perceptual hash: grayscale, 32x32 area-average resize, 2D DCT-II,
// top-left 8x8 block, DC dropped, bit i = coefficient i > median of the 63
// AC coefficients (row-major block order, DC bit fixed 0).
PHash phash64(const ImageU8& image);

int hamming(PHash a, PHash b);

struct DedupPolicy {
  int global_max_distance = 0;
  std::map<std::string, int> per_source_max_distance;

  // Per-source threshold applies only when both samples share that source.
  int max_distance_for(const std::string& source_a,
                       const std::string& source_b) const;
};

struct DropRecord {
  std::string dropped_id;
  std::string kept_id;
  int distance = 0;
  std::string rule;  // "global" | "source:<name>"
};

struct HashedSample {
  std::string id;
  std::string source_dataset;
  PHash hash;
};

struct DedupResult {
  std::vector<size_t> kept_indices;  // into the input vector, ascending
  std::vector<DropRecord> dropped;
};

// Greedy first-kept scan in input order: a sample is dropped iff some earlier
// kept sample lies within the applicable max distance; the earliest such kept
// sample is named in the ledger.
DedupResult dedup_hashes(const std::vector<HashedSample>& samples,
                         const DedupPolicy& policy);

struct CorpusDedupResult {
  std::vector<AnnotatedSample> kept;
  std::vector<DropRecord> dropped;
};

// Hashes each sample's image from disk, then runs dedup_hashes. Hashing
// errors are re-raised with the offending sample id.
CorpusDedupResult dedup_corpus(const std::vector<AnnotatedSample>& samples,
                               const DedupPolicy& policy);

std::string drop_record_to_json_line(const DropRecord& record);
DropRecord drop_record_from_json_line(const std::string& line);

}  // namespace sarnarrator
