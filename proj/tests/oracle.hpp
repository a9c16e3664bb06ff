#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sarnarrator/dedup.hpp"
#include "sarnarrator/image.hpp"
#include "sarnarrator/types.hpp"

// Independent reimplementations of the externally specified behaviors.
// Everything here is written from the rule statements, not from the library
// code: different data structures, different traversal order, no shared
// helpers. Tests compare library output against these.
namespace oracle {

// Count/location caption assembled by a literal template walk.
std::string a2c_text(const std::vector<sarnarrator::DetectionObject>& objects);
std::string a2c_spatial_text(
    const std::vector<sarnarrator::DetectionObject>& objects, int64_t width,
    int64_t height);

// Per-category pixel percentages recomputed straight from the mask image
// bytes (bypasses CategoryGrid entirely).
std::map<std::string, double> mask_percentages(
    const sarnarrator::ImageU8& mask,
    const sarnarrator::CategoryMapping& mapping);
std::string sa2c_text(const std::map<std::string, double>& percents,
                      double threshold);

// Bit-by-bit popcount of the XOR.
int hamming_bits(uint64_t a, uint64_t b);

// Quadratic greedy first-kept dedup scan.
struct DedupOutcome {
  std::vector<size_t> kept;
  std::vector<sarnarrator::DropRecord> dropped;
};
DedupOutcome dedup_quadratic(const std::vector<sarnarrator::HashedSample>& samples,
                             const sarnarrator::DedupPolicy& policy);

// Metric oracles over raw caption strings (own tokenizer).
std::vector<std::string> tokens(const std::string& caption);
double bleu_n(const std::vector<std::string>& candidate,
              const std::vector<std::vector<std::string>>& references, int n,
              bool smooth);
double corpus_bleu_n(
    const std::vector<std::vector<std::string>>& candidates,
    const std::vector<std::vector<std::vector<std::string>>>& references,
    int n, bool smooth);
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::vector<std::string>>& references);
double meteor(const std::vector<std::string>& candidate,
              const std::vector<std::vector<std::string>>& references);
std::vector<double> cider(
    const std::vector<std::vector<std::string>>& candidates,
    const std::vector<std::vector<std::vector<std::string>>>& references);

// Full-sort retrieval recall; scores[q][j] already oriented query-major.
double recall_full_sort(const std::vector<std::vector<float>>& scores, int k);

}  // namespace oracle
