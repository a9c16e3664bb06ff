#include "sarnarrator/dedup.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sarnarrator/errors.hpp"
#include "sarnarrator/kernels.hpp"

namespace sarnarrator {

namespace {

constexpr int kGridN = 32;
constexpr int kBlockN = 8;
constexpr size_t kBandedMinSamples = 10000;
constexpr int kBandedMaxDistance = 3;  // 4 x 16-bit bands are only complete
                                       // for distances below the band count

void check_distance(int d, const std::string& what) {
  if (d < 0 || d > 64) {
    raise(errc::invalid_argument, what + " must be in [0,64], got " +
                                      std::to_string(d));
  }
}

std::string rule_name(const DedupPolicy& policy, const std::string& source_a,
                      const std::string& source_b) {
  if (source_a == source_b &&
      policy.per_source_max_distance.count(source_a) > 0) {
    return "source:" + source_a;
  }
  return "global";
}

}  // namespace

PHash phash64(const ImageU8& image) {
  if (image.width < kBlockN || image.height < kBlockN) {
    raise(errc::too_small, "image " + std::to_string(image.width) + "x" +
                               std::to_string(image.height) +
                               " is below the 8x8 hashing minimum");
  }
  const ImageU8 gray = to_gray(image);
  const int64_t w = gray.width;
  const int64_t h = gray.height;

  // Area-average resize to 32x32. Cell edges are integer subdivisions; when a
  // cell would be empty (image smaller than 32 on a side) it borrows the
  // single pixel at its origin.
  std::array<double, kGridN * kGridN> grid{};
  for (int cy = 0; cy < kGridN; ++cy) {
    int64_t y0 = (cy * h) / kGridN;
    int64_t y1 = ((cy + 1) * h) / kGridN;
    if (y1 == y0) y1 = y0 + 1;
    for (int cx = 0; cx < kGridN; ++cx) {
      int64_t x0 = (cx * w) / kGridN;
      int64_t x1 = ((cx + 1) * w) / kGridN;
      if (x1 == x0) x1 = x0 + 1;
      int64_t sum = 0;
      for (int64_t y = y0; y < y1; ++y) {
        const uint8_t* row = gray.pixels.data() + y * w;
        for (int64_t x = x0; x < x1; ++x) sum += row[x];
      }
      grid[cy * kGridN + cx] =
          static_cast<double>(sum) / static_cast<double>((y1 - y0) * (x1 - x0));
    }
  }

  // Centering only shifts the DC coefficient, which is dropped anyway, but it
  // makes constant images transform to an exact zero matrix instead of one
  // polluted by rounding noise.
  double grand = 0.0;
  for (double v : grid) grand += v;
  grand /= static_cast<double>(grid.size());
  for (double& v : grid) v -= grand;

  std::array<double, kGridN * kGridN> freq{};
  kernels::dct32_2d(grid.data(), freq.data());

  std::array<double, kBlockN * kBlockN> block{};
  for (int u = 0; u < kBlockN; ++u) {
    for (int v = 0; v < kBlockN; ++v) {
      block[u * kBlockN + v] = freq[u * kGridN + v];
    }
  }

  std::array<double, kBlockN * kBlockN - 1> ac{};
  std::copy(block.begin() + 1, block.end(), ac.begin());
  std::sort(ac.begin(), ac.end());
  const double median = ac[ac.size() / 2];

  PHash hash;
  for (size_t i = 1; i < block.size(); ++i) {
    if (block[i] > median) hash.bits |= uint64_t{1} << i;
  }
  return hash;
}

int hamming(PHash a, PHash b) { return kernels::hamming64(a.bits, b.bits); }

int DedupPolicy::max_distance_for(const std::string& source_a,
                                  const std::string& source_b) const {
  if (source_a == source_b) {
    auto it = per_source_max_distance.find(source_a);
    if (it != per_source_max_distance.end()) return it->second;
  }
  return global_max_distance;
}

DedupResult dedup_hashes(const std::vector<HashedSample>& samples,
                         const DedupPolicy& policy) {
  check_distance(policy.global_max_distance, "global_max_distance");
  int max_threshold = policy.global_max_distance;
  for (const auto& [source, d] : policy.per_source_max_distance) {
    check_distance(d, "per_source_max_distance[" + source + "]");
    max_threshold = std::max(max_threshold, d);
  }

  DedupResult result;
  std::vector<uint64_t> kept_bits;
  std::vector<uint16_t> distances;

  const bool banded =
      samples.size() >= kBandedMinSamples && max_threshold <= kBandedMaxDistance;
  // band value -> positions in the kept list carrying that value
  std::array<std::unordered_map<uint16_t, std::vector<size_t>>, 4> bands;
  std::vector<size_t> candidates;

  for (size_t i = 0; i < samples.size(); ++i) {
    const HashedSample& cur = samples[i];
    size_t match_pos = kept_bits.size();
    int match_distance = 0;

    if (banded) {
      candidates.clear();
      for (int b = 0; b < 4; ++b) {
        const auto band_value =
            static_cast<uint16_t>(cur.hash.bits >> (16 * b));
        auto it = bands[b].find(band_value);
        if (it != bands[b].end()) {
          candidates.insert(candidates.end(), it->second.begin(),
                            it->second.end());
        }
      }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()),
                       candidates.end());
      for (size_t pos : candidates) {
        const HashedSample& kept = samples[result.kept_indices[pos]];
        const int d = kernels::hamming64(cur.hash.bits, kept_bits[pos]);
        if (d <= policy.max_distance_for(cur.source_dataset,
                                         kept.source_dataset)) {
          match_pos = pos;
          match_distance = d;
          break;
        }
      }
    } else {
      distances.resize(kept_bits.size());
      kernels::hamming_batch(cur.hash.bits, kept_bits.data(), kept_bits.size(),
                             distances.data());
      for (size_t pos = 0; pos < kept_bits.size(); ++pos) {
        const HashedSample& kept = samples[result.kept_indices[pos]];
        if (distances[pos] <= policy.max_distance_for(cur.source_dataset,
                                                      kept.source_dataset)) {
          match_pos = pos;
          match_distance = distances[pos];
          break;
        }
      }
    }

    if (match_pos < kept_bits.size()) {
      const HashedSample& kept = samples[result.kept_indices[match_pos]];
      result.dropped.push_back(
          {cur.id, kept.id, match_distance,
           rule_name(policy, cur.source_dataset, kept.source_dataset)});
      continue;
    }

    const size_t pos = kept_bits.size();
    result.kept_indices.push_back(i);
    kept_bits.push_back(cur.hash.bits);
    if (banded) {
      for (int b = 0; b < 4; ++b) {
        bands[b][static_cast<uint16_t>(cur.hash.bits >> (16 * b))].push_back(
            pos);
      }
    }
  }
  return result;
}

CorpusDedupResult dedup_corpus(const std::vector<AnnotatedSample>& samples,
                               const DedupPolicy& policy) {
  std::vector<HashedSample> hashed;
  hashed.reserve(samples.size());
  for (const AnnotatedSample& sample : samples) {
    try {
      hashed.push_back({sample.id, sample.source_dataset,
                        phash64(load_png(sample.image_path))});
    } catch (const Error& e) {
      raise(e.code(), "sample " + sample.id + ": " + e.what());
    }
  }

  const DedupResult scan = dedup_hashes(hashed, policy);
  CorpusDedupResult result;
  result.kept.reserve(scan.kept_indices.size());
  for (size_t idx : scan.kept_indices) result.kept.push_back(samples[idx]);
  result.dropped = scan.dropped;
  return result;
}

std::string drop_record_to_json_line(const DropRecord& record) {
  nlohmann::ordered_json j;
  j["dropped_id"] = record.dropped_id;
  j["kept_id"] = record.kept_id;
  j["distance"] = record.distance;
  j["rule"] = record.rule;
  return j.dump();
}

DropRecord drop_record_from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    raise(errc::malformed_document,
          std::string("bad dedup ledger line: ") + e.what());
  }
  DropRecord record;
  try {
    record.dropped_id = j.at("dropped_id").get<std::string>();
    record.kept_id = j.at("kept_id").get<std::string>();
    record.distance = j.at("distance").get<int>();
    record.rule = j.at("rule").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    raise(errc::malformed_document,
          std::string("bad dedup ledger line: ") + e.what());
  }
  return record;
}

}  // namespace sarnarrator
