#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "sarnarrator/dedup.hpp"
#include "sarnarrator/errors.hpp"
#include "sarnarrator/image.hpp"

using namespace sarnarrator;

namespace {

HashedSample hs(std::string id, std::string source, uint64_t bits) {
  return {std::move(id), std::move(source), PHash{bits}};
}

void check_against_oracle(const std::vector<HashedSample>& samples,
                          const DedupPolicy& policy) {
  const oracle::DedupOutcome expected = oracle::dedup_quadratic(samples, policy);
  const DedupResult actual = dedup_hashes(samples, policy);
  REQUIRE(actual.kept_indices == expected.kept);
  REQUIRE(actual.dropped.size() == expected.dropped.size());
  for (size_t i = 0; i < actual.dropped.size(); ++i) {
    CHECK(actual.dropped[i].dropped_id == expected.dropped[i].dropped_id);
    CHECK(actual.dropped[i].kept_id == expected.dropped[i].kept_id);
    CHECK(actual.dropped[i].distance == expected.dropped[i].distance);
    CHECK(actual.dropped[i].rule == expected.dropped[i].rule);
  }
}

}  // namespace

TEST_CASE("phash rejects images smaller than 8x8") {
  for (const auto& [w, h] :
       {std::pair{7, 8}, std::pair{8, 7}, std::pair{1, 1}}) {
    try {
      phash64(fixtures::gradient_image(w, h, 1));
      FAIL("expected a throw");
    } catch (const Error& e) {
      CHECK(e.code() == errc::too_small);
    }
  }
  CHECK_NOTHROW(phash64(fixtures::gradient_image(8, 8, 1)));
}

TEST_CASE("phash of a constant image is zero") {
  ImageU8 flat;
  flat.width = 40;
  flat.height = 40;
  flat.channels = 3;
  flat.pixels.assign(40 * 40 * 3, 137);
  CHECK(phash64(flat).bits == 0);
}

TEST_CASE("phash is deterministic and separates distinct fixtures") {
  const ImageU8 a = fixtures::gradient_image(64, 64, 3);
  const ImageU8 b = fixtures::noise_image(64, 64, 3);
  CHECK(phash64(a) == phash64(a));
  CHECK(phash64(a) != phash64(b));
}

TEST_CASE("phash survives a small uniform brightness shift") {
  // Cap the channels below 250 so the +5 shift cannot clamp anywhere; a
  // genuinely uniform shift only moves the DC coefficient, which the hash
  // drops.
  ImageU8 base = fixtures::gradient_image(64, 64, 7);
  for (auto& px : base.pixels) px = std::min<int>(px, 245);
  const ImageU8 brighter = fixtures::shift_brightness(base, 5);
  CHECK(hamming(phash64(base), phash64(brighter)) <= 2);
}

TEST_CASE("phash keeps the DC bit clear") {
  for (int key = 0; key < 8; ++key) {
    const PHash hash = phash64(fixtures::gradient_image(48, 32, key));
    CHECK((hash.bits & 1ull) == 0);
  }
}

TEST_CASE("hamming distance matches a bit loop") {
  CHECK(hamming(PHash{0}, PHash{0}) == 0);
  CHECK(hamming(PHash{0}, PHash{~0ull}) == 64);
  CHECK(hamming(PHash{0b1011}, PHash{0b0010}) == 2);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const uint64_t a = rng();
    const uint64_t b = rng();
    CHECK(hamming(PHash{a}, PHash{b}) == oracle::hamming_bits(a, b));
  }
}

TEST_CASE("policy selects the per-source threshold only for same-source pairs") {
  DedupPolicy policy;
  policy.global_max_distance = 1;
  policy.per_source_max_distance["alpha"] = 6;
  CHECK(policy.max_distance_for("alpha", "alpha") == 6);
  CHECK(policy.max_distance_for("alpha", "beta") == 1);
  CHECK(policy.max_distance_for("beta", "beta") == 1);
  CHECK(policy.max_distance_for("beta", "alpha") == 1);
}

TEST_CASE("exact duplicates drop against the earliest kept sample") {
  const std::vector<HashedSample> samples = {
      hs("a", "s", 100), hs("b", "s", 200), hs("c", "s", 100),
      hs("d", "s", 100), hs("e", "s", 300),
  };
  DedupPolicy policy;
  const DedupResult result = dedup_hashes(samples, policy);
  CHECK(result.kept_indices == std::vector<size_t>{0, 1, 4});
  REQUIRE(result.dropped.size() == 2);
  CHECK(result.dropped[0].dropped_id == "c");
  CHECK(result.dropped[0].kept_id == "a");
  CHECK(result.dropped[0].distance == 0);
  CHECK(result.dropped[0].rule == "global");
  CHECK(result.dropped[1].dropped_id == "d");
  CHECK(result.dropped[1].kept_id == "a");
}

TEST_CASE("per-source rule widens matching within one source only") {
  // 0b111 is 3 bits away from 0; only the alpha rule reaches that far.
  const std::vector<HashedSample> samples = {
      hs("a1", "alpha", 0),
      hs("b1", "beta", 0b111),
      hs("a2", "alpha", 0b111),
  };
  DedupPolicy policy;
  policy.global_max_distance = 0;
  policy.per_source_max_distance["alpha"] = 3;
  const DedupResult result = dedup_hashes(samples, policy);
  CHECK(result.kept_indices == std::vector<size_t>{0, 1});
  REQUIRE(result.dropped.size() == 1);
  CHECK(result.dropped[0].dropped_id == "a2");
  CHECK(result.dropped[0].kept_id == "a1");
  CHECK(result.dropped[0].distance == 3);
  CHECK(result.dropped[0].rule == "source:alpha");
}

TEST_CASE("thresholds outside [0, 64] are rejected") {
  const std::vector<HashedSample> samples = {hs("a", "s", 0)};
  DedupPolicy negative;
  negative.global_max_distance = -1;
  CHECK_THROWS_AS(dedup_hashes(samples, negative), Error);
  DedupPolicy huge;
  huge.global_max_distance = 65;
  CHECK_THROWS_AS(dedup_hashes(samples, huge), Error);
  DedupPolicy bad_source;
  bad_source.per_source_max_distance["s"] = 65;
  CHECK_THROWS_AS(dedup_hashes(samples, bad_source), Error);
  DedupPolicy edge;
  edge.global_max_distance = 64;
  CHECK_NOTHROW(dedup_hashes(samples, edge));
}

TEST_CASE("randomized dedup agrees with the quadratic oracle") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<HashedSample> samples;
    const size_t n = 40 + static_cast<size_t>(rng() % 200);
    for (size_t i = 0; i < n; ++i) {
      uint64_t bits;
      if (!samples.empty() && rng() % 3 == 0) {
        // Plant a near-duplicate of an earlier sample.
        bits = samples[rng() % samples.size()].hash.bits;
        const int flips = static_cast<int>(rng() % 4);
        for (int f = 0; f < flips; ++f) bits ^= 1ull << (rng() % 64);
      } else {
        bits = rng();
      }
      const std::string source = (rng() % 2 == 0) ? "alpha" : "beta";
      samples.push_back(hs("id" + std::to_string(i), source, bits));
    }
    DedupPolicy policy;
    policy.global_max_distance = static_cast<int>(rng() % 3);
    if (trial % 2 == 0) policy.per_source_max_distance["alpha"] = 4;
    check_against_oracle(samples, policy);
  }
}

TEST_CASE("banded candidate search matches planted ground truth at scale") {
  // 1000 heads pairwise >= 7 bits apart, each with 9 variants <= 3 flips away.
  // With threshold 3 every variant collapses onto its head and nothing else.
  std::mt19937_64 rng(777);
  std::vector<uint64_t> heads;
  while (heads.size() < 1000) {
    const uint64_t candidate = rng();
    bool far_enough = true;
    for (const uint64_t head : heads) {
      if (oracle::hamming_bits(candidate, head) < 7) {
        far_enough = false;
        break;
      }
    }
    if (far_enough) heads.push_back(candidate);
  }
  std::vector<HashedSample> samples;
  std::vector<std::string> expected_kept_of;  // per sample: own id or head id
  for (size_t h = 0; h < heads.size(); ++h) {
    const std::string head_id = "h" + std::to_string(h);
    samples.push_back(hs(head_id, "s", heads[h]));
    expected_kept_of.push_back(head_id);
    for (int v = 0; v < 9; ++v) {
      uint64_t bits = heads[h];
      const int flips = static_cast<int>(rng() % 4);
      for (int f = 0; f < flips; ++f) bits ^= 1ull << (rng() % 64);
      samples.push_back(
          hs(head_id + "v" + std::to_string(v), "s", bits));
      expected_kept_of.push_back(head_id);
    }
  }
  REQUIRE(samples.size() == 10000);

  DedupPolicy policy;
  policy.global_max_distance = 3;
  const DedupResult result = dedup_hashes(samples, policy);
  CHECK(result.kept_indices.size() == 1000);
  for (const size_t index : result.kept_indices) {
    CHECK(samples[index].id == expected_kept_of[index]);
  }
  REQUIRE(result.dropped.size() == 9000);
  for (const DropRecord& drop : result.dropped) {
    const std::string head_id = drop.dropped_id.substr(0, drop.dropped_id.find('v'));
    CHECK(drop.kept_id == head_id);
    CHECK(drop.distance <= 3);
    CHECK(drop.rule == "global");
  }
}

TEST_CASE("banded and small-scale paths agree on a shared prefix") {
  // The same planted-cluster generator at n=500 goes through the linear
  // path; its outcome must match the quadratic oracle exactly.
  std::mt19937_64 rng(778);
  std::vector<HashedSample> samples;
  for (size_t h = 0; h < 50; ++h) {
    const uint64_t head = rng();
    samples.push_back(hs("h" + std::to_string(h), "s", head));
    for (int v = 0; v < 9; ++v) {
      uint64_t bits = head;
      const int flips = static_cast<int>(rng() % 4);
      for (int f = 0; f < flips; ++f) bits ^= 1ull << (rng() % 64);
      samples.push_back(
          hs("h" + std::to_string(h) + "v" + std::to_string(v), "s", bits));
    }
  }
  DedupPolicy policy;
  policy.global_max_distance = 3;
  check_against_oracle(samples, policy);
}

TEST_CASE("drop records round trip through json lines") {
  DropRecord record;
  record.dropped_id = "img_042";
  record.kept_id = "img_007";
  record.distance = 2;
  record.rule = "source:mini";
  const std::string line = drop_record_to_json_line(record);
  CHECK(line.find('\n') == std::string::npos);
  const DropRecord back = drop_record_from_json_line(line);
  CHECK(back.dropped_id == record.dropped_id);
  CHECK(back.kept_id == record.kept_id);
  CHECK(back.distance == record.distance);
  CHECK(back.rule == record.rule);
  CHECK_THROWS_AS(drop_record_from_json_line("{not json"), Error);
}

TEST_CASE("dedup_corpus hashes from disk and annotates failures") {
  fixtures::TempDir dir;
  const ImageU8 a = fixtures::gradient_image(32, 32, 1);
  const ImageU8 b = fixtures::gradient_image(32, 32, 2);
  save_png(dir.file("a.png"), a);
  save_png(dir.file("b.png"), b);
  save_png(dir.file("a_copy.png"), a);

  AnnotatedSample s1;
  s1.id = "one";
  s1.image_path = dir.file("a.png");
  s1.source_dataset = "s";
  AnnotatedSample s2 = s1;
  s2.id = "two";
  s2.image_path = dir.file("b.png");
  AnnotatedSample s3 = s1;
  s3.id = "three";
  s3.image_path = dir.file("a_copy.png");

  DedupPolicy policy;
  const CorpusDedupResult result = dedup_corpus({s1, s2, s3}, policy);
  REQUIRE(result.kept.size() == 2);
  CHECK(result.kept[0].id == "one");
  CHECK(result.kept[1].id == "two");
  REQUIRE(result.dropped.size() == 1);
  CHECK(result.dropped[0].dropped_id == "three");
  CHECK(result.dropped[0].kept_id == "one");
  CHECK(result.dropped[0].distance == 0);

  AnnotatedSample missing = s1;
  missing.id = "ghost";
  missing.image_path = dir.file("ghost.png");
  try {
    dedup_corpus({s1, missing}, policy);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
}
