#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "sarnarrator/config.hpp"
#include "sarnarrator/corpus.hpp"
#include "sarnarrator/demo.hpp"
#include "sarnarrator/errors.hpp"
#include "sarnarrator/pipeline.hpp"
#include "sarnarrator/util.hpp"

using namespace sarnarrator;

namespace {

PipelineConfig demo_config(const fixtures::TempDir& dir,
                           const std::string& out_name) {
  const demo::DemoDataset dataset = demo::write_demo_dataset(dir.path() + "/data");
  PipelineConfig config = load_pipeline_config(dataset.config_path);
  config.output_dir = dir.path() + "/" + out_name;
  return config;
}

size_t count_lines(const std::string& path) {
  size_t n = 0;
  for (const std::string& line : read_lines(path)) {
    if (!trim(line).empty()) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("run_all produces the documented corpus on the demo dataset") {
  fixtures::TempDir dir;
  const PipelineConfig config = demo_config(dir, "out");
  const CorpusManifest manifest = pipeline::run_all(config);

  CHECK(manifest.header.total == 18);
  CHECK(manifest.header.per_method.at("a2c_spatial") == 6);
  CHECK(manifest.header.per_method.at("sa2c_fused") == 6);
  CHECK(manifest.header.per_method.at("paired_rewritten") == 6);
  CHECK(manifest.header.per_source.at("mini-det") == 6);
  CHECK(manifest.header.per_source.at("mini-seg") == 6);
  CHECK(manifest.header.per_source.at("mini-pair") == 6);
  CHECK(manifest.header.created == "1970-01-01T00:00:00Z");
  CHECK(manifest.header.pipeline_version == "1.0.0");
  CHECK(manifest.header.config_sha256 == config_fingerprint(config));

  const pipeline::ArtifactPaths paths(config.output_dir);
  for (const std::string& artifact :
       {paths.samples, paths.validation, paths.captions_raw, paths.captions,
        paths.captions_dedup, paths.dedup_ledger, paths.manifest_records,
        paths.manifest_header, paths.stats, paths.train_records,
        paths.train_header, paths.test_records, paths.test_header}) {
    CHECK(std::filesystem::exists(artifact));
  }

  CHECK(count_lines(paths.samples) == 20);
  CHECK(count_lines(paths.captions_raw) == 20);
  CHECK(count_lines(paths.captions) == 20);
  CHECK(count_lines(paths.captions_dedup) == 18);
  CHECK(count_lines(paths.dedup_ledger) == 2);
  CHECK(count_lines(paths.manifest_records) == 18);
}

TEST_CASE("demo dedup drops exactly the two copied detection images") {
  fixtures::TempDir dir;
  const PipelineConfig config = demo_config(dir, "out");
  pipeline::run_all(config);

  const pipeline::ArtifactPaths paths(config.output_dir);
  std::set<std::string> dropped;
  for (const std::string& line : read_lines(paths.dedup_ledger)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    dropped.insert(j.at("dropped_id").get<std::string>());
    CHECK(j.at("distance") == 0);
    CHECK(j.at("rule") == "global");
  }
  CHECK(dropped == std::set<std::string>{"det_07", "det_08"});
}

TEST_CASE("validation report covers every ingested sample") {
  fixtures::TempDir dir;
  const PipelineConfig config = demo_config(dir, "out");
  pipeline::run_ingest(config);

  const pipeline::ArtifactPaths paths(config.output_dir);
  size_t keep = 0;
  for (const std::string& line : read_lines(paths.validation)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("type") == "sample");
    CHECK(j.at("keep") == true);
    ++keep;
  }
  CHECK(keep == 20);
}

TEST_CASE("stage-by-stage execution composes into the run_all result") {
  fixtures::TempDir dir;
  const PipelineConfig all_config = demo_config(dir, "out_all");
  const CorpusManifest from_all = pipeline::run_all(all_config);

  PipelineConfig staged = all_config;
  staged.output_dir = dir.path() + "/out_staged";
  pipeline::run_ingest(staged);
  pipeline::run_caption(staged);
  pipeline::run_rewrite(staged);
  pipeline::run_dedup(staged);
  const CorpusManifest from_stages = pipeline::run_assemble(staged);
  pipeline::run_stats(staged);
  const SplitResult split_result = pipeline::run_split(staged);

  CHECK(from_stages.records == from_all.records);
  CHECK(from_stages.header.per_method == from_all.header.per_method);
  CHECK(split_result.train.records.size() +
            split_result.test.records.size() ==
        from_all.records.size());

  const pipeline::ArtifactPaths a(all_config.output_dir);
  const pipeline::ArtifactPaths b(staged.output_dir);
  CHECK(read_file(a.manifest_records) == read_file(b.manifest_records));
  CHECK(read_file(a.manifest_header) == read_file(b.manifest_header));
  CHECK(read_file(a.stats) == read_file(b.stats));
}

TEST_CASE("replay reruns are byte-identical") {
  fixtures::TempDir dir;
  const PipelineConfig first = demo_config(dir, "out_a");
  pipeline::run_all(first);
  PipelineConfig second = first;
  second.output_dir = dir.path() + "/out_b";
  pipeline::run_all(second);

  const pipeline::ArtifactPaths a(first.output_dir);
  const pipeline::ArtifactPaths b(second.output_dir);
  for (const auto& [left, right] :
       {std::pair{a.manifest_records, b.manifest_records},
        std::pair{a.manifest_header, b.manifest_header},
        std::pair{a.stats, b.stats},
        std::pair{a.train_records, b.train_records},
        std::pair{a.test_records, b.test_records},
        std::pair{a.dedup_ledger, b.dedup_ledger},
        std::pair{a.captions, b.captions}}) {
    CHECK(read_file(left) == read_file(right));
  }
}

TEST_CASE("rewrite stage fills captions and provenance per method") {
  fixtures::TempDir dir;
  const PipelineConfig config = demo_config(dir, "out");
  pipeline::run_all(config);

  const pipeline::ArtifactPaths paths(config.output_dir);
  const std::vector<CaptionRecord> records =
      read_records(paths.manifest_records);
  size_t checked = 0;
  for (const CaptionRecord& record : records) {
    CHECK_FALSE(record.fallback_used);
    if (record.method == CaptionMethod::sa2c_fused) {
      // raw_caption keeps the pre-fusion proportion caption.
      CHECK(record.raw_caption.find("This image contains") == 0);
      CHECK(record.caption != record.raw_caption);
      ++checked;
    } else if (record.method == CaptionMethod::paired_rewritten) {
      CHECK_FALSE(record.raw_caption.empty());
      CHECK(record.caption != record.raw_caption);
      ++checked;
    } else {
      CHECK(record.method == CaptionMethod::a2c_spatial);
      CHECK(record.raw_caption.empty());
      ++checked;
    }
  }
  CHECK(checked == 18);

  // The first paired record carries the showcase rewrite.
  for (const CaptionRecord& record : records) {
    if (record.id == "pair_01") {
      CHECK(record.caption ==
            "A landscape divided by a diagonal line, with a large farm on "
            "the left and a densely vegetated area on the right.");
      CHECK(record.raw_caption.find("black and white aerial photograph") !=
            std::string::npos);
    }
  }
}

TEST_CASE("a missing cassette falls back to the rule rewriter") {
  fixtures::TempDir dir;
  PipelineConfig config = demo_config(dir, "out");
  config.rewrite.cassette = dir.path() + "/data/empty_cassette.jsonl";
  const CorpusManifest manifest = pipeline::run_all(config);
  CHECK(manifest.header.total == 18);
  size_t fallbacks = 0;
  for (const CaptionRecord& record : manifest.records) {
    if (record.method == CaptionMethod::a2c_spatial) {
      CHECK_FALSE(record.fallback_used);
    } else {
      CHECK(record.fallback_used);
      CHECK_FALSE(record.caption.empty());
      ++fallbacks;
    }
  }
  CHECK(fallbacks == 12);
}

TEST_CASE("stages demand their upstream artifacts") {
  fixtures::TempDir dir;
  PipelineConfig config = demo_config(dir, "out");
  CHECK_THROWS_AS(pipeline::run_caption(config), Error);
  CHECK_THROWS_AS(pipeline::run_dedup(config), Error);
  CHECK_THROWS_AS(pipeline::run_stats(config), Error);
}

TEST_CASE("an unreadable source aborts that source but not the run") {
  fixtures::TempDir dir;
  PipelineConfig config = demo_config(dir, "out");
  // Point the detection source at a nonexistent document.
  for (SourceConfig& source : config.sources) {
    if (source.name == "mini-det") {
      source.paths = {dir.path() + "/data/missing.json"};
    }
  }
  const std::vector<AnnotatedSample> samples = pipeline::run_ingest(config);
  CHECK(samples.size() == 12);  // 6 seg + 6 paired
  const pipeline::ArtifactPaths paths(config.output_dir);
  bool saw_source_error = false;
  for (const std::string& line : read_lines(paths.validation)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") == "source_error") {
      CHECK(j.at("source") == "mini-det");
      saw_source_error = true;
    }
  }
  CHECK(saw_source_error);
}

TEST_CASE("live mode stamps a current timestamp") {
  const std::string replay_stamp =
      pipeline::manifest_created_stamp(RewriteMode::replay);
  CHECK(replay_stamp == "1970-01-01T00:00:00Z");
  const std::string live_stamp =
      pipeline::manifest_created_stamp(RewriteMode::live);
  CHECK(live_stamp != replay_stamp);
  CHECK(live_stamp.size() == 20);
  CHECK(live_stamp.substr(0, 2) == "20");
  CHECK(live_stamp.back() == 'Z');
  CHECK(live_stamp[10] == 'T');
}
