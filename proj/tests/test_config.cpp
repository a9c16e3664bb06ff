#include <cstdlib>
#include <optional>
#include <string>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "sarnarrator/config.hpp"
#include "sarnarrator/errors.hpp"
#include "sarnarrator/util.hpp"

using namespace sarnarrator;

namespace {

std::string minimal_config() {
  return R"({
    "output_dir": "out",
    "seed": 5,
    "sources": [
      {
        "name": "det",
        "task": "detection",
        "adapter": "coco",
        "paths": ["det.json"],
        "image_root": "images"
      }
    ]
  })";
}

std::string full_config() {
  return R"({
    "output_dir": "artifacts",
    "seed": 11,
    "sources": [
      {
        "name": "det",
        "task": "detection",
        "adapter": "coco",
        "paths": ["det.json"],
        "image_root": "images"
      },
      {
        "name": "seg",
        "task": "segmentation",
        "adapter": "mask",
        "paths": ["masks"],
        "image_root": "seg_images",
        "mapping": "mapping.json",
        "optical_captions": "optical.tsv"
      },
      {
        "name": "pair",
        "task": "paired",
        "adapter": "paired_tsv",
        "paths": ["pairs.tsv"],
        "image_root": "pair_images"
      }
    ],
    "dedup": {
      "global_max_distance": 2,
      "per_source_max_distance": {"seg": 5}
    },
    "caption": {
      "threshold_percent": 1.5,
      "spatial_enabled": false,
      "mask_color_tolerance": 3
    },
    "rewrite": {
      "mode": "replay",
      "base_url": "https://api.example.test/v1",
      "model": "deepseek-chat",
      "n_examples": 4,
      "max_concurrency": 2,
      "retries": 5,
      "backoff_initial_ms": 10,
      "fallback_enabled": true,
      "temperature": 0.0,
      "requests_per_second": 3.5,
      "cassette": "cassette.jsonl",
      "icl_store": "icl.jsonl"
    },
    "split": {
      "train": 0.75,
      "test": 0.25,
      "seed": 9
    }
  })";
}

// setenv/unsetenv helper that restores on scope exit.
class EnvVar {
 public:
  EnvVar(const char* name, const char* value) : name_(name) {
    const char* old = std::getenv(name);
    if (old != nullptr) saved_ = old;
    had_ = old != nullptr;
    if (value != nullptr) {
      ::setenv(name, value, 1);
    } else {
      ::unsetenv(name);
    }
  }
  ~EnvVar() {
    if (had_) {
      ::setenv(name_.c_str(), saved_.c_str(), 1);
    } else {
      ::unsetenv(name_.c_str());
    }
  }

 private:
  std::string name_;
  std::string saved_;
  bool had_ = false;
};

}  // namespace

TEST_CASE("full config parses with resolved relative paths") {
  const PipelineConfig config =
      parse_pipeline_config(full_config(), "test", "/cfgdir");
  CHECK(config.output_dir == "artifacts");
  CHECK(config.seed == 11);
  REQUIRE(config.sources.size() == 3);
  CHECK(config.sources[0].name == "det");
  CHECK(config.sources[0].adapter == "coco");
  CHECK(config.sources[0].paths == std::vector<std::string>{"/cfgdir/det.json"});
  CHECK(config.sources[0].image_root == "/cfgdir/images");
  CHECK(config.sources[1].task == TaskType::segmentation);
  CHECK(config.sources[1].mapping_path == "/cfgdir/mapping.json");
  CHECK(config.sources[1].optical_captions == "/cfgdir/optical.tsv");
  CHECK(config.sources[2].task == TaskType::paired);
  CHECK(config.dedup.global_max_distance == 2);
  CHECK(config.dedup.per_source_max_distance.at("seg") == 5);
  CHECK(config.caption.threshold_percent == doctest::Approx(1.5));
  CHECK_FALSE(config.caption.spatial_enabled);
  CHECK(config.caption.mask_color_tolerance == 3);
  CHECK(config.rewrite.mode == RewriteMode::replay);
  CHECK(config.rewrite.n_examples == 4);
  CHECK(config.rewrite.cassette == "/cfgdir/cassette.jsonl");
  CHECK(config.rewrite.icl_store == "/cfgdir/icl.jsonl");
  CHECK(config.rewrite.requests_per_second == doctest::Approx(3.5));
  CHECK(config.split.train == doctest::Approx(0.75));
  CHECK(config.split.seed == 9);
}

TEST_CASE("absolute paths pass through untouched") {
  std::string text = full_config();
  const std::string from = "\"cassette.jsonl\"";
  text.replace(text.find(from), from.size(), "\"/abs/cassette.jsonl\"");
  const PipelineConfig config = parse_pipeline_config(text, "test", "/cfgdir");
  CHECK(config.rewrite.cassette == "/abs/cassette.jsonl");
}

TEST_CASE("defaults fill every omitted stage") {
  const PipelineConfig config =
      parse_pipeline_config(minimal_config(), "test", "/d");
  CHECK(config.dedup.global_max_distance == 0);
  CHECK(config.dedup.per_source_max_distance.empty());
  CHECK(config.caption.threshold_percent == doctest::Approx(1.0));
  CHECK(config.caption.spatial_enabled);
  CHECK(config.caption.mask_color_tolerance == 0);
  CHECK(config.rewrite.mode == RewriteMode::replay);
  CHECK(config.rewrite.model == "deepseek-chat");
  CHECK(config.rewrite.n_examples == 3);
  CHECK(config.rewrite.retries == 3);
  CHECK(config.split.train == doctest::Approx(0.8));
  CHECK(config.split.test == doctest::Approx(0.2));
  CHECK(config.split.seed == 0);
}

TEST_CASE("unknown keys are rejected at every level") {
  const auto expect_config_error = [](std::string text, const std::string& from,
                                      const std::string& to) {
    const size_t at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    try {
      parse_pipeline_config(text, "test", "/d");
      FAIL("expected a throw for " << to);
    } catch (const Error& e) {
      CHECK(e.code() == errc::config_error);
      CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
    }
  };
  expect_config_error(full_config(), "\"output_dir\"", "\"output_dirx\"");
  expect_config_error(full_config(), "\"adapter\"", "\"adaptor\"");
  expect_config_error(full_config(), "\"global_max_distance\"",
                      "\"global_distance\"");
  expect_config_error(full_config(), "\"threshold_percent\"", "\"threshold\"");
  expect_config_error(full_config(), "\"n_examples\"", "\"examples\"");
  expect_config_error(full_config(), "\"train\"", "\"train_ratio\"");
}

TEST_CASE("structural validation catches bad sources") {
  const auto expect_error = [](const std::string& text) {
    CHECK_THROWS_AS(parse_pipeline_config(text, "test", "/d"), Error);
  };
  // No sources at all.
  expect_error(R"({"sources": []})");
  // Duplicate source name.
  expect_error(R"({"sources": [
    {"name": "x", "task": "detection", "adapter": "coco",
     "paths": ["a.json"], "image_root": "i"},
    {"name": "x", "task": "detection", "adapter": "coco",
     "paths": ["b.json"], "image_root": "i"}
  ]})");
  // Unknown adapter.
  expect_error(R"({"sources": [
    {"name": "x", "task": "detection", "adapter": "yolo",
     "paths": ["a.json"], "image_root": "i"}
  ]})");
  // Unknown task.
  expect_error(R"({"sources": [
    {"name": "x", "task": "classification", "adapter": "coco",
     "paths": ["a.json"], "image_root": "i"}
  ]})");
  // Segmentation without a mapping.
  expect_error(R"({"sources": [
    {"name": "x", "task": "segmentation", "adapter": "mask",
     "paths": ["masks"], "image_root": "i"}
  ]})");
  // Empty paths.
  expect_error(R"({"sources": [
    {"name": "x", "task": "detection", "adapter": "coco",
     "paths": [], "image_root": "i"}
  ]})");
  // Malformed JSON.
  expect_error("{nope");
  // Wrong types.
  expect_error(R"({"seed": "eleven", "sources": [
    {"name": "x", "task": "detection", "adapter": "coco",
     "paths": ["a.json"], "image_root": "i"}
  ]})");
}

TEST_CASE("rewrite stage bounds are validated") {
  const auto patched = [](const std::string& key, const std::string& value) {
    auto j = nlohmann::json::parse(minimal_config());
    j["rewrite"] = {{key, nlohmann::json::parse(value)}};
    return j.dump();
  };
  CHECK_THROWS_AS(
      parse_pipeline_config(patched("n_examples", "-1"), "t", "/d"), Error);
  CHECK_THROWS_AS(
      parse_pipeline_config(patched("max_concurrency", "0"), "t", "/d"), Error);
  CHECK_THROWS_AS(
      parse_pipeline_config(patched("retries", "0"), "t", "/d"), Error);
  CHECK_THROWS_AS(
      parse_pipeline_config(patched("mode", "\"offline\""), "t", "/d"), Error);
  CHECK_NOTHROW(
      parse_pipeline_config(patched("mode", "\"live\""), "t", "/d"));
}

TEST_CASE("load_pipeline_config resolves against the file directory") {
  fixtures::TempDir dir;
  const std::string config_path = dir.file("nested/config.json");
  write_file(config_path, minimal_config());
  const PipelineConfig config = load_pipeline_config(config_path);
  CHECK(config.sources[0].paths[0] == dir.file("nested/det.json"));
  CHECK(config.sources[0].image_root == dir.file("nested/images"));
  // output_dir stays as written; it resolves against the working directory.
  CHECK(config.output_dir == "out");
  CHECK_THROWS_AS(load_pipeline_config(dir.file("missing.json")), Error);
}

TEST_CASE("override precedence is flag over env over file") {
  EnvVar mode_env("SAR_NARRATOR_MODE", nullptr);
  EnvVar seed_env("SAR_NARRATOR_SEED", nullptr);
  EnvVar out_env("SAR_NARRATOR_OUT", nullptr);

  PipelineConfig config = parse_pipeline_config(minimal_config(), "t", "/d");
  apply_overrides(config, std::nullopt, std::nullopt, std::nullopt);
  CHECK(config.rewrite.mode == RewriteMode::replay);
  CHECK(config.seed == 5);
  CHECK(config.output_dir == "out");

  {
    EnvVar m("SAR_NARRATOR_MODE", "live");
    EnvVar s("SAR_NARRATOR_SEED", "77");
    EnvVar o("SAR_NARRATOR_OUT", "env_out");
    PipelineConfig env_config =
        parse_pipeline_config(minimal_config(), "t", "/d");
    apply_overrides(env_config, std::nullopt, std::nullopt, std::nullopt);
    CHECK(env_config.rewrite.mode == RewriteMode::live);
    CHECK(env_config.seed == 77);
    CHECK(env_config.output_dir == "env_out");

    PipelineConfig flag_config =
        parse_pipeline_config(minimal_config(), "t", "/d");
    apply_overrides(flag_config, std::optional<std::string>("replay"),
                    std::optional<uint64_t>(123),
                    std::optional<std::string>("flag_out"));
    CHECK(flag_config.rewrite.mode == RewriteMode::replay);
    CHECK(flag_config.seed == 123);
    CHECK(flag_config.output_dir == "flag_out");
  }

  {
    EnvVar bad_mode("SAR_NARRATOR_MODE", "turbo");
    PipelineConfig bad = parse_pipeline_config(minimal_config(), "t", "/d");
    try {
      apply_overrides(bad, std::nullopt, std::nullopt, std::nullopt);
      FAIL("expected a throw");
    } catch (const Error& e) {
      CHECK(e.code() == errc::config_error);
    }
  }
  {
    EnvVar bad_seed("SAR_NARRATOR_SEED", "notanumber");
    PipelineConfig bad = parse_pipeline_config(minimal_config(), "t", "/d");
    CHECK_THROWS_AS(apply_overrides(bad, std::nullopt, std::nullopt,
                                    std::nullopt),
                    Error);
  }
}

TEST_CASE("fingerprint is stable and sensitive") {
  const PipelineConfig a = parse_pipeline_config(full_config(), "t", "/d");
  const PipelineConfig b = parse_pipeline_config(full_config(), "t", "/d");
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  CHECK(config_fingerprint(a).size() == 64);
  CHECK(config_fingerprint(a) == sha256_hex(canonical_config_json(a)));

  PipelineConfig c = a;
  c.seed = 12;
  CHECK(config_fingerprint(c) != config_fingerprint(a));
  PipelineConfig d = a;
  d.caption.threshold_percent = 2.0;
  CHECK(config_fingerprint(d) != config_fingerprint(a));
  PipelineConfig e = a;
  e.sources[0].name = "det2";
  CHECK(config_fingerprint(e) != config_fingerprint(a));

  // The canonical dump is valid JSON and lists resolved source paths.
  const auto j = nlohmann::json::parse(canonical_config_json(a));
  CHECK(j.at("sources").size() == 3);
  CHECK(j.at("sources")[0].at("paths")[0] == "/d/det.json");
}

TEST_CASE("live mode requires credentials and a base url") {
  EnvVar key("SAR_NARRATOR_API_KEY", nullptr);
  PipelineConfig config = parse_pipeline_config(full_config(), "t", "/d");
  config.rewrite.mode = RewriteMode::live;
  try {
    check_live_credentials(config);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == errc::config_error);
  }
  {
    EnvVar set_key("SAR_NARRATOR_API_KEY", "sk-test");
    CHECK_NOTHROW(check_live_credentials(config));
    CHECK(api_key_from_env() == "sk-test");

    PipelineConfig no_url = config;
    no_url.rewrite.base_url.clear();
    CHECK_THROWS_AS(check_live_credentials(no_url), Error);
  }
  // Replay mode needs neither.
  config.rewrite.mode = RewriteMode::replay;
  CHECK_NOTHROW(check_live_credentials(config));
}

TEST_CASE("rewrite mode names round trip") {
  CHECK(std::string(rewrite_mode_name(RewriteMode::replay)) == "replay");
  CHECK(std::string(rewrite_mode_name(RewriteMode::live)) == "live");
}
