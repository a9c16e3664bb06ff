#include "sarnarrator/demo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sarnarrator/caption.hpp"
#include "sarnarrator/dedup.hpp"
#include "sarnarrator/errors.hpp"
#include "sarnarrator/image.hpp"
#include "sarnarrator/ingest.hpp"
#include "sarnarrator/rewrite.hpp"
#include "sarnarrator/util.hpp"

namespace sarnarrator::demo {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kSide = 64;
constexpr uint64_t kDemoSeed = 17;
constexpr int kIclExamples = 3;

const char* kShowcaseRewriteInput =
    "The black and white aerial photograph depicts a landscape divided into "
    "two distinct sections by a diagonal line, with a large, rectangular farm "
    "or agricultural area on the left and a densely vegetated area on the "
    "right";
const char* kShowcaseRewriteOutput =
    "A landscape divided by a diagonal line, with a large farm on the left "
    "and a densely vegetated area on the right.";
const char* kShowcaseFusionA =
    "This image contains farmland, village, and water. Water accounts for "
    "88%, farmland accounts for 3%, and village accounts for 1%.";
const char* kShowcaseFusionB =
    "The image presents an aerial view of a field, captured from a high "
    "angle. The field is divided into sections by a network of roads or "
    "pathways, creating a grid-like pattern.";
const char* kShowcaseFusionOut =
    "The image showcases a vast water body dominating the scene, with a field "
    "divided into sections by a network of roads forming a grid-like pattern.";

ImageU8 pattern_image(int pattern) {
  ImageU8 image;
  image.width = kSide;
  image.height = kSide;
  image.channels = 3;
  image.pixels.resize(static_cast<size_t>(kSide) * kSide * 3);
  const double fx = 1.0 + pattern % 5;
  const double fy = 1.0 + (pattern / 5) % 5;
  const double phase = 0.7 * pattern;
  const double tau = 6.283185307179586;
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      const double wave =
          std::sin(tau * (fx * x + fy * y) / kSide + phase) * 90.0;
      const double ridge = ((x / 8 + y / 8 + pattern) % 2 == 0) ? 18.0 : -18.0;
      int v = static_cast<int>(std::llround(128.0 + wave + ridge));
      v = std::min(255, std::max(0, v));
      const size_t at = (static_cast<size_t>(y) * kSide + x) * 3;
      image.pixels[at] = static_cast<uint8_t>(v);
      image.pixels[at + 1] = static_cast<uint8_t>(v);
      image.pixels[at + 2] = static_cast<uint8_t>(v);
    }
  }
  return image;
}

struct MaskRect {
  int x, y, w, h;
  Rgb color;
};

ImageU8 paint_mask(const Rgb& background, const std::vector<MaskRect>& rects) {
  ImageU8 mask;
  mask.width = kSide;
  mask.height = kSide;
  mask.channels = 3;
  mask.pixels.resize(static_cast<size_t>(kSide) * kSide * 3);
  auto put = [&mask](int x, int y, const Rgb& c) {
    const size_t at = (static_cast<size_t>(y) * kSide + x) * 3;
    mask.pixels[at] = c[0];
    mask.pixels[at + 1] = c[1];
    mask.pixels[at + 2] = c[2];
  };
  for (int y = 0; y < kSide; ++y)
    for (int x = 0; x < kSide; ++x) put(x, y, background);
  for (const MaskRect& rect : rects)
    for (int y = rect.y; y < rect.y + rect.h; ++y)
      for (int x = rect.x; x < rect.x + rect.w; ++x) put(x, y, rect.color);
  return mask;
}

ordered_json coco_annotation(int id, int image_id, int category_id, int x,
                             int y, int w, int h) {
  ordered_json a;
  a["id"] = id;
  a["image_id"] = image_id;
  a["category_id"] = category_id;
  a["bbox"] = {x, y, w, h};
  return a;
}

std::string detection_document() {
  ordered_json doc;
  doc["images"] = ordered_json::array();
  for (int i = 1; i <= 8; ++i) {
    ordered_json im;
    im["id"] = i;
    char name[16];
    std::snprintf(name, sizeof(name), "det_%02d.png", i);
    im["file_name"] = name;
    im["width"] = kSide;
    im["height"] = kSide;
    doc["images"].push_back(std::move(im));
  }
  doc["categories"] = ordered_json::array();
  doc["categories"].push_back({{"id", 1}, {"name", "ship"}});
  doc["categories"].push_back({{"id", 2}, {"name", "bridge"}});
  doc["categories"].push_back({{"id", 3}, {"name", "harbor"}});

  ordered_json& anns = doc["annotations"] = ordered_json::array();
  int id = 1;
  anns.push_back(coco_annotation(id++, 1, 1, 4, 4, 20, 20));
  anns.push_back(coco_annotation(id++, 2, 1, 2, 2, 10, 10));
  anns.push_back(coco_annotation(id++, 2, 1, 40, 40, 12, 12));
  anns.push_back(coco_annotation(id++, 2, 2, 20, 28, 18, 8));
  anns.push_back(coco_annotation(id++, 3, 3, 0, 0, 30, 30));
  anns.push_back(coco_annotation(id++, 3, 3, 34, 2, 28, 26));
  anns.push_back(coco_annotation(id++, 3, 3, 16, 40, 30, 20));
  for (int k = 0; k < 4; ++k)
    anns.push_back(coco_annotation(id++, 4, 1, 1 + 11 * k, 1, 8, 8));
  for (int k = 0; k < 5; ++k)
    anns.push_back(coco_annotation(id++, 5, 1, 1 + 11 * k, 2, 8, 8));
  for (int k = 0; k < 5; ++k)
    anns.push_back(coco_annotation(id++, 5, 1, 1 + 11 * k, 20, 8, 8));
  anns.push_back(coco_annotation(id++, 5, 1, 28, 40, 8, 8));
  anns.push_back(coco_annotation(id++, 6, 2, 10, 10, 40, 8));
  anns.push_back(coco_annotation(id++, 6, 1, 4, 44, 12, 12));
  anns.push_back(coco_annotation(id++, 6, 1, 46, 44, 12, 12));
  anns.push_back(coco_annotation(id++, 7, 1, 6, 6, 18, 18));
  anns.push_back(coco_annotation(id++, 8, 1, 3, 3, 10, 10));
  anns.push_back(coco_annotation(id++, 8, 1, 45, 45, 12, 12));
  return doc.dump(2) + "\n";
}

std::string mapping_document() {
  ordered_json doc;
  doc["entries"] = ordered_json::array();
  auto add = [&doc](int r, int g, int b, const char* category) {
    ordered_json e;
    e["color"] = {r, g, b};
    e["category"] = category;
    doc["entries"].push_back(std::move(e));
  };
  add(0, 0, 255, "water");
  add(0, 255, 0, "farmland");
  add(255, 0, 0, "village");
  add(0, 128, 0, "forest");
  add(128, 128, 128, "road");
  return doc.dump(2) + "\n";
}

const Rgb kWater{0, 0, 255};
const Rgb kFarmland{0, 255, 0};
const Rgb kVillage{255, 0, 0};
const Rgb kForest{0, 128, 0};
const Rgb kRoad{128, 128, 128};

std::vector<ImageU8> demo_masks() {
  std::vector<ImageU8> masks;
  masks.push_back(paint_mask(kWater, {{0, 0, 64, 3, kFarmland},
                                      {0, 3, 41, 1, kVillage}}));
  masks.push_back(paint_mask(kFarmland, {{0, 0, 64, 32, kWater},
                                         {48, 48, 12, 12, kForest}}));
  masks.push_back(paint_mask(kFarmland, {{0, 30, 64, 4, kRoad},
                                         {30, 0, 4, 64, kRoad}}));
  masks.push_back(paint_mask(kForest, {{20, 20, 16, 12, kVillage}}));
  masks.push_back(paint_mask(kWater, {{0, 40, 64, 24, kVillage},
                                      {0, 36, 64, 4, kRoad}}));
  masks.push_back(paint_mask(kFarmland, {{0, 62, 64, 2, kRoad},
                                         {0, 0, 20, 1, kVillage}}));
  return masks;
}

const std::vector<std::string>& seg_optical_captions() {
  static const std::vector<std::string> captions = {
      kShowcaseFusionB,
      "The photo shows a wide blue river crossing green farmland, with a "
      "small patch of trees near one corner.",
      "A colorful field is split into plots by straight roads that appear to "
      "meet near the middle of the picture.",
      "The camera captures a dark forest from above, and a cluster of houses "
      "seems to sit in a clearing.",
      "Gray rooftops line the shore where a road runs beside the water, "
      "possibly a harbor district.",
      "A bright green field stretches across the image, bordered by a narrow "
      "road at the bottom edge.",
  };
  return captions;
}

const std::vector<std::string>& seg_fusion_responses() {
  static const std::vector<std::string> responses = {
      kShowcaseFusionOut,
      "A wide river dominates the farmland, with a small stand of trees near "
      "one corner.",
      "Roads cross the farmland and divide it into straight-edged plots.",
      "Dense forest covers most of the scene, with a village in a clearing.",
      "Water borders a village district, with a road running along the "
      "shore.",
      "Farmland stretches across the scene, bordered by a narrow road.",
  };
  return responses;
}

const std::vector<std::string>& paired_captions() {
  static const std::vector<std::string> captions = {
      kShowcaseRewriteInput,
      "The gray photo shows a harbor with several boats, possibly fishing "
      "vessels, docked in rows.",
      "A bright green field with a few trees appears to be farmland near a "
      "road.",
      "The image quality is low, but a bridge spans the river between two "
      "banks.",
      "Dark water surrounds a small island, and the camera angle makes the "
      "shore seem distant.",
      "A colorful aerial photograph of a village with scattered trees and "
      "winding paths.",
  };
  return captions;
}

const std::vector<std::string>& paired_rewrite_responses() {
  static const std::vector<std::string> responses = {
      kShowcaseRewriteOutput,
      "A harbor with boats docked in rows.",
      "A field of farmland near a road.",
      "A bridge spans the river between two banks.",
      "Water surrounds a small island near the shore.",
      "A village with winding paths.",
  };
  return responses;
}

std::vector<IclExample> demo_icl_store() {
  static const char* scenes[] = {
      "a harbor with cranes along the quay",
      "a bridge crossing a wide river",
      "farmland divided into long strips",
      "a village beside a bend in the river",
      "an airport with two runways",
      "a coastline with breakwaters",
      "an industrial plant near the shore",
      "a reservoir behind a straight dam",
      "terraced fields on a hillside",
      "a rail yard with parallel tracks",
  };
  static const char* colors[] = {"gray", "black and white", "dark", "bright",
                                 "colorful"};
  std::vector<IclExample> store;
  for (int i = 0; i < 50; ++i) {
    const std::string scene = scenes[i % 10];
    IclExample example;
    example.source_caption = std::string("The ") + colors[i % 5] +
                             " aerial photograph seems to show " + scene +
                             ", numbered plot " + std::to_string(i + 1) + ".";
    std::string rewritten = scene;
    rewritten[0] = static_cast<char>(std::toupper(rewritten[0]));
    example.rewritten_caption =
        rewritten + ", numbered plot " + std::to_string(i + 1) + ".";
    store.push_back(std::move(example));
  }
  return store;
}

std::string two_digit_id(const char* prefix, int i) {
  char buffer[16];
  std::snprintf(buffer, sizeof(buffer), "%s_%02d", prefix, i);
  return buffer;
}

std::string config_document() {
  ordered_json j;
  j["output_dir"] = "out";
  j["seed"] = kDemoSeed;
  j["sources"] = ordered_json::array();
  {
    ordered_json s;
    s["name"] = "mini-det";
    s["task"] = "detection";
    s["adapter"] = "coco";
    s["paths"] = {"annotations/detection.json"};
    s["image_root"] = "images";
    j["sources"].push_back(std::move(s));
  }
  {
    ordered_json s;
    s["name"] = "mini-seg";
    s["task"] = "segmentation";
    s["adapter"] = "mask";
    s["paths"] = {"masks"};
    s["image_root"] = "images";
    s["mapping"] = "mapping.json";
    s["optical_captions"] = "seg_optical.tsv";
    j["sources"].push_back(std::move(s));
  }
  {
    ordered_json s;
    s["name"] = "mini-pair";
    s["task"] = "paired";
    s["adapter"] = "paired_tsv";
    s["paths"] = {"paired.tsv"};
    s["image_root"] = "images";
    j["sources"].push_back(std::move(s));
  }
  j["dedup"]["global_max_distance"] = 0;
  j["caption"]["threshold_percent"] = 1.0;
  j["caption"]["spatial_enabled"] = true;
  j["rewrite"]["mode"] = "replay";
  j["rewrite"]["cassette"] = "cassette.jsonl";
  j["rewrite"]["icl_store"] = "icl_store.jsonl";
  j["rewrite"]["n_examples"] = kIclExamples;
  j["split"]["train"] = 0.8;
  j["split"]["test"] = 0.2;
  j["split"]["seed"] = 7;
  return j.dump(2) + "\n";
}

std::string cassette_entry(const std::string& prompt,
                           const std::string& response) {
  ChatRequest request;
  request.model = "deepseek-chat";
  request.prompt = prompt;
  request.temperature = 0.0;
  ordered_json j;
  j["request_sha256"] = chat_request_sha256(request);
  j["response_text"] = response;
  return j.dump();
}

}  // namespace

DemoDataset write_demo_dataset(const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "images");
  fs::create_directories(root / "annotations");
  fs::create_directories(root / "masks");

  // Detection images; det_07 and det_08 are byte-for-byte duplicates of
  // det_01 and det_02 so the dedup stage has exactly two exact matches.
  std::vector<ImageU8> det(8);
  for (int i = 0; i < 6; ++i) det[i] = pattern_image(i);
  det[6] = det[0];
  det[7] = det[1];
  for (int i = 0; i < 8; ++i)
    save_png((root / "images" / (two_digit_id("det", i + 1) + ".png")).string(),
             det[i]);
  write_file((root / "annotations" / "detection.json").string(),
             detection_document());

  const std::vector<ImageU8> masks = demo_masks();
  std::vector<ImageU8> seg(6);
  for (int i = 0; i < 6; ++i) {
    seg[i] = pattern_image(6 + i);
    save_png((root / "images" / (two_digit_id("seg", i + 1) + ".png")).string(),
             seg[i]);
    save_png((root / "masks" / (two_digit_id("seg", i + 1) + ".png")).string(),
             masks[i]);
  }
  write_file((root / "mapping.json").string(), mapping_document());
  {
    std::string tsv;
    for (int i = 0; i < 6; ++i)
      tsv += two_digit_id("seg", i + 1) + "\t" + seg_optical_captions()[i] +
             "\n";
    write_file((root / "seg_optical.tsv").string(), tsv);
  }

  std::vector<ImageU8> pair(6);
  for (int i = 0; i < 6; ++i) {
    pair[i] = pattern_image(12 + i);
    save_png(
        (root / "images" / (two_digit_id("pair", i + 1) + ".png")).string(),
        pair[i]);
  }
  {
    std::string tsv;
    for (int i = 0; i < 6; ++i)
      tsv += two_digit_id("pair", i + 1) + "\t" + paired_captions()[i] + "\n";
    write_file((root / "paired.tsv").string(), tsv);
  }

  const std::vector<IclExample> store = demo_icl_store();
  write_icl_store(store, (root / "icl_store.jsonl").string());

  // Cassette: one entry per request the replay run will issue, plus the
  // standalone fusion pair used by the acceptance checks.
  const CategoryMapping mapping =
      load_category_mapping((root / "mapping.json").string());
  std::vector<std::string> entries;
  for (int i = 0; i < 6; ++i) {
    const std::string id = two_digit_id("pair", i + 1);
    const RewriteJob job = make_rewrite_job(id, paired_captions()[i], store,
                                            kIclExamples, kDemoSeed);
    entries.push_back(cassette_entry(
        build_rewrite_prompt(job.input_captions[0], job.selected_examples),
        paired_rewrite_responses()[i]));
  }
  for (int i = 0; i < 6; ++i) {
    const std::string mask_path =
        (root / "masks" / (two_digit_id("seg", i + 1) + ".png")).string();
    const CategoryGrid grid = load_mask(mask_path, mapping, 0);
    const std::string sa2c = sa2c_caption(grid, mapping, 1.0);
    entries.push_back(
        cassette_entry(build_fusion_prompt(sa2c, seg_optical_captions()[i]),
                       seg_fusion_responses()[i]));
  }
  entries.push_back(cassette_entry(
      build_fusion_prompt(kShowcaseFusionA, kShowcaseFusionB), kShowcaseFusionOut));
  {
    std::string body;
    for (const std::string& line : entries) body += line + "\n";
    write_file((root / "cassette.jsonl").string(), body);
  }

  write_file((root / "config.json").string(), config_document());

  // The hand tally in the acceptance run relies on the two copies being the
  // only hash collisions; verify while generating.
  std::vector<PHash> hashes;
  for (const auto& image : det) hashes.push_back(phash64(image));
  for (const auto& image : seg) hashes.push_back(phash64(image));
  for (const auto& image : pair) hashes.push_back(phash64(image));
  for (size_t a = 0; a < hashes.size(); ++a) {
    for (size_t b = a + 1; b < hashes.size(); ++b) {
      const bool copy_pair = (a == 0 && b == 6) || (a == 1 && b == 7);
      const int distance = hamming(hashes[a], hashes[b]);
      if (copy_pair && distance != 0)
        raise(errc::invalid_argument, "demo duplicate images diverged");
      if (!copy_pair && distance == 0)
        raise(errc::invalid_argument, "demo images collided in p-hash");
    }
  }

  DemoDataset dataset;
  dataset.root = root.string();
  dataset.config_path = (root / "config.json").string();
  return dataset;
}

}  // namespace sarnarrator::demo
