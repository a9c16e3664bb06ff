#include "sarnarrator/ingest.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sarnarrator/errors.hpp"
#include "sarnarrator/image.hpp"
#include "sarnarrator/kernels.hpp"
#include "sarnarrator/util.hpp"

namespace sarnarrator {

namespace {

using nlohmann::json;

// Irregular nouns whose singular and plural coincide (or do not follow the
// trailing-s rule). Table 1 sources use "Aircraft" among the ship classes.
const std::unordered_map<std::string, std::string>& irregular_plural_to_singular() {
  static const std::unordered_map<std::string, std::string> table = {
      {"aircraft", "aircraft"},
      {"sheep", "sheep"},
      {"fish", "fish"},
      {"buses", "bus"},
  };
  return table;
}

const std::unordered_map<std::string, std::string>& irregular_singular_to_plural() {
  static const std::unordered_map<std::string, std::string> table = {
      {"aircraft", "aircraft"}, {"sheep", "sheep"}, {"fish", "fish"},
      {"bus", "buses"},
  };
  return table;
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::malformed_document, "cannot open document: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    raise(errc::malformed_document, "unparseable JSON: " + path);
  }
  return doc;
}

int64_t round_to_i64(double v) { return std::llround(v); }

}  // namespace

std::string normalize_class_label(const std::string& label) {
  std::string s = to_lower(trim(label));
  auto it = irregular_plural_to_singular().find(s);
  if (it != irregular_plural_to_singular().end()) return it->second;
  // Generic: strip one trailing "s" unless the word ends in "ss".
  if (s.size() > 2 && s.back() == 's' && s[s.size() - 2] != 's') {
    s.pop_back();
  }
  return s;
}

std::string pluralize_class_label(const std::string& label) {
  auto it = irregular_singular_to_plural().find(label);
  if (it != irregular_singular_to_plural().end()) return it->second;
  return label + "s";
}

std::vector<AnnotatedSample> parse_detection_coco(const std::string& path) {
  const json doc = parse_json_file(path);
  if (!doc.is_object() || !doc.contains("images") || !doc.contains("annotations") ||
      !doc.contains("categories") || !doc["images"].is_array() ||
      !doc["annotations"].is_array() || !doc["categories"].is_array()) {
    raise(errc::malformed_document,
          "missing images/annotations/categories arrays: " + path);
  }

  std::unordered_map<int64_t, std::string> categories;
  for (const auto& cat : doc["categories"]) {
    if (!cat.contains("id") || !cat.contains("name")) {
      raise(errc::malformed_document, "category without id/name: " + path);
    }
    categories[cat["id"].get<int64_t>()] =
        normalize_class_label(cat["name"].get<std::string>());
  }

  std::vector<AnnotatedSample> samples;
  std::unordered_map<int64_t, size_t> image_index;
  for (const auto& im : doc["images"]) {
    if (!im.contains("id") || !im.contains("file_name") || !im.contains("width") ||
        !im.contains("height")) {
      raise(errc::malformed_document, "image without id/file_name/size: " + path);
    }
    AnnotatedSample s;
    const int64_t image_id = im["id"].get<int64_t>();
    s.image_path = im["file_name"].get<std::string>();
    s.id = std::filesystem::path(s.image_path).stem().string();
    s.width = im["width"].get<int64_t>();
    s.height = im["height"].get<int64_t>();
    s.task = TaskType::detection;
    image_index[image_id] = samples.size();
    samples.push_back(std::move(s));
  }

  for (const auto& ann : doc["annotations"]) {
    if (!ann.contains("image_id") || !ann.contains("category_id") ||
        !ann.contains("bbox") || !ann["bbox"].is_array() || ann["bbox"].size() != 4) {
      raise(errc::malformed_document, "annotation without image_id/category_id/bbox: " + path);
    }
    const int64_t image_id = ann["image_id"].get<int64_t>();
    const int64_t category_id = ann["category_id"].get<int64_t>();
    auto img_it = image_index.find(image_id);
    if (img_it == image_index.end()) {
      raise(errc::dangling_reference,
            "annotation references unknown image id " + std::to_string(image_id) +
                ": " + path);
    }
    auto cat_it = categories.find(category_id);
    if (cat_it == categories.end()) {
      raise(errc::dangling_reference,
            "annotation references unknown category id " + std::to_string(category_id) +
                ": " + path);
    }
    const double x = ann["bbox"][0].get<double>();
    const double y = ann["bbox"][1].get<double>();
    const double w = ann["bbox"][2].get<double>();
    const double h = ann["bbox"][3].get<double>();
    if (w <= 0.0 || h <= 0.0) {
      raise(errc::invalid_box, "non-positive bbox width/height: " + path);
    }
    AnnotatedSample& sample = samples[img_it->second];
    DetectionObject obj;
    obj.class_label = cat_it->second;
    obj.box = BoundingBox{round_to_i64(x), round_to_i64(y), round_to_i64(x + w),
                          round_to_i64(y + h)};
    if (!obj.box.valid_within(sample.width, sample.height)) {
      raise(errc::invalid_box, "bbox outside image bounds for image id " +
                                   std::to_string(image_id) + ": " + path);
    }
    sample.detections.push_back(std::move(obj));
  }
  return samples;
}

AnnotatedSample parse_detection_voc(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(path, tree);
  } catch (const pt::xml_parser_error& e) {
    raise(errc::malformed_document, std::string("unparseable XML: ") + path + " (" +
                                        e.message() + ")");
  }

  const auto annotation = tree.get_child_optional("annotation");
  if (!annotation) {
    raise(errc::malformed_document, "missing annotation element: " + path);
  }
  const auto size = annotation->get_child_optional("size");
  if (!size) raise(errc::malformed_document, "missing size element: " + path);

  AnnotatedSample sample;
  sample.task = TaskType::detection;
  try {
    sample.width = size->get<int64_t>("width");
    sample.height = size->get<int64_t>("height");
  } catch (const pt::ptree_error&) {
    raise(errc::malformed_document, "size element missing width/height: " + path);
  }
  sample.image_path = annotation->get<std::string>("filename", "");
  if (sample.image_path.empty()) {
    sample.id = std::filesystem::path(path).stem().string();
  } else {
    sample.id = std::filesystem::path(sample.image_path).stem().string();
  }

  for (const auto& [key, node] : *annotation) {
    if (key != "object") continue;
    DetectionObject obj;
    try {
      obj.class_label = normalize_class_label(node.get<std::string>("name"));
      obj.box.x_min = node.get<int64_t>("bndbox.xmin");
      obj.box.y_min = node.get<int64_t>("bndbox.ymin");
      obj.box.x_max = node.get<int64_t>("bndbox.xmax");
      obj.box.y_max = node.get<int64_t>("bndbox.ymax");
    } catch (const pt::ptree_error&) {
      raise(errc::malformed_document, "object element missing name/bndbox: " + path);
    }
    if (obj.box.x_min >= obj.box.x_max || obj.box.y_min >= obj.box.y_max) {
      raise(errc::invalid_box, "degenerate box in " + path);
    }
    sample.detections.push_back(std::move(obj));
  }
  return sample;
}

CategoryGrid load_mask(const std::string& path, const CategoryMapping& mapping,
                       int color_tolerance) {
  const ImageU8 raw = load_png(path);
  if (raw.pixel_count() == 0) raise(errc::empty_image, "zero-pixel mask: " + path);
  const ImageU8 img = to_rgb(raw);

  CategoryGrid grid;
  grid.width = img.width;
  grid.height = img.height;
  const size_t n = static_cast<size_t>(img.pixel_count());
  grid.cells.assign(n, CategoryGrid::kUnmapped);

  if (color_tolerance <= 0) {
    std::vector<uint32_t> packed(n);
    kernels::pack_rgb_u32(img.pixels.data(), n, packed.data());
    for (size_t e = 0; e < mapping.entries.size(); ++e) {
      const Rgb& c = mapping.entries[e].color;
      const uint32_t key = (static_cast<uint32_t>(c[0]) << 16) |
                           (static_cast<uint32_t>(c[1]) << 8) |
                           static_cast<uint32_t>(c[2]);
      kernels::match_assign_u32(packed.data(), n, key, static_cast<int32_t>(e),
                                grid.cells.data());
    }
  } else {
    for (size_t i = 0; i < n; ++i) {
      const uint8_t* p = img.pixels.data() + i * 3;
      for (size_t e = 0; e < mapping.entries.size(); ++e) {
        const Rgb& c = mapping.entries[e].color;
        if (std::abs(int(p[0]) - int(c[0])) <= color_tolerance &&
            std::abs(int(p[1]) - int(c[1])) <= color_tolerance &&
            std::abs(int(p[2]) - int(c[2])) <= color_tolerance) {
          grid.cells[i] = static_cast<int32_t>(e);
          break;
        }
      }
    }
  }
  return grid;
}

ValidationVerdict validate_sample(const AnnotatedSample& sample) {
  try {
    (void)load_png(sample.image_path);
  } catch (const Error&) {
    return ValidationVerdict::drop("corrupted_image");
  }
  if (sample.width <= 0 || sample.height <= 0) {
    return ValidationVerdict::drop("bad_dimensions");
  }
  switch (sample.task) {
    case TaskType::detection:
      if (sample.detections.empty()) {
        return ValidationVerdict::drop("missing_annotation");
      }
      break;
    case TaskType::segmentation: {
      try {
        const ImageU8 mask = load_png(sample.mask_path);
        if (mask.pixel_count() == 0) {
          return ValidationVerdict::drop("missing_annotation");
        }
      } catch (const Error&) {
        return ValidationVerdict::drop("missing_annotation");
      }
      break;
    }
    case TaskType::paired:
      if (trim(sample.optical_caption).empty()) {
        return ValidationVerdict::drop("missing_annotation");
      }
      break;
  }
  return ValidationVerdict::keep_sample();
}

std::vector<PairedCaption> parse_paired_tsv(const std::string& path) {
  std::vector<PairedCaption> out;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      raise(errc::malformed_document, "missing tab separator at " + path + ":" +
                                          std::to_string(lineno));
    }
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

const char* task_name(TaskType t) {
  switch (t) {
    case TaskType::detection:
      return "detection";
    case TaskType::segmentation:
      return "segmentation";
    case TaskType::paired:
      return "paired";
  }
  return "detection";
}

TaskType task_from_name(const std::string& name) {
  if (name == "detection") return TaskType::detection;
  if (name == "segmentation") return TaskType::segmentation;
  if (name == "paired") return TaskType::paired;
  raise(errc::malformed_document, "unknown task type: " + name);
}

std::string sample_to_json_line(const AnnotatedSample& sample) {
  json j;
  j["id"] = sample.id;
  j["image"] = sample.image_path;
  j["width"] = sample.width;
  j["height"] = sample.height;
  j["source"] = sample.source_dataset;
  j["task"] = task_name(sample.task);
  switch (sample.task) {
    case TaskType::detection: {
      json dets = json::array();
      for (const auto& d : sample.detections) {
        dets.push_back({{"class", d.class_label},
                        {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}}});
      }
      j["detections"] = std::move(dets);
      break;
    }
    case TaskType::segmentation:
      j["mask"] = sample.mask_path;
      if (!sample.optical_caption.empty())
        j["optical_caption"] = sample.optical_caption;
      break;
    case TaskType::paired:
      j["optical_caption"] = sample.optical_caption;
      break;
  }
  return j.dump();
}

AnnotatedSample sample_from_json_line(const std::string& line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    raise(errc::malformed_document, "unparseable sample record");
  }
  AnnotatedSample s;
  try {
    s.id = j.at("id").get<std::string>();
    s.image_path = j.at("image").get<std::string>();
    s.width = j.at("width").get<int64_t>();
    s.height = j.at("height").get<int64_t>();
    s.source_dataset = j.at("source").get<std::string>();
    s.task = task_from_name(j.at("task").get<std::string>());
    if (s.task == TaskType::detection) {
      for (const auto& d : j.at("detections")) {
        DetectionObject obj;
        obj.class_label = d.at("class").get<std::string>();
        const auto& b = d.at("box");
        obj.box = BoundingBox{b.at(0).get<int64_t>(), b.at(1).get<int64_t>(),
                              b.at(2).get<int64_t>(), b.at(3).get<int64_t>()};
        s.detections.push_back(std::move(obj));
      }
    } else if (s.task == TaskType::segmentation) {
      s.mask_path = j.at("mask").get<std::string>();
      if (j.contains("optical_caption"))
        s.optical_caption = j.at("optical_caption").get<std::string>();
    } else {
      s.optical_caption = j.at("optical_caption").get<std::string>();
    }
  } catch (const json::exception& e) {
    raise(errc::malformed_document, std::string("bad sample record: ") + e.what());
  }
  return s;
}

void write_samples_jsonl(const std::string& path,
                         const std::vector<AnnotatedSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json_line(s);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<AnnotatedSample> read_samples_jsonl(const std::string& path) {
  std::vector<AnnotatedSample> out;
  for (const std::string& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    out.push_back(sample_from_json_line(line));
  }
  return out;
}

CategoryMapping load_category_mapping(const std::string& path) {
  const json doc = parse_json_file(path);
  if (!doc.contains("entries") || !doc["entries"].is_array() ||
      doc["entries"].empty()) {
    raise(errc::malformed_document, "mapping without entries: " + path);
  }
  CategoryMapping mapping;
  std::set<std::array<int, 3>> seen;
  for (const auto& e : doc["entries"]) {
    if (!e.contains("color") || !e.contains("category") || e["color"].size() != 3) {
      raise(errc::malformed_document, "bad mapping entry: " + path);
    }
    CategoryMapping::Entry entry;
    for (int i = 0; i < 3; ++i) {
      const int v = e["color"][i].get<int>();
      if (v < 0 || v > 255) {
        raise(errc::malformed_document, "color channel out of range: " + path);
      }
      entry.color[static_cast<size_t>(i)] = static_cast<uint8_t>(v);
    }
    entry.category = e["category"].get<std::string>();
    if (entry.category.empty()) {
      raise(errc::malformed_document, "empty category name: " + path);
    }
    if (!seen.insert({entry.color[0], entry.color[1], entry.color[2]}).second) {
      raise(errc::malformed_document, "duplicate color in mapping: " + path);
    }
    mapping.entries.push_back(std::move(entry));
  }
  return mapping;
}

}  // namespace sarnarrator
