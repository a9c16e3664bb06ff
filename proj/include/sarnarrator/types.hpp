#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace sarnarrator {

// Axis-aligned box in pixel coordinates, corner form.
struct BoundingBox {
  int64_t x_min = 0;
  int64_t y_min = 0;
  int64_t x_max = 0;
  int64_t y_max = 0;

  bool valid_within(int64_t width, int64_t height) const {
    return x_min >= 0 && y_min >= 0 && x_min < x_max && y_min < y_max &&
           x_max <= width && y_max <= height;
  }

  bool operator==(const BoundingBox&) const = default;
};

struct DetectionObject {
  std::string class_label;  // normalized lowercase singular
  BoundingBox box;

  bool operator==(const DetectionObject&) const = default;
};

using Rgb = std::array<uint8_t, 3>;

struct CategoryMapping {
  struct Entry {
    Rgb color;
    std::string category;
  };
  std::vector<Entry> entries;
};

enum class TaskType { detection, segmentation, paired };

const char* task_name(TaskType t);
TaskType task_from_name(const std::string& name);

struct AnnotatedSample {
  std::string id;
  std::string image_path;
  int64_t width = 0;
  int64_t height = 0;
  std::string source_dataset;
  TaskType task = TaskType::detection;

  // Exactly one payload is meaningful, selected by `task`.
  std::vector<DetectionObject> detections;
  std::string mask_path;
  std::string optical_caption;
};

// Per-pixel indices into CategoryMapping::entries; kUnmapped where no entry
// matched the pixel color.
struct CategoryGrid {
  static constexpr int32_t kUnmapped = -1;

  int64_t width = 0;
  int64_t height = 0;
  std::vector<int32_t> cells;  // row-major, width*height

  int64_t total_cells() const { return width * height; }
};

struct ValidationVerdict {
  bool keep = false;
  std::string reason;  // empty when keep; else corrupted_image |
                       // missing_annotation | bad_dimensions

  static ValidationVerdict keep_sample() { return {true, ""}; }
  static ValidationVerdict drop(std::string why) {
    return {false, std::move(why)};
  }
};

}  // namespace sarnarrator
