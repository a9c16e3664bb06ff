#pragma once

#include <string>
#include <vector>

#include "sarnarrator/types.hpp"

namespace sarnarrator {

// The nine cells of the equal-thirds image partition.
enum class SpatialCell {
  top_left,
  top,
  top_right,
  left,
  center,
  right,
  bottom_left,
  bottom,
  bottom_right,
};

const char* spatial_cell_name(SpatialCell cell);

// Location phrase without the "of the image" suffix, e.g. "on the right side".
const char* spatial_phrase_text(SpatialCell cell);

// Box center mapped onto the 3x3 equal-thirds grid; boundary coordinates
// resolve to the lower-index cell (left/top wins).
SpatialCell spatial_phrase(const BoundingBox& box, int64_t width, int64_t height);

struct ClassCount {
  std::string class_label;
  int64_t count = 0;
};

// Per-class counts in first-appearance order.
std::vector<ClassCount> count_objects_by_class(
    const std::vector<DetectionObject>& objects);

// Count-template caption from detections. Empty input yields
// "There are no detected objects in this image."
std::string a2c_caption(const std::vector<DetectionObject>& objects);

// Count templates augmented with location phrases for classes with at most
// three instances; larger classes fall back to the count-only sentence.
std::string a2c_caption_spatial(const std::vector<DetectionObject>& objects,
                                int64_t width, int64_t height);

struct ProportionEntry {
  std::string category;
  double percent = 0.0;
};

// percent = 100 * cells of that category / total cells (unmapped cells stay
// in the denominator); one entry per mapping category, mapping order.
std::vector<ProportionEntry> category_proportions(const CategoryGrid& grid,
                                                  const CategoryMapping& mapping);

// Proportion caption: categories at or above the threshold, descending by
// percent (ties by name), integer-rounded percents. All below threshold ->
// "No significant categories found."
std::string sa2c_caption(const CategoryGrid& grid, const CategoryMapping& mapping,
                         double threshold_percent = 1.0);

std::string sa2c_caption_from_proportions(std::vector<ProportionEntry> proportions,
                                          double threshold_percent);

}  // namespace sarnarrator
