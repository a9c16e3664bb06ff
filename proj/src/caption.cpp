#include "sarnarrator/caption.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "sarnarrator/errors.hpp"
#include "sarnarrator/ingest.hpp"
#include "sarnarrator/util.hpp"

namespace sarnarrator {

namespace {

constexpr const char* kEmptyCaption = "There are no detected objects in this image.";

// Count sentence shared by the single- and multi-class paths; the source
// branch structures differ but collapse to the same text once spacing is
// normalized.
std::string count_sentence(const std::string& cls, int64_t count) {
  if (count == 1) return "There is 1 " + cls + " in this image.";
  const std::string plural = pluralize_class_label(cls);
  if (count <= 10) {
    return "There are " + std::to_string(count) + " " + plural + " in this image.";
  }
  return "There are more than ten " + plural + " in this image.";
}

std::string capitalize_first(std::string s) {
  for (char& c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      break;
    }
    if (!std::isspace(static_cast<unsigned char>(c))) break;
  }
  return s;
}

}  // namespace

const char* spatial_cell_name(SpatialCell cell) {
  switch (cell) {
    case SpatialCell::top_left: return "top-left corner";
    case SpatialCell::top: return "top";
    case SpatialCell::top_right: return "top-right corner";
    case SpatialCell::left: return "left";
    case SpatialCell::center: return "center";
    case SpatialCell::right: return "right";
    case SpatialCell::bottom_left: return "bottom-left corner";
    case SpatialCell::bottom: return "bottom";
    case SpatialCell::bottom_right: return "bottom-right corner";
  }
  return "center";
}

const char* spatial_phrase_text(SpatialCell cell) {
  switch (cell) {
    case SpatialCell::top_left: return "in the top-left corner";
    case SpatialCell::top: return "at the top";
    case SpatialCell::top_right: return "in the top-right corner";
    case SpatialCell::left: return "on the left side";
    case SpatialCell::center: return "in the center";
    case SpatialCell::right: return "on the right side";
    case SpatialCell::bottom_left: return "in the bottom-left corner";
    case SpatialCell::bottom: return "at the bottom";
    case SpatialCell::bottom_right: return "in the bottom-right corner";
  }
  return "in the center";
}

SpatialCell spatial_phrase(const BoundingBox& box, int64_t width, int64_t height) {
  // Twice the center keeps the arithmetic integral; thirds boundaries then
  // compare 3*(2*c) against 2*dim and 4*dim, with <= so boundaries resolve to
  // the lower-index cell.
  const int64_t cx2 = box.x_min + box.x_max;
  const int64_t cy2 = box.y_min + box.y_max;
  const int col = (3 * cx2 <= 2 * width) ? 0 : (3 * cx2 <= 4 * width) ? 1 : 2;
  const int row = (3 * cy2 <= 2 * height) ? 0 : (3 * cy2 <= 4 * height) ? 1 : 2;
  static constexpr SpatialCell cells[3][3] = {
      {SpatialCell::top_left, SpatialCell::top, SpatialCell::top_right},
      {SpatialCell::left, SpatialCell::center, SpatialCell::right},
      {SpatialCell::bottom_left, SpatialCell::bottom, SpatialCell::bottom_right},
  };
  return cells[row][col];
}

std::vector<ClassCount> count_objects_by_class(
    const std::vector<DetectionObject>& objects) {
  std::vector<ClassCount> counts;
  for (const auto& obj : objects) {
    auto it = std::find_if(counts.begin(), counts.end(), [&](const ClassCount& c) {
      return c.class_label == obj.class_label;
    });
    if (it == counts.end()) {
      counts.push_back({obj.class_label, 1});
    } else {
      ++it->count;
    }
  }
  return counts;
}

std::string a2c_caption(const std::vector<DetectionObject>& objects) {
  const std::vector<ClassCount> counts = count_objects_by_class(objects);
  if (counts.empty()) return kEmptyCaption;
  std::string caption;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (i > 0) caption += ' ';
    caption += count_sentence(counts[i].class_label, counts[i].count);
  }
  return caption;
}

std::string a2c_caption_spatial(const std::vector<DetectionObject>& objects,
                                int64_t width, int64_t height) {
  const std::vector<ClassCount> counts = count_objects_by_class(objects);
  if (counts.empty()) return kEmptyCaption;

  std::string caption;
  for (size_t i = 0; i < counts.size(); ++i) {
    const ClassCount& cc = counts[i];
    if (i > 0) caption += ' ';
    if (cc.count > 3) {
      caption += count_sentence(cc.class_label, cc.count);
      continue;
    }
    // Cells in first-appearance order, aggregated when objects share a cell.
    std::vector<std::pair<SpatialCell, int64_t>> cells;
    for (const auto& obj : objects) {
      if (obj.class_label != cc.class_label) continue;
      const SpatialCell cell = spatial_phrase(obj.box, width, height);
      auto it = std::find_if(cells.begin(), cells.end(),
                             [&](const auto& p) { return p.first == cell; });
      if (it == cells.end()) {
        cells.push_back({cell, 1});
      } else {
        ++it->second;
      }
    }
    if (cc.count == 1) {
      caption += "There is 1 " + cc.class_label + " " +
                 spatial_phrase_text(cells.front().first) + " of the image.";
    } else {
      std::string sentence = "There are " + std::to_string(cc.count) + " " +
                             pluralize_class_label(cc.class_label) +
                             " in this image:";
      for (size_t c = 0; c < cells.size(); ++c) {
        sentence += (c == 0) ? " " : ", ";
        sentence += std::to_string(cells[c].second);
        sentence += ' ';
        sentence += spatial_phrase_text(cells[c].first);
      }
      sentence += '.';
      caption += sentence;
    }
  }
  return caption;
}

std::vector<ProportionEntry> category_proportions(const CategoryGrid& grid,
                                                  const CategoryMapping& mapping) {
  const int64_t total = grid.total_cells();
  std::vector<int64_t> counts(mapping.entries.size(), 0);
  for (int32_t cell : grid.cells) {
    if (cell >= 0 && static_cast<size_t>(cell) < counts.size()) {
      ++counts[static_cast<size_t>(cell)];
    }
  }
  std::vector<ProportionEntry> out;
  out.reserve(mapping.entries.size());
  for (size_t i = 0; i < mapping.entries.size(); ++i) {
    out.push_back({mapping.entries[i].category,
                   total > 0 ? 100.0 * static_cast<double>(counts[i]) /
                                   static_cast<double>(total)
                             : 0.0});
  }
  return out;
}

std::string sa2c_caption_from_proportions(std::vector<ProportionEntry> proportions,
                                          double threshold_percent) {
  std::erase_if(proportions, [&](const ProportionEntry& e) {
    return e.percent < threshold_percent;
  });
  if (proportions.empty()) return "No significant categories found.";

  std::stable_sort(proportions.begin(), proportions.end(),
                   [](const ProportionEntry& a, const ProportionEntry& b) {
                     if (a.percent != b.percent) return a.percent > b.percent;
                     return a.category < b.category;
                   });

  std::vector<std::string> names;
  std::vector<std::string> clauses;
  for (const auto& e : proportions) {
    names.push_back(e.category);
    clauses.push_back(e.category + " accounts for " +
                      std::to_string(std::llround(e.percent)) + "%");
  }
  return "This image contains " + join_with_and(names) + ". " +
         capitalize_first(join_with_and(clauses)) + ".";
}

std::string sa2c_caption(const CategoryGrid& grid, const CategoryMapping& mapping,
                         double threshold_percent) {
  if (threshold_percent <= 0.0 || threshold_percent > 100.0) {
    raise(errc::invalid_argument, "threshold_percent must be in (0,100]");
  }
  return sa2c_caption_from_proportions(category_proportions(grid, mapping),
                                       threshold_percent);
}

}  // namespace sarnarrator
