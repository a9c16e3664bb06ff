#pragma once

#include <string>
#include <vector>

#include "sarnarrator/types.hpp"

namespace sarnarrator {

// COCO-style detection JSON (images / annotations / categories arrays).
// bbox [x, y, w, h] is converted to corner form; class labels are normalized
// to lowercase singular. One sample per image, in `images` order.
std::vector<AnnotatedSample> parse_detection_coco(const std::string& path);

// Single-image VOC-style XML; xmin/ymin/xmax/ymax read verbatim.
AnnotatedSample parse_detection_voc(const std::string& path);

// RGB raster -> per-pixel mapping indices (kUnmapped where no color matches).
// color_tolerance 0 means exact triple match; >0 matches within a Chebyshev
// radius per channel.
CategoryGrid load_mask(const std::string& path, const CategoryMapping& mapping,
                       int color_tolerance = 0);

// Keep/drop verdict per the cleaning rules: unreadable image, non-positive
// dimensions, or an empty payload. Pure: never throws, never writes.
ValidationVerdict validate_sample(const AnnotatedSample& sample);

// id<TAB>caption records.
struct PairedCaption {
  std::string id;
  std::string caption;
};
std::vector<PairedCaption> parse_paired_tsv(const std::string& path);

// Canonical one-record-per-line JSON interchange.
std::string sample_to_json_line(const AnnotatedSample& sample);
AnnotatedSample sample_from_json_line(const std::string& line);
void write_samples_jsonl(const std::string& path,
                         const std::vector<AnnotatedSample>& samples);
std::vector<AnnotatedSample> read_samples_jsonl(const std::string& path);

// lowercase, trimmed, singular via a small irregular table.
std::string normalize_class_label(const std::string& label);
std::string pluralize_class_label(const std::string& label);

// JSON mapping file: {"entries": [{"color": [r,g,b], "category": "water"}]}
CategoryMapping load_category_mapping(const std::string& path);

}  // namespace sarnarrator
