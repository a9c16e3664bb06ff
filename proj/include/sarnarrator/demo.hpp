#pragma once

#include <string>

namespace sarnarrator::demo {

// Writes a self-contained miniature dataset (20 samples: 8 detection with 2
// exact duplicate images, 6 segmentation with optical captions, 6 paired)
// plus config, category mapping, ICL store and a replay cassette covering
// every rewrite and fusion request the pipeline will issue. Deterministic:
// the same directory contents on every call.
struct DemoDataset {
  std::string root;
  std::string config_path;
};

DemoDataset write_demo_dataset(const std::string& dir);

}  // namespace sarnarrator::demo
