#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relocc/scene.hpp"

namespace relocc {

struct ImageRecord {
  std::string image_id;
  std::string split;  // "train" | "val" | "test"
  std::vector<PairAnnotation> pairs;

  bool operator==(const ImageRecord&) const = default;
};

struct Dataset {
  int width = 0;
  int height = 0;
  int num_categories = 0;
  std::string dir;  // holds images/{image_id}.png
  std::vector<ImageRecord> records;

  std::string image_path(const std::string& image_id) const;
  // n such that an eval record has n(n-1) ordered pairs; falls back to the
  // number of distinct boxes when the pair count is not of that form.
  static int annotated_object_count(const ImageRecord& rec);
};

struct SynthSplits {
  int train = 0;
  int val = 0;
  int test = 0;
};

// Generates scenes, renders PNGs, and writes annotations.jsonl under out_dir.
// Train records carry one sampled ordered pair; eval records carry all
// n(n-1) ordered pairs.
Dataset synthesize_dataset(uint64_t seed, const GenConfig& cfg,
                           const SynthSplits& splits, const std::string& out_dir);

void export_dataset(const Dataset& ds);  // rewrites annotations.jsonl in ds.dir
Dataset load_dataset(const std::string& dir);

}  // namespace relocc
