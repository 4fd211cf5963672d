#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relocc/dataset.hpp"
#include "relocc/image.hpp"
#include "relocc/matching.hpp"
#include "relocc/model.hpp"
#include "relocc/tensor.hpp"

namespace relocc {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 16;
  double base_lr = 1e-4;
  double drop_lr = 1e-5;
  int drop_epoch = 30;  // first epoch at the dropped rate
  uint64_t seed = 0;

  bool augment = true;
  double p_flip = 0.5;
  double resize_min = 0.8;
  double resize_max = 1.2;
  double jitter_brightness = 0.12;  // additive, fraction of full range
  double jitter_contrast = 0.12;    // multiplicative range around 1

  MatchWeights weights;
  AdamConfig adam;  // lr field is overridden by the schedule

  int eval_every = 1;       // epochs between validation passes; 0 disables
  int checkpoint_every = 10;
  std::string out_dir;      // empty: no checkpoints or log files
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

double lr_schedule(const TrainConfig& cfg, int epoch);

struct Sample {
  Image image;
  std::vector<PairAnnotation> pairs;
};

// Mirror horizontally: pixels and box x-coordinates; labels are invariant.
Sample hflip_sample(const Sample& s);
// Re-rasterize at a scale factor; normalized boxes are unchanged.
Sample resize_sample(const Sample& s, double scale);
// Contrast about mid-gray then brightness shift, clamped to range.
void photometric_jitter(Image& img, double brightness, double contrast);

Sample augment_sample(const Sample& s, const TrainConfig& cfg,
                      std::mt19937_64& rng);

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;        // mean per-image total
  double loss_class = 0.0;
  double loss_reg = 0.0;    // object-box regression component
  double loss_int = 0.0;    // intersection-box component (0 when disabled)
  double match_cost = 0.0;  // mean assignment cost
  double grad_norm = 0.0;   // mean pre-clip global norm
  double val_f1_distance = 0.0;
  double val_f1_occlusion = 0.0;
  bool has_val = false;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::string final_checkpoint;  // empty when out_dir is unset
};

// Validation pass: predict, suppress, select with the leaked pair count,
// then score. Returns the metrics' F1 pair (distance, occlusion).
std::pair<double, double> validate(const Model& model, const Dataset& data,
                                   const std::string& split);

// Full loop over the dataset's "train" records, validating on "val".
// Deterministic for a fixed seed on one machine. Throws on divergence.
TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg);

}  // namespace relocc
