#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "relocc/tensor.hpp"

namespace relocc {

struct ModelConfig {
  int image_h = 128;
  int image_w = 128;
  int backbone_channels = 64;  // C ahead of the 1x1 projection
  int hidden_dim = 64;         // d
  int encoder_layers = 6;      // N_l
  int num_heads = 4;           // N_h
  int num_queries = 100;       // N_q
  int pair_layers = 6;         // N_pair
  int distance_layers = 3;
  int occlusion_layers = 3;
  int num_classes = 6;    // N_c object categories (background is appended)
  int num_distance = 4;   // N_d
  int num_occlusion = 4;  // N_o
  int ffn_hidden = 128;
  double dropout = 0.1;
  bool git_enabled = true;
  bool pini_enabled = false;
  bool single_decoder = false;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// Per-query outputs; probability matrices are row-normalized.
struct PredictionSet {
  Mat p_a, p_b;      // (N_q, N_c+1)
  Mat box_a, box_b;  // (N_q, 4), (cx, cy, w, h) in [0,1]
  Mat p_d, p_o;      // (N_q, N_d), (N_q, N_o)
  Mat box_int;       // (N_q, 4) when GIT is enabled, else empty
};

// Same outputs as live tape vars, for building the loss graph.
struct PredictionVars {
  Var p_a, p_b, box_a, box_b, p_d, p_o;
  Var box_int;  // tape == nullptr when GIT is disabled
};

// Cross-attention weights: [layer][head] -> (N_q, h*w), rows sum to 1.
struct AttentionRecord {
  std::vector<std::vector<Mat>> pair;
  std::vector<std::vector<Mat>> distance;
  std::vector<std::vector<Mat>> occlusion;
};

// Fixed 2D sinusoidal encoding, shape (h*w, d), values in [-1, 1].
Mat positional_encoding(int h, int w, int d);

class Model {
 public:
  Model(const ModelConfig& cfg, uint64_t init_seed);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Builds the forward graph for one image tensor (3, img_h*img_w).
  PredictionVars forward(Tape& tape, const Mat& image, int img_h, int img_w,
                         bool training, std::mt19937_64& dropout_rng,
                         AttentionRecord* attn = nullptr) const;

  // Eval-mode convenience: fresh tape, dropout off, values copied out.
  PredictionSet predict(const Mat& image, int img_h, int img_w,
                        AttentionRecord* attn = nullptr) const;

  // (h, w) of the backbone feature grid; attention rows have h*w columns.
  std::pair<int, int> token_grid(int img_h, int img_w) const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  struct AttnP {
    Param *wq = nullptr, *wk = nullptr, *wv = nullptr, *wo = nullptr,
          *bo = nullptr, *ln_g = nullptr, *ln_b = nullptr;
  };
  struct FfnP {
    Param *w1 = nullptr, *b1 = nullptr, *w2 = nullptr, *b2 = nullptr,
          *ln_g = nullptr, *ln_b = nullptr;
  };
  struct EncoderLayerP {
    AttnP self;
    FfnP ffn;
  };
  struct DecoderLayerP {
    AttnP self, cross;
    FfnP ffn;
  };
  struct MlpP {
    Param *w1 = nullptr, *b1 = nullptr, *w2 = nullptr, *b2 = nullptr,
          *w3 = nullptr, *b3 = nullptr;
  };
  struct ConvP {
    Param *w = nullptr, *b = nullptr;
    int c_in = 0, c_out = 0, k = 0, stride = 0, pad = 0;
  };

  void build_params(std::mt19937_64& rng);
  MlpP make_mlp(const std::string& name, int out_dim, std::mt19937_64& rng);
  AttnP make_attn(const std::string& name, std::mt19937_64& rng);
  FfnP make_ffn(const std::string& name, std::mt19937_64& rng);

  Var run_mlp(Tape& t, const MlpP& mlp, Var x) const;
  Var attention_block(Tape& t, const AttnP& p, Var q, Var k, Var v, Var residual,
                      bool training, std::mt19937_64& rng,
                      std::vector<Mat>* capture) const;
  Var ffn_block(Tape& t, const FfnP& p, Var x, bool training,
                std::mt19937_64& rng) const;
  Var decoder_stack(Tape& t, const std::vector<DecoderLayerP>& layers, Var queries,
                    Var mem, Var mem_pe, bool fixed_cross_queries, bool training,
                    std::mt19937_64& rng, std::vector<std::vector<Mat>>* attn) const;

  ModelConfig cfg_;
  ParamStore params_;
  std::vector<ConvP> convs_;
  Param* qe_ = nullptr;
  std::vector<EncoderLayerP> encoder_;
  std::vector<DecoderLayerP> pair_, dist_, occl_;
  MlpP head_class_a_, head_class_b_, head_box_a_, head_box_b_, head_distance_,
      head_occlusion_, head_git_;
};

}  // namespace relocc
