#include "relocc/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace relocc {

using nlohmann::json;

void ModelConfig::validate() const {
  if (image_h < 32 || image_w < 32)
    throw std::invalid_argument("image sides must be at least 32");
  if (hidden_dim % num_heads != 0)
    throw std::invalid_argument("hidden_dim must divide into heads");
  if (hidden_dim % 4 != 0)
    throw std::invalid_argument("hidden_dim must be divisible by 4 for the 2d encoding");
  if (num_queries < 1) throw std::invalid_argument("need at least one query");
  if (encoder_layers < 1 || pair_layers < 1)
    throw std::invalid_argument("encoder and pair decoder need at least one layer");
  if (!single_decoder && (distance_layers < 1 || occlusion_layers < 1))
    throw std::invalid_argument("relationship decoders need at least one layer");
  if (num_classes < 1 || num_distance < 1 || num_occlusion < 1)
    throw std::invalid_argument("class counts must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("bad dropout rate");
}

namespace {

json config_to_json_obj(const ModelConfig& c) {
  return json{{"image_h", c.image_h},
              {"image_w", c.image_w},
              {"backbone_channels", c.backbone_channels},
              {"hidden_dim", c.hidden_dim},
              {"encoder_layers", c.encoder_layers},
              {"num_heads", c.num_heads},
              {"num_queries", c.num_queries},
              {"pair_layers", c.pair_layers},
              {"distance_layers", c.distance_layers},
              {"occlusion_layers", c.occlusion_layers},
              {"num_classes", c.num_classes},
              {"num_distance", c.num_distance},
              {"num_occlusion", c.num_occlusion},
              {"ffn_hidden", c.ffn_hidden},
              {"dropout", c.dropout},
              {"git_enabled", c.git_enabled},
              {"pini_enabled", c.pini_enabled},
              {"single_decoder", c.single_decoder}};
}

ModelConfig config_from_json_obj(const json& j) {
  ModelConfig c;
  c.image_h = j.value("image_h", c.image_h);
  c.image_w = j.value("image_w", c.image_w);
  c.backbone_channels = j.value("backbone_channels", c.backbone_channels);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.num_queries = j.value("num_queries", c.num_queries);
  c.pair_layers = j.value("pair_layers", c.pair_layers);
  c.distance_layers = j.value("distance_layers", c.distance_layers);
  c.occlusion_layers = j.value("occlusion_layers", c.occlusion_layers);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.num_distance = j.value("num_distance", c.num_distance);
  c.num_occlusion = j.value("num_occlusion", c.num_occlusion);
  c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.git_enabled = j.value("git_enabled", c.git_enabled);
  c.pini_enabled = j.value("pini_enabled", c.pini_enabled);
  c.single_decoder = j.value("single_decoder", c.single_decoder);
  c.validate();
  return c;
}

Mat xavier(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / double(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

Mat gaussian(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, stddev);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = g(rng);
  return m;
}

}  // namespace

std::string ModelConfig::to_json() const { return config_to_json_obj(*this).dump(2); }

ModelConfig ModelConfig::from_json(const std::string& text) {
  return config_from_json_obj(json::parse(text));
}

Mat positional_encoding(int h, int w, int d) {
  if (d % 4 != 0) throw std::invalid_argument("encoding needs d divisible by 4");
  const int quarter = d / 4;
  Mat pe(h * w, d);
  constexpr double kTwoPi = 6.283185307179586;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int row = y * w + x;
      const double py = (y + 0.5) / h * kTwoPi;
      const double px = (x + 0.5) / w * kTwoPi;
      for (int i = 0; i < quarter; ++i) {
        const double freq = std::pow(10000.0, -double(i) / quarter);
        pe(row, i) = std::sin(py * freq);
        pe(row, quarter + i) = std::cos(py * freq);
        pe(row, 2 * quarter + i) = std::sin(px * freq);
        pe(row, 3 * quarter + i) = std::cos(px * freq);
      }
    }
  return pe;
}

Model::Model(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(init_seed);
  build_params(rng);
}

Model::MlpP Model::make_mlp(const std::string& name, int out_dim,
                            std::mt19937_64& rng) {
  const int d = cfg_.hidden_dim;
  MlpP m;
  m.w1 = params_.add(name + ".w1", xavier(d, d, rng));
  m.b1 = params_.add(name + ".b1", Mat::Zero(1, d));
  m.w2 = params_.add(name + ".w2", xavier(d, d, rng));
  m.b2 = params_.add(name + ".b2", Mat::Zero(1, d));
  m.w3 = params_.add(name + ".w3", xavier(d, out_dim, rng));
  m.b3 = params_.add(name + ".b3", Mat::Zero(1, out_dim));
  return m;
}

Model::AttnP Model::make_attn(const std::string& name, std::mt19937_64& rng) {
  const int d = cfg_.hidden_dim;
  AttnP a;
  a.wq = params_.add(name + ".wq", xavier(d, d, rng));
  a.wk = params_.add(name + ".wk", xavier(d, d, rng));
  a.wv = params_.add(name + ".wv", xavier(d, d, rng));
  // The output linear wraps the residual stream, so start it at identity to
  // keep a clean skip path at init.
  a.wo = params_.add(name + ".wo", Mat::Identity(d, d));
  a.bo = params_.add(name + ".bo", Mat::Zero(1, d));
  a.ln_g = params_.add(name + ".ln_g", Mat::Ones(1, d));
  a.ln_b = params_.add(name + ".ln_b", Mat::Zero(1, d));
  return a;
}

Model::FfnP Model::make_ffn(const std::string& name, std::mt19937_64& rng) {
  const int d = cfg_.hidden_dim;
  FfnP f;
  f.w1 = params_.add(name + ".w1", xavier(d, cfg_.ffn_hidden, rng));
  f.b1 = params_.add(name + ".b1", Mat::Zero(1, cfg_.ffn_hidden));
  f.w2 = params_.add(name + ".w2", xavier(cfg_.ffn_hidden, d, rng));
  f.b2 = params_.add(name + ".b2", Mat::Zero(1, d));
  f.ln_g = params_.add(name + ".ln_g", Mat::Ones(1, d));
  f.ln_b = params_.add(name + ".ln_b", Mat::Zero(1, d));
  return f;
}

void Model::build_params(std::mt19937_64& rng) {
  const int d = cfg_.hidden_dim;
  const int c = cfg_.backbone_channels;
  // Stride-32 stack: 5x5/s4 stem, then three 3x3/s2 stages, then 1x1 to d.
  const int chans[5] = {3, 32, 64, 96, c};
  const int kernel[4] = {5, 3, 3, 3};
  const int stride[4] = {4, 2, 2, 2};
  for (int i = 0; i < 4; ++i) {
    ConvP conv;
    conv.c_in = chans[i];
    conv.c_out = chans[i + 1];
    conv.k = kernel[i];
    conv.stride = stride[i];
    conv.pad = (kernel[i] - 1) / 2;  // keeps out = ceil(in/stride)
    conv.w = params_.add("backbone.conv" + std::to_string(i) + ".w",
                         xavier(conv.c_out, conv.c_in * conv.k * conv.k, rng));
    conv.b = params_.add("backbone.conv" + std::to_string(i) + ".b",
                         Mat::Zero(conv.c_out, 1));
    convs_.push_back(conv);
  }
  ConvP proj{nullptr, nullptr, c, d, 1, 1, 0};
  proj.w = params_.add("backbone.proj.w", xavier(d, c, rng));
  proj.b = params_.add("backbone.proj.b", Mat::Zero(d, 1));
  convs_.push_back(proj);

  for (int l = 0; l < cfg_.encoder_layers; ++l) {
    const std::string base = "encoder." + std::to_string(l);
    encoder_.push_back({make_attn(base + ".self", rng), make_ffn(base + ".ffn", rng)});
  }

  qe_ = params_.add("qe", gaussian(cfg_.num_queries, d, 1.0, rng));
  auto make_decoder = [&](const std::string& name, int layers,
                          std::vector<DecoderLayerP>& out) {
    for (int l = 0; l < layers; ++l) {
      const std::string base = name + "." + std::to_string(l);
      out.push_back({make_attn(base + ".self", rng), make_attn(base + ".cross", rng),
                     make_ffn(base + ".ffn", rng)});
    }
  };
  make_decoder("pair", cfg_.pair_layers, pair_);
  if (!cfg_.single_decoder) {
    make_decoder("dist", cfg_.distance_layers, dist_);
    make_decoder("occl", cfg_.occlusion_layers, occl_);
  }

  head_class_a_ = make_mlp("head.class_a", cfg_.num_classes + 1, rng);
  head_class_b_ = make_mlp("head.class_b", cfg_.num_classes + 1, rng);
  head_box_a_ = make_mlp("head.box_a", 4, rng);
  head_box_b_ = make_mlp("head.box_b", 4, rng);
  head_distance_ = make_mlp("head.distance", cfg_.num_distance, rng);
  head_occlusion_ = make_mlp("head.occlusion", cfg_.num_occlusion, rng);
  if (cfg_.git_enabled) head_git_ = make_mlp("head.git_box", 4, rng);
}

Var Model::run_mlp(Tape& t, const MlpP& mlp, Var x) const {
  Var h = ops::relu(ops::linear(x, t.param(*mlp.w1), t.param(*mlp.b1)));
  h = ops::relu(ops::linear(h, t.param(*mlp.w2), t.param(*mlp.b2)));
  return ops::linear(h, t.param(*mlp.w3), t.param(*mlp.b3));
}

// One attention module: heads, concat, Linear(Dropout(A) + residual), then a
// post-residual layer norm.
Var Model::attention_block(Tape& t, const AttnP& p, Var q, Var k, Var v,
                           Var residual, bool training, std::mt19937_64& rng,
                           std::vector<Mat>* capture) const {
  Var cat = ops::mha_concat(q, k, v, t.param(*p.wq), t.param(*p.wk), t.param(*p.wv),
                            cfg_.num_heads, capture);
  Var mixed = ops::add(ops::dropout(cat, cfg_.dropout, rng, training), residual);
  Var out = ops::linear(mixed, t.param(*p.wo), t.param(*p.bo));
  return ops::layernorm(out, t.param(*p.ln_g), t.param(*p.ln_b));
}

Var Model::ffn_block(Tape& t, const FfnP& p, Var x, bool training,
                     std::mt19937_64& rng) const {
  Var h = ops::relu(ops::linear(x, t.param(*p.w1), t.param(*p.b1)));
  h = ops::dropout(h, cfg_.dropout, rng, training);
  h = ops::linear(h, t.param(*p.w2), t.param(*p.b2));
  h = ops::dropout(h, cfg_.dropout, rng, training);
  return ops::layernorm(ops::add(x, h), t.param(*p.ln_g), t.param(*p.ln_b));
}

Var Model::decoder_stack(Tape& t, const std::vector<DecoderLayerP>& layers,
                         Var queries, Var mem, Var mem_pe, bool fixed_cross_queries,
                         bool training, std::mt19937_64& rng,
                         std::vector<std::vector<Mat>>* attn) const {
  Var stream = t.leaf(Mat::Zero(queries.val().rows(), queries.val().cols()));
  for (const DecoderLayerP& layer : layers) {
    // queries play the additive role of QE; self-attention values read the
    // previous layer output (zero ahead of the first layer).
    Var f_in = ops::add(stream, queries);
    Var f_sa = attention_block(t, layer.self, f_in, f_in, stream, f_in, training,
                               rng, nullptr);
    std::vector<Mat> captured;
    Var cross_q = fixed_cross_queries ? queries : f_sa;
    Var f_cr = attention_block(t, layer.cross, cross_q, mem_pe, mem, f_sa, training,
                               rng, attn ? &captured : nullptr);
    if (attn) attn->push_back(std::move(captured));
    stream = ffn_block(t, layer.ffn, f_cr, training, rng);
  }
  return stream;
}

PredictionVars Model::forward(Tape& t, const Mat& image, int img_h, int img_w,
                              bool training, std::mt19937_64& rng,
                              AttentionRecord* attn) const {
  if (img_h < 32 || img_w < 32)
    throw std::invalid_argument("image sides must be at least 32");
  if (image.rows() != 3 || image.cols() != Eigen::Index(img_h) * img_w)
    throw std::invalid_argument("image tensor must be (3, h*w)");

  // Backbone: convs downsample by 32 overall, then 1x1 projects to d.
  Var x = t.leaf(image);
  int h = img_h, w = img_w;
  for (size_t i = 0; i < convs_.size(); ++i) {
    const ConvP& conv = convs_[i];
    x = ops::conv2d(x, t.param(*conv.w), t.param(*conv.b), conv.c_in, h, w, conv.k,
                    conv.k, conv.stride, conv.pad);
    h = conv_out(h, conv.stride);
    w = conv_out(w, conv.stride);
    if (i + 1 < convs_.size()) x = ops::relu(x);
  }
  Var feat = ops::transpose(x);  // (h*w, d)

  Var pe = t.leaf(positional_encoding(h, w, cfg_.hidden_dim));
  Var mem = feat;
  for (const EncoderLayerP& layer : encoder_) {
    Var qk = ops::add(mem, pe);
    Var f_attn = attention_block(t, layer.self, qk, qk, mem, mem, training, rng,
                                 nullptr);
    mem = ffn_block(t, layer.ffn, f_attn, training, rng);
  }
  Var mem_pe = ops::add(mem, pe);

  Var qe = t.param(*qe_);
  Var f_op = decoder_stack(t, pair_, qe, mem, mem_pe, false, training, rng,
                           attn ? &attn->pair : nullptr);
  Var f_d = f_op, f_o = f_op;
  if (!cfg_.single_decoder) {
    // The pair embeddings stay fixed as cross-attention queries of both
    // relationship decoders; layers communicate through the residual stream.
    f_d = decoder_stack(t, dist_, f_op, mem, mem_pe, true, training, rng,
                        attn ? &attn->distance : nullptr);
    f_o = decoder_stack(t, occl_, f_op, mem, mem_pe, true, training, rng,
                        attn ? &attn->occlusion : nullptr);
  }

  PredictionVars out;
  out.p_a = ops::softmax_rows(run_mlp(t, head_class_a_, f_op));
  out.p_b = ops::softmax_rows(run_mlp(t, head_class_b_, f_op));
  out.box_a = ops::sigmoid(run_mlp(t, head_box_a_, f_op));
  out.box_b = ops::sigmoid(run_mlp(t, head_box_b_, f_op));
  out.p_d = ops::softmax_rows(run_mlp(t, head_distance_, f_d));
  out.p_o = ops::softmax_rows(run_mlp(t, head_occlusion_, f_o));
  if (cfg_.git_enabled) out.box_int = ops::sigmoid(run_mlp(t, head_git_, f_o));
  return out;
}

PredictionSet Model::predict(const Mat& image, int img_h, int img_w,
                             AttentionRecord* attn) const {
  Tape tape;
  std::mt19937_64 rng(0);
  PredictionVars v = forward(tape, image, img_h, img_w, false, rng, attn);
  PredictionSet p;
  p.p_a = v.p_a.val();
  p.p_b = v.p_b.val();
  p.box_a = v.box_a.val();
  p.box_b = v.box_b.val();
  p.p_d = v.p_d.val();
  p.p_o = v.p_o.val();
  if (cfg_.git_enabled) p.box_int = v.box_int.val();
  return p;
}

std::pair<int, int> Model::token_grid(int img_h, int img_w) const {
  int h = img_h, w = img_w;
  for (const ConvP& conv : convs_) {
    h = conv_out(h, conv.stride);
    w = conv_out(w, conv.stride);
  }
  return {h, w};
}

void Model::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  json tensors = json::array();
  for (const auto& p : params_.all())
    tensors.push_back(json{{"name", p->name},
                           {"rows", p->value.rows()},
                           {"cols", p->value.cols()}});
  json header{{"magic", "relocc-checkpoint"},
              {"version", 1},
              {"config", config_to_json_obj(cfg_)},
              {"tensors", tensors}};
  const std::string htext = header.dump();
  const uint64_t hsize = htext.size();
  out.write(reinterpret_cast<const char*>(&hsize), sizeof hsize);
  out.write(htext.data(), std::streamsize(htext.size()));
  for (const auto& p : params_.all())
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        const double v = p->value(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  if (!out) throw std::runtime_error("short write: " + path);
}

Model Model::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  uint64_t hsize = 0;
  in.read(reinterpret_cast<char*>(&hsize), sizeof hsize);
  if (!in || hsize > (1u << 20)) throw std::runtime_error("bad checkpoint header");
  std::string htext(hsize, '\0');
  in.read(htext.data(), std::streamsize(hsize));
  json header = json::parse(htext, nullptr, false);
  if (header.is_discarded() || header.value("magic", "") != "relocc-checkpoint" ||
      header.value("version", 0) != 1)
    throw std::runtime_error("not a checkpoint file: " + path);

  Model model(config_from_json_obj(header.at("config")), 0);
  const auto& tensors = header.at("tensors");
  const auto& stored = model.params_.all();
  if (tensors.size() != stored.size())
    throw std::runtime_error("checkpoint tensor count mismatch");
  for (size_t i = 0; i < stored.size(); ++i) {
    const auto& meta = tensors[i];
    Param& p = *stored[i];
    if (meta.at("name").get<std::string>() != p.name ||
        meta.at("rows").get<Eigen::Index>() != p.value.rows() ||
        meta.at("cols").get<Eigen::Index>() != p.value.cols())
      throw std::runtime_error("checkpoint tensor mismatch at " + p.name);
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        p.value(r, c) = v;
      }
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return model;
}

}  // namespace relocc
