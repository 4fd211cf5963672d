#include "relocc/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "relocc/evaluation.hpp"
#include "relocc/inference.hpp"
#include "relocc/loss.hpp"
#include "relocc/rng.hpp"

namespace relocc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream tags keep shuffle, augmentation, and dropout draws independent.
std::mt19937_64 stream_rng(uint64_t seed, uint64_t epoch, uint64_t item, uint64_t tag) {
  return make_rng(seed, (epoch << 34) | (item << 2) | tag);
}

PredictionSet values_of(const PredictionVars& v) {
  PredictionSet s;
  s.p_a = v.p_a.val();
  s.p_b = v.p_b.val();
  s.box_a = v.box_a.val();
  s.box_b = v.box_b.val();
  s.p_d = v.p_d.val();
  s.p_o = v.p_o.val();
  if (v.box_int.tape != nullptr) s.box_int = v.box_int.val();
  return s;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) {
  json j{{"epochs", cfg.epochs},
         {"batch_size", cfg.batch_size},
         {"base_lr", cfg.base_lr},
         {"drop_lr", cfg.drop_lr},
         {"drop_epoch", cfg.drop_epoch},
         {"seed", cfg.seed},
         {"augment", cfg.augment},
         {"p_flip", cfg.p_flip},
         {"resize_min", cfg.resize_min},
         {"resize_max", cfg.resize_max},
         {"jitter_brightness", cfg.jitter_brightness},
         {"jitter_contrast", cfg.jitter_contrast},
         {"eval_every", cfg.eval_every},
         {"checkpoint_every", cfg.checkpoint_every},
         {"out_dir", cfg.out_dir},
         {"weights",
          {{"beta_c", cfg.weights.beta_c},
           {"beta_r", cfg.weights.beta_r},
           {"alpha_a", cfg.weights.alpha_a},
           {"alpha_b", cfg.weights.alpha_b},
           {"alpha_d", cfg.weights.alpha_d},
           {"alpha_o", cfg.weights.alpha_o},
           {"alpha_l1", cfg.weights.alpha_l1},
           {"alpha_giou", cfg.weights.alpha_giou},
           {"alpha_eos", cfg.weights.alpha_eos}}},
         {"adam",
          {{"beta1", cfg.adam.beta1},
           {"beta2", cfg.adam.beta2},
           {"eps", cfg.adam.eps},
           {"clip_norm", cfg.adam.clip_norm}}}};
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.base_lr = j.value("base_lr", c.base_lr);
  c.drop_lr = j.value("drop_lr", c.drop_lr);
  c.drop_epoch = j.value("drop_epoch", c.drop_epoch);
  c.seed = j.value("seed", c.seed);
  c.augment = j.value("augment", c.augment);
  c.p_flip = j.value("p_flip", c.p_flip);
  c.resize_min = j.value("resize_min", c.resize_min);
  c.resize_max = j.value("resize_max", c.resize_max);
  c.jitter_brightness = j.value("jitter_brightness", c.jitter_brightness);
  c.jitter_contrast = j.value("jitter_contrast", c.jitter_contrast);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    c.weights.beta_c = w.value("beta_c", c.weights.beta_c);
    c.weights.beta_r = w.value("beta_r", c.weights.beta_r);
    c.weights.alpha_a = w.value("alpha_a", c.weights.alpha_a);
    c.weights.alpha_b = w.value("alpha_b", c.weights.alpha_b);
    c.weights.alpha_d = w.value("alpha_d", c.weights.alpha_d);
    c.weights.alpha_o = w.value("alpha_o", c.weights.alpha_o);
    c.weights.alpha_l1 = w.value("alpha_l1", c.weights.alpha_l1);
    c.weights.alpha_giou = w.value("alpha_giou", c.weights.alpha_giou);
    c.weights.alpha_eos = w.value("alpha_eos", c.weights.alpha_eos);
  }
  if (j.contains("adam")) {
    const json& a = j.at("adam");
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.eps = a.value("eps", c.adam.eps);
    c.adam.clip_norm = a.value("clip_norm", c.adam.clip_norm);
  }
  return c;
}

double lr_schedule(const TrainConfig& cfg, int epoch) {
  return epoch < cfg.drop_epoch ? cfg.base_lr : cfg.drop_lr;
}

Sample hflip_sample(const Sample& s) {
  Sample out;
  out.image = Image(s.image.width, s.image.height);
  for (int y = 0; y < s.image.height; ++y)
    for (int x = 0; x < s.image.width; ++x) {
      const uint8_t* px = s.image.at(s.image.width - 1 - x, y);
      uint8_t* q = out.image.at(x, y);
      q[0] = px[0];
      q[1] = px[1];
      q[2] = px[2];
    }
  out.pairs = s.pairs;
  for (PairAnnotation& p : out.pairs) {
    p.box_a = Box(1.0 - p.box_a.x_max, p.box_a.y_min, 1.0 - p.box_a.x_min,
                  p.box_a.y_max);
    p.box_b = Box(1.0 - p.box_b.x_max, p.box_b.y_min, 1.0 - p.box_b.x_min,
                  p.box_b.y_max);
  }
  return out;
}

Sample resize_sample(const Sample& s, double scale) {
  const int w = std::max(32, int(std::lround(s.image.width * scale)));
  const int h = std::max(32, int(std::lround(s.image.height * scale)));
  return {resize_image(s.image, w, h), s.pairs};
}

void photometric_jitter(Image& img, double brightness, double contrast) {
  for (uint8_t& v : img.rgb) {
    double x = (double(v) - 127.5) * contrast + 127.5 + brightness * 255.0;
    v = uint8_t(std::clamp(std::lround(x), 0L, 255L));
  }
}

Sample augment_sample(const Sample& s, const TrainConfig& cfg,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Sample out = s;
  if (U(rng) < cfg.p_flip) out = hflip_sample(out);
  double scale =
      cfg.resize_min + (cfg.resize_max - cfg.resize_min) * U(rng);
  out = resize_sample(out, scale);
  double b = (2.0 * U(rng) - 1.0) * cfg.jitter_brightness;
  double c = 1.0 + (2.0 * U(rng) - 1.0) * cfg.jitter_contrast;
  photometric_jitter(out.image, b, c);
  return out;
}

std::pair<double, double> validate(const Model& model, const Dataset& data,
                                   const std::string& split) {
  std::vector<ImageRecord> gts;
  std::vector<ImagePredictions> preds;
  for (const ImageRecord& rec : data.records) {
    if (rec.split != split) continue;
    gts.push_back(rec);
    Image img = load_png(data.image_path(rec.image_id));
    PredictionSet ps = model.predict(image_to_tensor(img), img.height, img.width);
    auto kept = nms(materialize(ps));
    auto sel = select_for_eval(kept, Dataset::annotated_object_count(rec));
    preds.push_back({rec.image_id, std::move(sel)});
  }
  if (gts.empty()) throw std::invalid_argument("validate: no records in split " + split);
  Metrics m = evaluate(preds, gts);
  return {m.distance.f1(), m.occlusion.f1()};
}

TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch_size < 1)
    throw std::invalid_argument("train: bad epochs or batch size");
  const ModelConfig& mc = model.config();

  std::vector<const ImageRecord*> recs;
  for (const ImageRecord& r : data.records)
    if (r.split == "train") recs.push_back(&r);
  if (recs.empty()) throw std::invalid_argument("train: no training records");

  std::vector<Image> images;
  images.reserve(recs.size());
  for (const ImageRecord* r : recs)
    images.push_back(load_png(data.image_path(r->image_id)));

  std::ofstream log;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    log.open((fs::path(cfg.out_dir) / "train_log.jsonl").string());
    if (!log) throw std::runtime_error("cannot write training log in " + cfg.out_dir);
  }

  AdamConfig adam = cfg.adam;
  int64_t step = 0;
  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    adam.lr = lr_schedule(cfg, epoch);

    std::vector<std::size_t> order(recs.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    auto shuffle_rng = stream_rng(cfg.seed, uint64_t(epoch), 0, 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochStats st;
    st.epoch = epoch;
    st.lr = adam.lr;
    double grad_norm_sum = 0.0;
    int batches = 0;

    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(cfg.batch_size));
      const double inv_batch = 1.0 / double(stop - start);
      model.params().zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        Sample s{images[i], recs[i]->pairs};
        if (cfg.augment) {
          auto arng = stream_rng(cfg.seed, uint64_t(epoch), uint64_t(i), 1);
          s = augment_sample(s, cfg, arng);
        }
        auto drng = stream_rng(cfg.seed, uint64_t(epoch), uint64_t(i), 2);
        Tape tape;
        auto pv = model.forward(tape, image_to_tensor(s.image), s.image.height,
                                s.image.width, true, drng);
        PredictionSet ps = values_of(pv);
        if (!ps.p_a.allFinite() || !ps.p_d.allFinite() || !ps.box_a.allFinite()) {
          throw std::runtime_error("training diverged: epoch " +
                                   std::to_string(epoch) + ", image " +
                                   recs[i]->image_id + ": non-finite head outputs");
        }
        auto assign = hungarian_match(s.pairs, ps, cfg.weights, mc.git_enabled,
                                      mc.pini_enabled);
        auto matched = to_matched(s.pairs, assign);
        Var lc = classification_loss(tape, pv, matched, cfg.weights);
        Var lreg = regression_loss(tape, pv, matched, cfg.weights, mc.git_enabled,
                                   mc.pini_enabled);
        Var lt = ops::weighted_sum({lc, lreg}, {cfg.weights.beta_c, cfg.weights.beta_r});
        const double total = lt.val()(0, 0);
        if (!std::isfinite(total)) {
          throw std::runtime_error(
              "training diverged: epoch " + std::to_string(epoch) + ", image " +
              recs[i]->image_id + ", loss " + std::to_string(total) +
              " (class " + std::to_string(lc.val()(0, 0)) + ", reg " +
              std::to_string(lreg.val()(0, 0)) + ")");
        }
        tape.backward(lt, inv_batch);

        double reg_total = lreg.val()(0, 0);
        double reg_obj = reg_total;
        if (mc.git_enabled) {
          Var lab = regression_loss(tape, pv, matched, cfg.weights, false, false);
          reg_obj = lab.val()(0, 0);
        }
        st.loss += total;
        st.loss_class += lc.val()(0, 0);
        st.loss_reg += reg_obj;
        st.loss_int += reg_total - reg_obj;
        st.match_cost += assign.total_cost;
      }
      grad_norm_sum += adam_step(model.params(), adam, ++step);
      ++batches;
    }

    const double n = double(order.size());
    st.loss /= n;
    st.loss_class /= n;
    st.loss_reg /= n;
    st.loss_int /= n;
    st.match_cost /= n;
    st.grad_norm = batches > 0 ? grad_norm_sum / batches : 0.0;

    const bool last = epoch + 1 == cfg.epochs;
    if (cfg.eval_every > 0 && (last || (epoch + 1) % cfg.eval_every == 0)) {
      bool has_val = std::any_of(data.records.begin(), data.records.end(),
                                 [](const ImageRecord& r) { return r.split == "val"; });
      if (has_val) {
        auto [fd, fo] = validate(model, data, "val");
        st.val_f1_distance = fd;
        st.val_f1_occlusion = fo;
        st.has_val = true;
      }
    }
    st.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (log) {
      json j{{"epoch", st.epoch},
             {"lr", st.lr},
             {"loss", st.loss},
             {"loss_class", st.loss_class},
             {"loss_reg", st.loss_reg},
             {"match_cost", st.match_cost},
             {"grad_norm", st.grad_norm},
             {"seconds", st.seconds}};
      if (mc.git_enabled) j["loss_int_box"] = st.loss_int;
      if (st.has_val) {
        j["val_f1_distance"] = st.val_f1_distance;
        j["val_f1_occlusion"] = st.val_f1_occlusion;
      }
      log << j.dump() << '\n';
      log.flush();
    }
    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0 && !last) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d.bin", epoch + 1);
      model.save((fs::path(cfg.out_dir) / name).string());
    }
    result.epochs.push_back(st);
  }

  if (!cfg.out_dir.empty()) {
    result.final_checkpoint = (fs::path(cfg.out_dir) / "model.bin").string();
    model.save(result.final_checkpoint);
  }
  return result;
}

}  // namespace relocc
