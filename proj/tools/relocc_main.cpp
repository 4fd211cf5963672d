#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "relocc/dataset.hpp"
#include "relocc/evaluation.hpp"
#include "relocc/image.hpp"
#include "relocc/inference.hpp"
#include "relocc/model.hpp"
#include "relocc/rng.hpp"
#include "relocc/trainer.hpp"

namespace fs = std::filesystem;
using namespace relocc;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Full inference pass over one split: predict, suppress, keep the top
// min{n(n-1), N} pairs per image.
std::vector<ImagePredictions> predict_split(const Model& model, const Dataset& ds,
                                            const std::string& split,
                                            std::vector<ImageRecord>* gts) {
  std::vector<ImagePredictions> out;
  for (const auto& rec : ds.records) {
    if (rec.split != split) continue;
    Image img = load_png(ds.image_path(rec.image_id));
    PredictionSet ps = model.predict(image_to_tensor(img), img.height, img.width);
    auto kept = select_for_eval(nms(materialize(ps)),
                                Dataset::annotated_object_count(rec));
    out.push_back({rec.image_id, std::move(kept)});
    if (gts) gts->push_back(rec);
  }
  if (out.empty())
    throw std::runtime_error("dataset has no records in split '" + split + "'");
  return out;
}

struct SynthArgs {
  uint64_t seed = 0;
  int count = 100, val = 0, test = 0;
  std::string out;
  GenConfig gen;
};

int run_synth(const SynthArgs& a) {
  Dataset ds = synthesize_dataset(a.seed, a.gen, {a.count, a.val, a.test}, a.out);
  std::cout << "wrote " << ds.records.size() << " images (" << a.count
            << " train, " << a.val << " val, " << a.test << " test) to "
            << ds.dir << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, out, config_path, model_config_path;
  TrainConfig tc;
  ModelConfig mc;
  bool git = true, pini = false, single = false, no_augment = false;
};

int run_train(const TrainArgs& a, const CLI::App& cmd) {
  Dataset ds = load_dataset(a.data);

  TrainConfig tc;
  if (!a.config_path.empty()) tc = train_config_from_json(read_text(a.config_path));
  auto set = [&cmd](const std::string& flag) { return cmd.count(flag) > 0; };
  if (set("--seed")) tc.seed = a.tc.seed;
  if (set("--epochs")) tc.epochs = a.tc.epochs;
  if (set("--batch-size")) tc.batch_size = a.tc.batch_size;
  if (set("--lr")) tc.base_lr = a.tc.base_lr;
  if (set("--drop-lr")) tc.drop_lr = a.tc.drop_lr;
  if (set("--drop-epoch")) tc.drop_epoch = a.tc.drop_epoch;
  if (set("--eval-every")) tc.eval_every = a.tc.eval_every;
  if (set("--checkpoint-every")) tc.checkpoint_every = a.tc.checkpoint_every;
  if (a.no_augment) tc.augment = false;
  tc.out_dir = a.out;

  ModelConfig mc;
  if (!a.model_config_path.empty())
    mc = ModelConfig::from_json(read_text(a.model_config_path));
  mc.image_h = ds.height;
  mc.image_w = ds.width;
  mc.num_classes = ds.num_categories;
  if (set("--hidden-dim")) mc.hidden_dim = a.mc.hidden_dim;
  if (set("--backbone-channels")) mc.backbone_channels = a.mc.backbone_channels;
  if (set("--encoder-layers")) mc.encoder_layers = a.mc.encoder_layers;
  if (set("--heads")) mc.num_heads = a.mc.num_heads;
  if (set("--queries")) mc.num_queries = a.mc.num_queries;
  if (set("--ffn-hidden")) mc.ffn_hidden = a.mc.ffn_hidden;
  if (set("--dropout")) mc.dropout = a.mc.dropout;
  if (set("--layers-pair")) mc.pair_layers = a.mc.pair_layers;
  if (set("--layers-dist")) mc.distance_layers = a.mc.distance_layers;
  if (set("--layers-occl")) mc.occlusion_layers = a.mc.occlusion_layers;
  if (set("--git") || set("--no-git")) mc.git_enabled = a.git;
  if (set("--pini") || set("--no-pini")) mc.pini_enabled = a.pini;
  if (a.single) mc.single_decoder = true;
  mc.validate();

  fs::create_directories(a.out);
  write_text((fs::path(a.out) / "train_config.json").string(),
             train_config_to_json(tc));
  write_text((fs::path(a.out) / "model_config.json").string(), mc.to_json());

  Model model(mc, mix_seed(tc.seed, 1));
  TrainResult res = train(model, ds, tc);
  const EpochStats& last = res.epochs.back();
  std::cout << "trained " << res.epochs.size() << " epochs, final loss "
            << last.loss;
  if (last.has_val)
    std::cout << ", val F1 distance " << last.val_f1_distance << " occlusion "
              << last.val_f1_occlusion;
  std::cout << "\ncheckpoint: " << res.final_checkpoint << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, report, split = "test", predictions;
  double good_iou = 0.6;
};

int run_eval(const EvalArgs& a) {
  Model model = Model::load(a.checkpoint);
  Dataset ds = load_dataset(a.data);
  std::vector<ImageRecord> gts;
  auto preds = predict_split(model, ds, a.split, &gts);

  Metrics m = evaluate(preds, gts);
  GoodDetectionTable table = good_detection_precision(preds, gts, a.good_iou);
  write_text(a.report, metrics_report(m, &table));
  if (!a.predictions.empty())
    save_predictions(preds, ds.width, ds.height, ds.num_categories, a.predictions);

  std::cout << "split " << a.split << ": " << preds.size() << " images\n"
            << "distance  P " << m.distance.precision() << "  R "
            << m.distance.recall() << "  F1 " << m.distance.f1() << "\n"
            << "occlusion P " << m.occlusion.precision() << "  R "
            << m.occlusion.recall() << "  F1 " << m.occlusion.f1() << "\n"
            << "report: " << a.report << "\n";
  return 0;
}

struct InferArgs {
  std::string checkpoint, image, out;
  int top = 5;
};

int run_infer(const InferArgs& a) {
  Model model = Model::load(a.checkpoint);
  Image img = load_png(a.image);
  PredictionSet ps = model.predict(image_to_tensor(img), img.height, img.width);
  auto ranked = sorted_for_viz(nms(materialize(ps)));
  if (int(ranked.size()) > a.top) ranked.resize(std::size_t(a.top));

  fs::create_directories(a.out);
  std::string stem = fs::path(a.image).stem().string();
  save_predictions({{stem, ranked}}, img.width, img.height,
                   model.config().num_classes,
                   (fs::path(a.out) / "predictions.jsonl").string());

  for (size_t i = 0; i < ranked.size(); ++i) {
    const auto& p = ranked[i];
    Image canvas = img;
    canvas.draw_rect_outline(p.box_a, {40, 220, 40});
    canvas.draw_rect_outline(p.box_b, {240, 80, 40});
    if (p.has_int) canvas.draw_rect_outline(p.box_int, {250, 220, 40});
    char name[32];
    std::snprintf(name, sizeof name, "pair_%02zu.png", i);
    save_png(canvas, (fs::path(a.out) / name).string());
    std::cout << name << "  query " << p.query << "  conf " << p.confidence
              << "  cat " << p.cat_a << " vs " << p.cat_b << "  "
              << to_string(p.distance) << "  " << to_string(p.occlusion) << "\n";
  }
  std::cout << "wrote " << ranked.size() << " pairs to " << a.out << "\n";
  return 0;
}

struct VizArgs {
  std::string checkpoint, image, out, decoder = "pair";
  int query = 0, layer = -1, head = -1;
};

int run_viz(const VizArgs& a) {
  Model model = Model::load(a.checkpoint);
  Image img = load_png(a.image);
  AttentionRecord attn;
  model.predict(image_to_tensor(img), img.height, img.width, &attn);

  const std::vector<std::vector<Mat>>* stack = nullptr;
  if (a.decoder == "pair") stack = &attn.pair;
  else if (a.decoder == "distance") stack = &attn.distance;
  else if (a.decoder == "occlusion") stack = &attn.occlusion;
  else throw std::runtime_error("unknown decoder '" + a.decoder + "'");
  if (stack->empty())
    throw std::runtime_error("checkpoint has no " + a.decoder +
                             " decoder (single-decoder model)");

  int layer = a.layer < 0 ? int(stack->size()) - 1 : a.layer;
  if (layer >= int(stack->size()))
    throw std::runtime_error("layer out of range (decoder has " +
                             std::to_string(stack->size()) + " layers)");
  const auto& heads = (*stack)[std::size_t(layer)];
  if (a.query < 0 || a.query >= int(heads[0].rows()))
    throw std::runtime_error("query out of range (model has " +
                             std::to_string(heads[0].rows()) + " queries)");
  if (a.head >= int(heads.size()))
    throw std::runtime_error("head out of range (model has " +
                             std::to_string(heads.size()) + " heads)");

  auto [th, tw] = model.token_grid(img.height, img.width);
  auto render = [&](int h, const std::string& path) {
    Mat grid(th, tw);
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x)
        grid(y, x) = heads[std::size_t(h)](a.query, y * tw + x);
    double peak = grid.maxCoeff();
    if (peak > 0) grid /= peak;  // display scale: peak attention maps to full red
    Image canvas = img;
    overlay_heatmap(canvas, upsample_bilinear(grid, img.height, img.width));
    save_png(canvas, path);
    std::cout << path << "\n";
  };

  if (a.head >= 0) {
    render(a.head, a.out);
  } else {
    fs::create_directories(a.out);
    for (size_t h = 0; h < heads.size(); ++h) {
      char name[32];
      std::snprintf(name, sizeof name, "head_%zu.png", h);
      render(int(h), (fs::path(a.out) / name).string());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relative occlusion and distance detection pipeline"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--seed", sa.seed, "generator seed");
  synth->add_option("--count", sa.count, "training images")->check(CLI::NonNegativeNumber);
  synth->add_option("--val", sa.val, "validation images")->check(CLI::NonNegativeNumber);
  synth->add_option("--test", sa.test, "test images")->check(CLI::NonNegativeNumber);
  synth->add_option("--out", sa.out, "output directory")->required();
  synth->add_option("--width", sa.gen.width, "image width");
  synth->add_option("--height", sa.gen.height, "image height");
  synth->add_option("--categories", sa.gen.num_categories, "object categories");
  synth->add_option("--min-objects", sa.gen.min_objects, "objects per scene, lower");
  synth->add_option("--max-objects", sa.gen.max_objects, "objects per scene, upper");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--data", ta.data, "dataset directory")->required();
  train_cmd->add_option("--out", ta.out, "run directory for checkpoints and logs")->required();
  train_cmd->add_option("--config", ta.config_path, "training config JSON; flags override");
  train_cmd->add_option("--model-config", ta.model_config_path, "model config JSON; flags override");
  train_cmd->add_option("--seed", ta.tc.seed, "training seed");
  train_cmd->add_option("--epochs", ta.tc.epochs, "epochs");
  train_cmd->add_option("--batch-size", ta.tc.batch_size, "images per step");
  train_cmd->add_option("--lr", ta.tc.base_lr, "base learning rate");
  train_cmd->add_option("--drop-lr", ta.tc.drop_lr, "late learning rate");
  train_cmd->add_option("--drop-epoch", ta.tc.drop_epoch, "first epoch at the late rate");
  train_cmd->add_option("--eval-every", ta.tc.eval_every, "epochs between validation passes");
  train_cmd->add_option("--checkpoint-every", ta.tc.checkpoint_every, "epochs between checkpoints");
  train_cmd->add_flag("--no-augment", ta.no_augment, "disable data augmentation");
  train_cmd->add_option("--hidden-dim", ta.mc.hidden_dim, "transformer width");
  train_cmd->add_option("--backbone-channels", ta.mc.backbone_channels, "backbone output channels");
  train_cmd->add_option("--encoder-layers", ta.mc.encoder_layers, "encoder layers");
  train_cmd->add_option("--heads", ta.mc.num_heads, "attention heads");
  train_cmd->add_option("--queries", ta.mc.num_queries, "object pair queries");
  train_cmd->add_option("--ffn-hidden", ta.mc.ffn_hidden, "feed-forward hidden width");
  train_cmd->add_option("--dropout", ta.mc.dropout, "dropout rate");
  train_cmd->add_option("--layers-pair", ta.mc.pair_layers, "object pair decoder layers");
  train_cmd->add_option("--layers-dist", ta.mc.distance_layers, "distance decoder layers");
  train_cmd->add_option("--layers-occl", ta.mc.occlusion_layers, "occlusion decoder layers");
  train_cmd->add_flag("--git,!--no-git", ta.git, "predict the generalized intersection box");
  train_cmd->add_flag("--pini,!--no-pini", ta.pini, "intersection loss only on truly intersecting pairs");
  train_cmd->add_flag("--single-decoder", ta.single, "one shared relationship decoder");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a dataset split");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "model file")->required();
  eval_cmd->add_option("--data", ea.data, "dataset directory")->required();
  eval_cmd->add_option("--report", ea.report, "metrics report JSON path")->required();
  eval_cmd->add_option("--split", ea.split, "dataset split (default test)");
  eval_cmd->add_option("--good-iou", ea.good_iou, "IoU gate for good-detection precision");
  eval_cmd->add_option("--predictions", ea.predictions, "also dump predictions JSONL here");

  InferArgs ia;
  auto* infer_cmd = app.add_subcommand("infer", "predict pairs for one image");
  infer_cmd->add_option("--checkpoint", ia.checkpoint, "model file")->required();
  infer_cmd->add_option("--image", ia.image, "input PNG")->required();
  infer_cmd->add_option("--out", ia.out, "output directory")->required();
  infer_cmd->add_option("--top", ia.top, "pairs to keep")->check(CLI::PositiveNumber);

  VizArgs va;
  auto* viz_cmd = app.add_subcommand("viz-attention", "render cross-attention heatmaps");
  viz_cmd->add_option("--checkpoint", va.checkpoint, "model file")->required();
  viz_cmd->add_option("--image", va.image, "input PNG")->required();
  viz_cmd->add_option("--query", va.query, "query index")->required();
  viz_cmd->add_option("--decoder", va.decoder, "pair | distance | occlusion");
  viz_cmd->add_option("--layer", va.layer, "decoder layer (default last)");
  viz_cmd->add_option("--head", va.head, "head index; omit to render every head");
  viz_cmd->add_option("--out", va.out, "PNG path, or directory when --head is omitted")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return run_synth(sa);
    if (*train_cmd) return run_train(ta, *train_cmd);
    if (*eval_cmd) return run_eval(ea);
    if (*infer_cmd) return run_infer(ia);
    if (*viz_cmd) return run_viz(va);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
