#include "relocc/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "relocc/rng.hpp"

namespace relocc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kSchemaVersion = 1;

json box_to_json(const Box& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw std::invalid_argument("box must be a quadruple");
  return Box(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>())
      .clamped();
}

json pair_to_json(const PairAnnotation& p) {
  return json{{"box_a", box_to_json(p.box_a)},   {"box_b", box_to_json(p.box_b)},
              {"cat_a", p.cat_a},                {"cat_b", p.cat_b},
              {"distance", to_string(p.distance)},
              {"occlusion", to_string(p.occlusion)}};
}

PairAnnotation pair_from_json(const json& j) {
  PairAnnotation p;
  p.box_a = box_from_json(j.at("box_a"));
  p.box_b = box_from_json(j.at("box_b"));
  p.cat_a = j.at("cat_a").get<int>();
  p.cat_b = j.at("cat_b").get<int>();
  p.distance = distance_from_string(j.at("distance").get<std::string>());
  p.occlusion = occlusion_from_string(j.at("occlusion").get<std::string>());
  return p;
}

}  // namespace

std::string Dataset::image_path(const std::string& image_id) const {
  return (fs::path(dir) / "images" / (image_id + ".png")).string();
}

int Dataset::annotated_object_count(const ImageRecord& rec) {
  const int pairs = int(rec.pairs.size());
  const int n = int(std::lround((1.0 + std::sqrt(1.0 + 4.0 * pairs)) / 2.0));
  if (n * (n - 1) == pairs && pairs > 0) return n;
  std::vector<Box> boxes;
  for (const auto& p : rec.pairs) {
    for (const Box& b : {p.box_a, p.box_b}) {
      bool seen = false;
      for (const Box& q : boxes) seen = seen || q == b;
      if (!seen) boxes.push_back(b);
    }
  }
  return int(boxes.size());
}

Dataset synthesize_dataset(uint64_t seed, const GenConfig& cfg,
                           const SynthSplits& splits, const std::string& out_dir) {
  Dataset ds;
  ds.width = cfg.width;
  ds.height = cfg.height;
  ds.num_categories = cfg.num_categories;
  ds.dir = out_dir;
  fs::create_directories(fs::path(out_dir) / "images");

  const int total = splits.train + splits.val + splits.test;
  auto pair_rng = make_rng(seed, 0xda7a);
  for (int i = 0; i < total; ++i) {
    const std::string split =
        i < splits.train ? "train" : (i < splits.train + splits.val ? "val" : "test");
    Scene scene = generate_scene(mix_seed(seed, uint64_t(i) + 1), cfg);
    char id[16];
    std::snprintf(id, sizeof id, "%06d", i);
    ImageRecord rec;
    rec.image_id = id;
    rec.split = split;
    const int n = int(scene.objects.size());
    if (split == "train") {
      // One annotated ordered pair per training image.
      std::uniform_int_distribution<int> pick(0, n - 1);
      int a = pick(pair_rng);
      int b = pick(pair_rng);
      while (b == a) b = pick(pair_rng);
      rec.pairs.push_back(make_annotation(scene, a, b, cfg.same_band));
    } else {
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          if (a != b) rec.pairs.push_back(make_annotation(scene, a, b, cfg.same_band));
    }
    save_png(render_scene(scene), ds.image_path(rec.image_id));
    ds.records.push_back(std::move(rec));
  }
  export_dataset(ds);
  return ds;
}

void export_dataset(const Dataset& ds) {
  const fs::path path = fs::path(ds.dir) / "annotations.jsonl";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  json header{{"schema_version", kSchemaVersion},
              {"kind", "relocc-dataset"},
              {"width", ds.width},
              {"height", ds.height},
              {"num_categories", ds.num_categories}};
  out << header.dump() << "\n";
  for (const auto& rec : ds.records) {
    json pairs = json::array();
    for (const auto& p : rec.pairs) pairs.push_back(pair_to_json(p));
    json line{{"image_id", rec.image_id}, {"split", rec.split}, {"pairs", pairs}};
    out << line.dump() << "\n";
  }
}

Dataset load_dataset(const std::string& dir) {
  const fs::path path = fs::path(dir) / "annotations.jsonl";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Dataset ds;
  ds.dir = dir;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": malformed record: " + e.what());
    }
    try {
      if (line_no == 1) {
        if (j.at("kind").get<std::string>() != "relocc-dataset" ||
            j.at("schema_version").get<int>() != kSchemaVersion)
          throw std::runtime_error("unsupported schema");
        ds.width = j.at("width").get<int>();
        ds.height = j.at("height").get<int>();
        ds.num_categories = j.at("num_categories").get<int>();
        continue;
      }
      ImageRecord rec;
      rec.image_id = j.at("image_id").get<std::string>();
      rec.split = j.at("split").get<std::string>();
      for (const auto& pj : j.at("pairs")) rec.pairs.push_back(pair_from_json(pj));
      ds.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " +
                               e.what());
    }
  }
  if (line_no == 0) throw std::runtime_error(path.string() + ": empty file");
  return ds;
}

}  // namespace relocc
