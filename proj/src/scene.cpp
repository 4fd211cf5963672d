#include "relocc/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "relocc/rng.hpp"

namespace relocc {

std::string to_string(DistanceClass d) {
  switch (d) {
    case DistanceClass::a_closer: return "a_closer";
    case DistanceClass::b_closer: return "b_closer";
    case DistanceClass::same: return "same";
    case DistanceClass::not_sure: return "not_sure";
  }
  throw std::invalid_argument("bad distance class");
}

std::string to_string(OcclusionClass o) {
  switch (o) {
    case OcclusionClass::a_occludes_b: return "a_occludes_b";
    case OcclusionClass::b_occludes_a: return "b_occludes_a";
    case OcclusionClass::none: return "none";
    case OcclusionClass::mutual: return "mutual";
  }
  throw std::invalid_argument("bad occlusion class");
}

DistanceClass distance_from_string(const std::string& s) {
  if (s == "a_closer") return DistanceClass::a_closer;
  if (s == "b_closer") return DistanceClass::b_closer;
  if (s == "same") return DistanceClass::same;
  if (s == "not_sure") return DistanceClass::not_sure;
  throw std::invalid_argument("bad distance class: " + s);
}

OcclusionClass occlusion_from_string(const std::string& s) {
  if (s == "a_occludes_b") return OcclusionClass::a_occludes_b;
  if (s == "b_occludes_a") return OcclusionClass::b_occludes_a;
  if (s == "none") return OcclusionClass::none;
  if (s == "mutual") return OcclusionClass::mutual;
  throw std::invalid_argument("bad occlusion class: " + s);
}

DistanceClass converse(DistanceClass d) {
  switch (d) {
    case DistanceClass::a_closer: return DistanceClass::b_closer;
    case DistanceClass::b_closer: return DistanceClass::a_closer;
    default: return d;
  }
}

OcclusionClass converse(OcclusionClass o) {
  switch (o) {
    case OcclusionClass::a_occludes_b: return OcclusionClass::b_occludes_a;
    case OcclusionClass::b_occludes_a: return OcclusionClass::a_occludes_b;
    default: return o;
  }
}

Box SceneObject::bounds(int width, int height) const {
  int x0 = parts[0].x0, y0 = parts[0].y0, x1 = parts[0].x1, y1 = parts[0].y1;
  for (const ScenePart& p : parts) {
    x0 = std::min(x0, p.x0);
    y0 = std::min(y0, p.y0);
    x1 = std::max(x1, p.x1);
    y1 = std::max(y1, p.y1);
  }
  return Box(double(x0) / width, double(y0) / height, double(x1) / width,
             double(y1) / height);
}

int Scene::visible_pixels(int object_index) const {
  int n = 0;
  for (int v : owner_object) n += v == object_index;
  return n;
}

namespace {

void rebuild_owner(Scene& s) {
  s.owner_object.assign(size_t(s.width) * s.height, -1);
  s.owner_part.assign(size_t(s.width) * s.height, -1);
  std::vector<double> zbuf(size_t(s.width) * s.height,
                           std::numeric_limits<double>::infinity());
  for (int oi = 0; oi < int(s.objects.size()); ++oi) {
    const auto& parts = s.objects[oi].parts;
    for (int pi = 0; pi < int(parts.size()); ++pi) {
      const ScenePart& p = parts[pi];
      for (int y = std::max(0, p.y0); y < std::min(s.height, p.y1); ++y)
        for (int x = std::max(0, p.x0); x < std::min(s.width, p.x1); ++x) {
          const size_t idx = size_t(y) * s.width + x;
          if (p.depth < zbuf[idx]) {
            zbuf[idx] = p.depth;
            s.owner_object[idx] = oi;
            s.owner_part[idx] = pi;
          }
        }
    }
  }
}

void refresh_distances(Scene& s) {
  for (auto& o : s.objects) {
    o.object_distance = o.parts[0].depth;
    for (const auto& p : o.parts)
      o.object_distance = std::min(o.object_distance, p.depth);
  }
}

// Part depths must be pairwise distinct across the scene; nudges collisions
// upward by amounts far below the same-distance band.
void make_depths_distinct(Scene& s) {
  std::vector<double*> depths;
  for (auto& o : s.objects)
    for (auto& p : o.parts) depths.push_back(&p.depth);
  std::sort(depths.begin(), depths.end(),
            [](double* a, double* b) { return *a < *b; });
  for (size_t i = 1; i < depths.size(); ++i)
    if (*depths[i] <= *depths[i - 1]) *depths[i] = *depths[i - 1] + 1e-7;
}

int part_pixel_area(const SceneObject& o, int width, int height) {
  // Pixels covered by at least one part (parts of one object may overlap).
  int x0 = width, y0 = height, x1 = 0, y1 = 0;
  for (const auto& p : o.parts) {
    x0 = std::min(x0, std::max(0, p.x0));
    y0 = std::min(y0, std::max(0, p.y0));
    x1 = std::max(x1, std::min(width, p.x1));
    y1 = std::max(y1, std::min(height, p.y1));
  }
  int n = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (const auto& p : o.parts)
        if (p.contains(x, y)) {
          ++n;
          break;
        }
  return n;
}

struct Sampler {
  std::mt19937_64 rng;
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  int uniform_int(int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng); }
};

ScenePart sample_part_rect(Sampler& s, const GenConfig& cfg, int cx, int cy) {
  const double base = std::min(cfg.width, cfg.height);
  const int w = std::max(4, int(std::lround(s.uniform(cfg.min_size, cfg.max_size) *
                                            base * s.uniform(0.75, 1.3))));
  const int h = std::max(4, int(std::lround(s.uniform(cfg.min_size, cfg.max_size) *
                                            base * s.uniform(0.75, 1.3))));
  ScenePart p;
  p.x0 = std::clamp(cx - w / 2, 0, cfg.width - 4);
  p.y0 = std::clamp(cy - h / 2, 0, cfg.height - 4);
  p.x1 = std::min(cfg.width, p.x0 + w);
  p.y1 = std::min(cfg.height, p.y0 + h);
  return p;
}

// Two objects interlocked in depth: a's near part covers b's left edge, a's
// far part slides under b's right edge. Guarantees a mutual pair.
void place_tangle(Sampler& s, const GenConfig& cfg, Scene& scene) {
  const double base = std::min(cfg.width, cfg.height);
  const int bw = int(std::lround(s.uniform(cfg.min_size * 1.2, cfg.max_size) * base));
  const int bh = int(std::lround(s.uniform(cfg.min_size * 1.2, cfg.max_size) * base));
  const int bx0 = s.uniform_int(
      cfg.width / 5, std::max(cfg.width / 5, cfg.width - cfg.width / 5 - bw));
  const int by0 = s.uniform_int(
      cfg.height / 5, std::max(cfg.height / 5, cfg.height - cfg.height / 5 - bh));
  const double zb = s.uniform(cfg.depth_min + 0.3, cfg.depth_max - 0.3);

  SceneObject b;
  b.category = s.uniform_int(0, cfg.num_categories - 1);
  b.parts.push_back({bx0, by0, bx0 + bw, by0 + bh, zb});

  // Flanking parts of a share a vertical band crossing b.
  const int ah = std::max(6, int(std::lround(bh * s.uniform(0.45, 0.8))));
  const int ay0 = std::clamp(by0 + s.uniform_int(-ah / 3, bh - ah + ah / 3), 0,
                             cfg.height - ah);
  const int aw1 = std::max(6, int(std::lround(bw * s.uniform(0.35, 0.6))));
  const int aw2 = std::max(6, int(std::lround(bw * s.uniform(0.35, 0.6))));
  const int overlap1 = std::max(2, int(std::lround(bw * s.uniform(0.15, 0.35))));
  const int overlap2 = std::max(2, int(std::lround(bw * s.uniform(0.15, 0.35))));

  SceneObject a;
  a.category = s.uniform_int(0, cfg.num_categories - 1);
  ScenePart near_part;
  near_part.x0 = std::max(0, bx0 + overlap1 - aw1);
  near_part.x1 = bx0 + overlap1;
  near_part.y0 = ay0;
  near_part.y1 = ay0 + ah;
  near_part.depth = std::max(cfg.depth_min, zb - s.uniform(0.1, 0.25));
  ScenePart far_part;
  far_part.x0 = bx0 + bw - overlap2;
  far_part.x1 = std::min(cfg.width, bx0 + bw - overlap2 + aw2);
  far_part.y0 = ay0;
  far_part.y1 = ay0 + ah;
  far_part.depth = std::min(cfg.depth_max, zb + s.uniform(0.1, 0.25));
  a.parts.push_back(near_part);
  a.parts.push_back(far_part);

  scene.objects.push_back(std::move(a));
  scene.objects.push_back(std::move(b));
}

Scene try_generate(uint64_t seed, uint64_t attempt, const GenConfig& cfg) {
  Sampler s{make_rng(seed, attempt)};
  Scene scene;
  scene.width = cfg.width;
  scene.height = cfg.height;
  scene.seed = seed;
  scene.num_categories = cfg.num_categories;
  scene.depth_min = cfg.depth_min;
  scene.depth_max = cfg.depth_max;

  const int n_objects = s.uniform_int(cfg.min_objects, cfg.max_objects);
  const bool tangle = n_objects >= 2 && s.chance(cfg.p_tangle);
  if (tangle) place_tangle(s, cfg, scene);

  // Remaining objects drop near jittered grid anchors to spread them out.
  std::vector<std::pair<int, int>> anchors;
  for (int gy = 0; gy < 2; ++gy)
    for (int gx = 0; gx < 2; ++gx)
      anchors.push_back({cfg.width / 4 + gx * cfg.width / 2,
                         cfg.height / 4 + gy * cfg.height / 2});
  std::shuffle(anchors.begin(), anchors.end(), s.rng);

  while (int(scene.objects.size()) < n_objects) {
    const auto [ax, ay] = anchors[scene.objects.size() % anchors.size()];
    const int cx = std::clamp(ax + s.uniform_int(-cfg.width / 6, cfg.width / 6), 4,
                              cfg.width - 4);
    const int cy = std::clamp(ay + s.uniform_int(-cfg.height / 6, cfg.height / 6), 4,
                              cfg.height - 4);
    SceneObject o;
    o.category = s.uniform_int(0, cfg.num_categories - 1);
    double z = s.uniform(cfg.depth_min, cfg.depth_max);
    if (!scene.objects.empty() && s.chance(cfg.p_same)) {
      const auto& ref = scene.objects[size_t(
          s.uniform_int(0, int(scene.objects.size()) - 1))];
      double ref_d = ref.parts[0].depth;
      for (const auto& p : ref.parts) ref_d = std::min(ref_d, p.depth);
      z = std::clamp(ref_d * (1.0 + s.uniform(-0.8, 0.8) * cfg.same_band),
                     cfg.depth_min, cfg.depth_max);
    }
    ScenePart main = sample_part_rect(s, cfg, cx, cy);
    main.depth = z;
    o.parts.push_back(main);
    if (s.chance(cfg.p_extra_part)) {
      // Attached lobe: overlaps the main rect, slightly behind it.
      ScenePart lobe = sample_part_rect(
          s, cfg, (main.x0 + main.x1) / 2 + s.uniform_int(-main.x1 + main.x0, main.x1 - main.x0) / 2,
          (main.y0 + main.y1) / 2 + s.uniform_int(-main.y1 + main.y0, main.y1 - main.y0) / 2);
      lobe.depth = z + s.uniform(0.01, 0.08);
      o.parts.push_back(lobe);
    }
    scene.objects.push_back(std::move(o));
  }

  make_depths_distinct(scene);
  refresh_distances(scene);
  rebuild_owner(scene);
  return scene;
}

}  // namespace

Scene generate_scene(uint64_t seed, const GenConfig& cfg) {
  for (uint64_t attempt = 0; attempt < 64; ++attempt) {
    Scene scene = try_generate(seed, attempt, cfg);
    bool ok = true;
    for (int i = 0; i < int(scene.objects.size()) && ok; ++i) {
      const int visible = scene.visible_pixels(i);
      const int area = part_pixel_area(scene.objects[i], scene.width, scene.height);
      if (visible == 0 || visible < int(cfg.min_visible_fraction * area)) ok = false;
    }
    if (ok) return scene;
  }
  throw std::runtime_error("scene generation kept producing hidden objects");
}

OcclusionClass occlusion_label(const Scene& s, int i, int j) {
  if (i == j) throw std::invalid_argument("occlusion_label: i == j");
  bool a_over_b = false, b_over_a = false;
  for (const ScenePart& pa : s.objects[i].parts)
    for (const ScenePart& pb : s.objects[j].parts) {
      if (!pa.intersects(pb)) continue;
      if (pa.depth < pb.depth)
        a_over_b = true;
      else
        b_over_a = true;
    }
  if (a_over_b && b_over_a) return OcclusionClass::mutual;
  if (a_over_b) return OcclusionClass::a_occludes_b;
  if (b_over_a) return OcclusionClass::b_occludes_a;
  return OcclusionClass::none;
}

DistanceClass distance_label(const Scene& s, int i, int j, double eps) {
  if (i == j) throw std::invalid_argument("distance_label: i == j");
  const double di = s.objects[i].object_distance;
  const double dj = s.objects[j].object_distance;
  if (std::abs(di - dj) <= eps * std::max(di, dj)) return DistanceClass::same;
  return di < dj ? DistanceClass::a_closer : DistanceClass::b_closer;
}

PairAnnotation make_annotation(const Scene& s, int i, int j, double eps) {
  PairAnnotation ann;
  ann.box_a = s.objects[i].bounds(s.width, s.height);
  ann.box_b = s.objects[j].bounds(s.width, s.height);
  ann.cat_a = s.objects[i].category;
  ann.cat_b = s.objects[j].category;
  ann.distance = distance_label(s, i, j, eps);
  ann.occlusion = occlusion_label(s, i, j);
  return ann;
}

std::array<uint8_t, 3> category_color(int category, int num_categories,
                                      double depth, double depth_min,
                                      double depth_max) {
  const double hue = 360.0 * category / std::max(1, num_categories);
  const double t = std::clamp((depth - depth_min) / (depth_max - depth_min), 0.0, 1.0);
  const double v = 1.0 - 0.55 * t;  // nearer is brighter
  const double sat = 0.65;
  const double c = v * sat;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  auto to8 = [&](double f) { return uint8_t(std::lround((f + m) * 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

Image render_scene(const Scene& s) {
  Image img(s.width, s.height, {30, 30, 30});
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const size_t idx = size_t(y) * s.width + x;
      const int oi = s.owner_object[idx];
      if (oi < 0) continue;
      const ScenePart& p = s.objects[oi].parts[s.owner_part[idx]];
      auto color = category_color(s.objects[oi].category, s.num_categories,
                                  p.depth, s.depth_min, s.depth_max);
      // 1px darker edge where the pixel touches the part border
      const bool edge = x == p.x0 || x == p.x1 - 1 || y == p.y0 || y == p.y1 - 1;
      uint8_t* px = img.at(x, y);
      for (int c = 0; c < 3; ++c)
        px[c] = edge ? uint8_t(color[c] * 0.55) : color[c];
    }
  return img;
}

}  // namespace relocc
