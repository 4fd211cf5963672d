#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relocc/geometry.hpp"
#include "relocc/image.hpp"

namespace relocc {

enum class DistanceClass { a_closer = 0, b_closer = 1, same = 2, not_sure = 3 };
enum class OcclusionClass { a_occludes_b = 0, b_occludes_a = 1, none = 2, mutual = 3 };

constexpr int kNumDistanceClasses = 4;
constexpr int kNumOcclusionClasses = 4;

std::string to_string(DistanceClass d);
std::string to_string(OcclusionClass o);
DistanceClass distance_from_string(const std::string& s);
OcclusionClass occlusion_from_string(const std::string& s);

DistanceClass converse(DistanceClass d);
OcclusionClass converse(OcclusionClass o);

struct PairAnnotation {
  Box box_a;
  Box box_b;
  int cat_a = 0;
  int cat_b = 0;
  DistanceClass distance = DistanceClass::not_sure;
  OcclusionClass occlusion = OcclusionClass::none;

  bool operator==(const PairAnnotation&) const = default;
};

// Axis-aligned part rect in pixel coordinates, half-open [x0,x1) x [y0,y1).
struct ScenePart {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double depth = 0.0;

  bool contains(int px, int py) const {
    return px >= x0 && px < x1 && py >= y0 && py < y1;
  }
  bool intersects(const ScenePart& o) const {
    return std::max(x0, o.x0) < std::min(x1, o.x1) &&
           std::max(y0, o.y0) < std::min(y1, o.y1);
  }
};

struct SceneObject {
  std::vector<ScenePart> parts;
  int category = 0;
  double object_distance = 0.0;  // min part depth

  // Full-extent hull of all parts, normalized by canvas size.
  Box bounds(int width, int height) const;
};

struct Scene {
  int width = 0;
  int height = 0;
  uint64_t seed = 0;
  int num_categories = 6;
  double depth_min = 0.8;  // rendering palette range
  double depth_max = 3.0;
  std::vector<SceneObject> objects;
  // Front-most owner per pixel (row-major); -1 where background shows.
  std::vector<int> owner_object;
  std::vector<int> owner_part;

  int visible_pixels(int object_index) const;
};

struct GenConfig {
  int width = 128;
  int height = 128;
  int min_objects = 2;
  int max_objects = 3;
  int num_categories = 6;
  double min_size = 0.28;  // part extent as a fraction of min(width, height)
  double max_size = 0.48;
  double p_extra_part = 0.25;  // chance an object grows a second attached part
  double p_tangle = 0.30;      // chance of an engineered mutual-occlusion pair
  double p_same = 0.22;        // chance an object clones an earlier distance
  double same_band = 0.05;     // relative same-distance epsilon
  double depth_min = 0.8;
  double depth_max = 3.0;
  double min_visible_fraction = 0.10;  // of the object's own pixel area
};

Scene generate_scene(uint64_t seed, const GenConfig& cfg);

// Exact labels from part rects and depths (i, j index scene objects).
OcclusionClass occlusion_label(const Scene& s, int i, int j);
DistanceClass distance_label(const Scene& s, int i, int j, double eps);
PairAnnotation make_annotation(const Scene& s, int i, int j, double eps);

// Category = hue, depth = brightness (nearer is brighter).
Image render_scene(const Scene& s);

std::array<uint8_t, 3> category_color(int category, int num_categories,
                                      double depth, double depth_min,
                                      double depth_max);

}  // namespace relocc
