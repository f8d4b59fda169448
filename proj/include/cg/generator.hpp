#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cg/dataset.hpp"
#include "cg/image.hpp"
#include "cg/rng.hpp"

namespace cg {

// Procedural crowd-scene generator. Scenes are grids of "person" glyphs whose
// visual features encode the attribute classes exactly; expressions are
// template instantiations guaranteed (by brute-force check) to single out the
// target among all rendered persons.
struct SceneConfig {
  int image_width = 160;
  int image_height = 96;
  int persons_min = 8;
  int persons_max = 16;
  int train_scenes = 2000;
  int val_scenes = 150;
  int test_scenes = 500;
  int samples_per_scene = 1;
  uint64_t seed = 7;

  double occlusion = 0.35;          // jitter fraction of a grid cell
  double child_prob = 0.25;
  double accessory_prob = 0.55;
  double prop_prob = 0.35;          // person gets an adjacent prop glyph
  double size_bias = 0.12;          // P(target = largest person in scene)
  double hard_negative_prob = 0.5;  // distractor clones target minus one type
  double generic_entry_prob = 0.45; // subject word "person" instead of man/boy/...
  double class_skew = 0.78;         // geometric weighting of class sampling
  double location_margin = 6.0;     // px slack for grid-cell disambiguation
  int max_scene_attempts = 25;
  std::vector<int> template_ids;    // empty = full template set

  void validate() const;
  std::string to_json_string() const;
  static SceneConfig from_json_string(const std::string& text);
  static SceneConfig load(const std::string& path);
};

struct PersonSpec {
  double cx = 0, cy = 0;   // glyph center
  double height = 24;      // nominal glyph height in px
  bool child = false;
  int size_class = 1;                 // 0 small, 1 medium, 2 large
  std::vector<int> attrs;             // per type; kAbsent allowed
  // nuisance variation, not attribute-bearing
  int skin = 0, pants = 0, hair = 0;
};

struct PropSpec {
  int cls = 0;  // relative_object class
  double cx = 0, cy = 0, size = 6;
};

struct SceneSample {
  int target = 0;                      // person index
  std::vector<std::string> words;
  std::vector<int> labels;             // mentioned types only
};

struct Scene {
  ImageU8 image;
  std::vector<PersonSpec> persons;
  std::vector<BoundingBox> boxes;      // tight painted boxes, person order
  std::vector<PropSpec> props;
  std::vector<SceneSample> samples;
};

// The renderable taxonomy (same 8 types as the default schema, smaller
// class lists).
AttributeSchema generator_schema();
Lexicon generator_lexicon(const AttributeSchema& schema);

// Deterministic in (config, scene_seed).
Scene generate_scene(const SceneConfig& cfg, const AttributeSchema& schema,
                     uint64_t scene_seed);

// Paints one glyph; returns the tight box of the painted pixels.
BoundingBox render_person(Canvas& canvas, const PersonSpec& spec,
                          const AttributeSchema& schema);
void render_prop(Canvas& canvas, const PropSpec& prop);

// Torso pixels for verifying clothes color from the raster.
BoundingBox torso_region(const PersonSpec& spec);

// 3x3 grid cell index (row-major) of a point.
int location_cell(double cx, double cy, int img_w, int img_h);

// Brute-force ambiguity test: true when no non-target person carries every
// mentioned (type, class); location mentions use the margin rule.
bool expression_unique(const Scene& scene, int target, const std::vector<int>& labels,
                       const SceneConfig& cfg);

// Renders all splits under out_root: images/, annotations.json, schema.json
// (with train-split frequencies) and manifest.json.
void generate_dataset(const SceneConfig& cfg, const std::string& out_root);

}  // namespace cg
