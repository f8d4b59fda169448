#include "cg/generator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cg {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

enum TypeIdx {
  kEntry = 0,
  kGender = 1,
  kStyle = 2,
  kColor = 3,
  kLocation = 4,
  kObject = 5,
  kAction = 6,
  kAccessory = 7
};

const Rgb kClothes[8] = {
    {0.97, 0.97, 0.97},  // white
    {0.08, 0.08, 0.08},  // black
    {0.85, 0.08, 0.08},  // red
    {0.10, 0.15, 0.85},  // blue
    {0.05, 0.65, 0.10},  // green
    {0.95, 0.90, 0.10},  // yellow
    {0.95, 0.55, 0.05},  // orange
    {0.55, 0.10, 0.70},  // purple
};
const Rgb kSkins[3] = {{0.96, 0.84, 0.70}, {0.80, 0.62, 0.45}, {0.55, 0.38, 0.26}};
const Rgb kPants[4] = {
    {0.20, 0.20, 0.35}, {0.25, 0.25, 0.25}, {0.15, 0.30, 0.25}, {0.35, 0.20, 0.15}};
const Rgb kHair[4] = {
    {0.10, 0.08, 0.05}, {0.25, 0.15, 0.05}, {0.45, 0.30, 0.10}, {0.05, 0.05, 0.05}};
const Rgb kOutline = {0.30, 0.30, 0.30};
const Rgb kHat = {0.45, 0.12, 0.12};
const Rgb kBackpack = {0.10, 0.35, 0.15};
const Rgb kGlasses = {0.05, 0.05, 0.08};
const Rgb kScarf = {0.60, 0.90, 0.20};
const Rgb kBag = {0.35, 0.22, 0.08};

struct Template {
  int id;
  const char* pattern;
};

// Slots: {E} entry word (sometimes the generic "person"), {G} gender word,
// {S} style, {C} color, {L} location, {O} prop, {A} action, {X} accessory.
const Template kTemplates[] = {
    {1, "the {E}"},
    {2, "the {E} in {C}"},
    {3, "the {E} in {C} {S}"},
    {4, "the {E} wearing a {S}"},
    {5, "the {E} {A}"},
    {6, "the {E} on the {L}"},
    {7, "the {E} in {C} on the {L}"},
    {8, "the {E} in {C} {S} on the {L}"},
    {9, "the {E} in {C} {S} {A}"},
    {10, "the {E} with a {X}"},
    {11, "the {E} in {C} with a {X}"},
    {12, "the {E} next to the {O}"},
    {13, "the {E} {A} next to the {O}"},
    {14, "the {E} in {C} {S} {A} on the {L}"},
    {15, "the {E} {A} on the {L}"},
    {16, "the {E} wearing a {S} and a {X}"},
    {17, "the {G} person in {C}"},
    {18, "the {G} person wearing a {S}"},
    {19, "the {E} in {C} {A}"},
    {20, "the {E} with a {X} on the {L}"},
    {21, "the {E} in {C} next to the {O}"},
    {22, "the {E} wearing a {S} on the {L}"},
};

std::vector<double> skew_weights(int n, double skew) {
  std::vector<double> w(n);
  double v = 1.0;
  for (int i = 0; i < n; ++i) {
    w[i] = v;
    v *= skew;
  }
  return w;
}

}  // namespace

void SceneConfig::validate() const {
  check(image_width >= 48 && image_height >= 48, "scene config: image too small");
  check(persons_min >= 2 && persons_max <= 64 && persons_min <= persons_max,
        "scene config: persons-per-image range must lie within [2, 64]");
  check(samples_per_scene >= 1, "scene config: samples_per_scene must be positive");
  check(train_scenes >= 0 && val_scenes >= 0 && test_scenes >= 0,
        "scene config: negative scene count");
  check(max_scene_attempts >= 1, "scene config: max_scene_attempts must be positive");
}

std::string SceneConfig::to_json_string() const {
  json j;
  j["image_width"] = image_width;
  j["image_height"] = image_height;
  j["persons_min"] = persons_min;
  j["persons_max"] = persons_max;
  j["train_scenes"] = train_scenes;
  j["val_scenes"] = val_scenes;
  j["test_scenes"] = test_scenes;
  j["samples_per_scene"] = samples_per_scene;
  j["seed"] = seed;
  j["occlusion"] = occlusion;
  j["child_prob"] = child_prob;
  j["accessory_prob"] = accessory_prob;
  j["prop_prob"] = prop_prob;
  j["size_bias"] = size_bias;
  j["hard_negative_prob"] = hard_negative_prob;
  j["generic_entry_prob"] = generic_entry_prob;
  j["class_skew"] = class_skew;
  j["location_margin"] = location_margin;
  j["max_scene_attempts"] = max_scene_attempts;
  j["template_ids"] = template_ids;
  return j.dump(2);
}

SceneConfig SceneConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("bad generator config: ") + e.what());
  }
  SceneConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("image_width", c.image_width);
  get("image_height", c.image_height);
  get("persons_min", c.persons_min);
  get("persons_max", c.persons_max);
  get("train_scenes", c.train_scenes);
  get("val_scenes", c.val_scenes);
  get("test_scenes", c.test_scenes);
  get("samples_per_scene", c.samples_per_scene);
  get("seed", c.seed);
  get("occlusion", c.occlusion);
  get("child_prob", c.child_prob);
  get("accessory_prob", c.accessory_prob);
  get("prop_prob", c.prop_prob);
  get("size_bias", c.size_bias);
  get("hard_negative_prob", c.hard_negative_prob);
  get("generic_entry_prob", c.generic_entry_prob);
  get("class_skew", c.class_skew);
  get("location_margin", c.location_margin);
  get("max_scene_attempts", c.max_scene_attempts);
  get("template_ids", c.template_ids);
  c.validate();
  return c;
}

SceneConfig SceneConfig::load(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open generator config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_string(ss.str());
}

AttributeSchema generator_schema() {
  AttributeSchema s;
  s.types = {
      {"entrylevel", {"man", "woman", "boy", "girl"}, {}},
      {"gender", {"male", "female"}, {}},
      {"upclothes_style", {"t-shirt", "shirt", "coat", "hoodie", "sweater", "tank-top"}, {}},
      {"upclothes_color",
       {"white", "black", "red", "blue", "green", "yellow", "orange", "purple"},
       {}},
      {"relative_location",
       {"top-left", "top", "top-right", "left", "center", "right", "bottom-left",
        "bottom", "bottom-right"},
       {}},
      {"relative_object", {"ball", "umbrella", "bench", "dog"}, {}},
      {"action", {"standing", "sitting", "walking", "running", "waving", "bending"}, {}},
      {"accessory", {"hat", "backpack", "glasses", "scarf", "bag"}, {}},
  };
  s.validate();
  return s;
}

Lexicon generator_lexicon(const AttributeSchema& schema) {
  Lexicon lex;
  lex.add("man", "entrylevel", "man", true, true);
  lex.add("woman", "entrylevel", "woman", true, true);
  lex.add("boy", "entrylevel", "boy", true, true);
  lex.add("girl", "entrylevel", "girl", true, true);
  lex.add("male", "gender", "male");
  lex.add("female", "gender", "female");
  lex.add_plain("person", /*noun=*/true, /*subject=*/true);
  for (const auto& t : schema.types) {
    if (t.name == "entrylevel" || t.name == "gender") continue;
    const bool noun = t.name == "upclothes_style" || t.name == "accessory" ||
                      t.name == "relative_object" || t.name == "relative_location";
    for (const auto& c : t.classes)
      if (!lex.words.count(c)) lex.add(c, t.name, c, noun);
  }
  return lex;
}

int location_cell(double cx, double cy, int img_w, int img_h) {
  const int col = std::clamp(static_cast<int>(cx * 3 / img_w), 0, 2);
  const int row = std::clamp(static_cast<int>(cy * 3 / img_h), 0, 2);
  return row * 3 + col;
}

namespace {

// is (cx,cy) inside grid cell `cell` expanded by margin px on every side
bool near_cell(double cx, double cy, int cell, int img_w, int img_h, double margin) {
  const int row = cell / 3, col = cell % 3;
  const double x0 = col * img_w / 3.0 - margin, x1 = (col + 1) * img_w / 3.0 + margin;
  const double y0 = row * img_h / 3.0 - margin, y1 = (row + 1) * img_h / 3.0 + margin;
  return cx >= x0 && cx < x1 && cy >= y0 && cy < y1;
}

// is (cx,cy) at least margin px interior to its own cell
bool cell_robust(double cx, double cy, int img_w, int img_h, double margin) {
  const int cell = location_cell(cx, cy, img_w, img_h);
  const int row = cell / 3, col = cell % 3;
  const double x0 = col * img_w / 3.0, x1 = (col + 1) * img_w / 3.0;
  const double y0 = row * img_h / 3.0, y1 = (row + 1) * img_h / 3.0;
  return cx >= x0 + margin && cx < x1 - margin && cy >= y0 + margin && cy < y1 - margin;
}

}  // namespace

bool expression_unique(const Scene& scene, int target, const std::vector<int>& labels,
                       const SceneConfig& cfg) {
  for (size_t p = 0; p < scene.persons.size(); ++p) {
    if (static_cast<int>(p) == target) continue;
    const auto& other = scene.persons[p];
    bool matches_all = true;
    for (size_t k = 0; k < labels.size(); ++k) {
      if (labels[k] == kAbsent) continue;
      bool m;
      if (static_cast<int>(k) == kLocation)
        m = near_cell(other.cx, other.cy, labels[k], cfg.image_width, cfg.image_height,
                      cfg.location_margin);
      else
        m = other.attrs[k] == labels[k];
      if (!m) {
        matches_all = false;
        break;
      }
    }
    if (matches_all) return false;
  }
  return true;
}

BoundingBox torso_region(const PersonSpec& spec) {
  const double h = spec.height;
  const double top = spec.cy - h / 2;
  const double half = spec.attrs[kStyle] == 5 ? 0.10 * h : 0.13 * h;  // tank-top slimmer
  return BoundingBox(spec.cx - half, top + 0.35 * h, 2 * half, 0.22 * h);
}

BoundingBox render_person(Canvas& canvas, const PersonSpec& spec,
                          const AttributeSchema& schema) {
  (void)schema;
  const double h = spec.height;
  const double cx = spec.cx;
  const double top = spec.cy - h / 2;
  const double bottom = spec.cy + h / 2;
  const int style = spec.attrs[kStyle];
  const int action = spec.attrs[kAction];
  const int accessory = spec.attrs[kAccessory];
  const bool female = spec.attrs[kGender] == 1;
  const Rgb clothes = kClothes[spec.attrs[kColor]];
  const Rgb skin = kSkins[spec.skin];
  const Rgb pants = kPants[spec.pants];
  const Rgb hair = kHair[spec.hair];

  const bool bending = action == 5;
  const double hx = bending ? cx + 0.20 * h : cx;
  const double hy = bending ? top + 0.34 * h : top + 0.17 * h;

  canvas.begin_tracking();

  // hair behind everything for long-haired glyphs
  if (female)
    canvas.fill_rect(cx - 0.17 * h, top + 0.02 * h, cx + 0.17 * h, top + 0.40 * h, hair);

  // hood rims the head
  if (style == 3) canvas.fill_half_disc_up(hx, hy + 0.02 * h, 0.17 * h, clothes);

  // torso with a thin outline so light clothes separate from the background
  const double y0 = top + 0.32 * h;
  const double y1 = style == 2 ? top + 0.70 * h : top + 0.62 * h;  // coats run long
  const double half_w = style == 5 ? 0.12 * h : 0.16 * h;
  if (bending) {
    const int slices = 4;
    for (int i = 0; i < slices; ++i) {
      const double sy0 = y0 + (y1 - y0) * i / slices;
      const double sy1 = y0 + (y1 - y0) * (i + 1) / slices;
      const double shift = 0.20 * h * (1.0 - static_cast<double>(i) / slices);
      canvas.fill_rect(cx + shift - half_w, sy0, cx + shift + half_w, sy1, clothes);
    }
  } else {
    canvas.fill_rect(cx - half_w - 1, y0 - 1, cx + half_w + 1, y1 + 1, kOutline);
    canvas.fill_rect(cx - half_w, y0, cx + half_w, y1, clothes);
  }

  if (style == 1)  // shirt collar
    canvas.fill_rect(cx - 0.05 * h, y0, cx + 0.05 * h, y0 + 0.05 * h,
                     Rgb{0.98, 0.98, 0.98});
  if (style == 2)  // coat button line
    canvas.fill_rect(cx - 0.015 * h, y0 + 0.02 * h, cx + 0.015 * h, y1 - 0.02 * h,
                     kOutline);
  if (style == 4) {  // sweater stripes
    const Rgb darker{clothes[0] * 0.55, clothes[1] * 0.55, clothes[2] * 0.55};
    canvas.fill_rect(cx - half_w, y0 + 0.08 * h, cx + half_w, y0 + 0.11 * h, darker);
    canvas.fill_rect(cx - half_w, y0 + 0.17 * h, cx + half_w, y0 + 0.20 * h, darker);
  }

  // arms: geometry by action, colors by sleeve length
  const double arm_t = 0.055 * h;
  const double sh_y = y0 + 0.03 * h;
  const bool long_sleeve = style == 1 || style == 2 || style == 3 || style == 4;
  const Rgb upper_col = style == 5 ? skin : clothes;
  const Rgb lower_col = long_sleeve ? clothes : skin;
  struct Arm {
    double ex, ey, hx2, hy2;
  };
  Arm left{cx - 0.22 * h, sh_y + 0.14 * h, cx - 0.24 * h, y1 + 0.02 * h};
  Arm right{cx + 0.22 * h, sh_y + 0.14 * h, cx + 0.24 * h, y1 + 0.02 * h};
  if (action == 3) {  // running: bent arms forward
    left = {cx - 0.24 * h, sh_y + 0.10 * h, cx - 0.10 * h, sh_y - 0.02 * h};
    right = {cx + 0.24 * h, sh_y + 0.10 * h, cx + 0.32 * h, sh_y + 0.02 * h};
  } else if (action == 4) {  // waving: right hand above the head
    right = {cx + 0.24 * h, sh_y - 0.05 * h, cx + 0.28 * h, top - 0.04 * h};
  } else if (action == 2) {  // walking: slight swing
    left = {cx - 0.22 * h, sh_y + 0.12 * h, cx - 0.28 * h, y1 - 0.02 * h};
    right = {cx + 0.22 * h, sh_y + 0.12 * h, cx + 0.18 * h, y1 + 0.04 * h};
  }
  auto draw_arm = [&](const Arm& a, double side) {
    const double sx = cx + side * (half_w - 0.01 * h);
    canvas.stroke(sx, sh_y, a.ex, a.ey, arm_t, upper_col);
    canvas.stroke(a.ex, a.ey, a.hx2, a.hy2, arm_t, lower_col);
  };
  draw_arm(left, -1.0);
  draw_arm(right, 1.0);

  // legs
  const double leg_t = 0.06 * h;
  const double hip_y = y1;
  if (action == 1) {  // sitting: thighs out, shins down
    canvas.stroke(cx - 0.05 * h, hip_y, cx - 0.20 * h, hip_y + 0.06 * h, leg_t, pants);
    canvas.stroke(cx + 0.05 * h, hip_y, cx + 0.20 * h, hip_y + 0.06 * h, leg_t, pants);
    canvas.stroke(cx - 0.20 * h, hip_y + 0.06 * h, cx - 0.20 * h, bottom - 0.06 * h,
                  leg_t, pants);
    canvas.stroke(cx + 0.20 * h, hip_y + 0.06 * h, cx + 0.20 * h, bottom - 0.06 * h,
                  leg_t, pants);
  } else {
    double spread = 0.06 * h;
    if (action == 2) spread = 0.13 * h;
    if (action == 3) spread = 0.21 * h;
    canvas.stroke(cx - 0.05 * h, hip_y, cx - spread, bottom - 0.02 * h, leg_t, pants);
    canvas.stroke(cx + 0.05 * h, hip_y, cx + spread, bottom - 0.02 * h, leg_t, pants);
  }

  // head above hood/torso
  canvas.fill_ellipse(hx, hy, 0.115 * h, 0.13 * h, skin);
  if (!female && style != 3)
    canvas.fill_half_disc_up(hx, hy - 0.03 * h, 0.115 * h, hair);

  switch (accessory) {
    case 0:  // hat
      canvas.fill_rect(hx - 0.13 * h, hy - 0.21 * h, hx + 0.13 * h, hy - 0.10 * h, kHat);
      canvas.fill_rect(hx - 0.19 * h, hy - 0.12 * h, hx + 0.19 * h, hy - 0.09 * h, kHat);
      break;
    case 1:  // backpack
      canvas.fill_rect(cx - 0.29 * h, y0 + 0.02 * h, cx - 0.17 * h, y0 + 0.26 * h,
                       kBackpack);
      break;
    case 2:  // glasses
      canvas.fill_rect(hx - 0.11 * h, hy - 0.02 * h, hx + 0.11 * h, hy + 0.03 * h,
                       kGlasses);
      break;
    case 3:  // scarf
      canvas.fill_rect(cx - 0.12 * h, y0 - 0.035 * h, cx + 0.12 * h, y0 + 0.035 * h,
                       kScarf);
      break;
    case 4:  // bag
      canvas.fill_rect(cx + 0.18 * h, y1 - 0.02 * h, cx + 0.30 * h, y1 + 0.12 * h, kBag);
      break;
    default:
      break;
  }

  return canvas.end_tracking();
}

void render_prop(Canvas& canvas, const PropSpec& prop) {
  const double s = prop.size;
  switch (prop.cls) {
    case 0:  // ball
      canvas.fill_ellipse(prop.cx, prop.cy, s * 0.45, s * 0.45, Rgb{0.95, 0.15, 0.60});
      break;
    case 1:  // umbrella
      canvas.fill_half_disc_up(prop.cx, prop.cy, s * 0.6, Rgb{0.10, 0.80, 0.85});
      canvas.stroke(prop.cx, prop.cy, prop.cx, prop.cy + s * 0.6, 1.2,
                    Rgb{0.25, 0.25, 0.25});
      break;
    case 2:  // bench
      canvas.fill_rect(prop.cx - s, prop.cy - s * 0.15, prop.cx + s, prop.cy + s * 0.15,
                       Rgb{0.50, 0.33, 0.12});
      canvas.fill_rect(prop.cx - s * 0.8, prop.cy + s * 0.15, prop.cx - s * 0.6,
                       prop.cy + s * 0.5, Rgb{0.40, 0.26, 0.10});
      canvas.fill_rect(prop.cx + s * 0.6, prop.cy + s * 0.15, prop.cx + s * 0.8,
                       prop.cy + s * 0.5, Rgb{0.40, 0.26, 0.10});
      break;
    default:  // dog
      canvas.fill_ellipse(prop.cx, prop.cy, s * 0.55, s * 0.28, Rgb{0.45, 0.40, 0.30});
      canvas.fill_ellipse(prop.cx + s * 0.5, prop.cy - s * 0.22, s * 0.2, s * 0.18,
                          Rgb{0.45, 0.40, 0.30});
      canvas.stroke(prop.cx - s * 0.3, prop.cy + s * 0.2, prop.cx - s * 0.3,
                    prop.cy + s * 0.5, 1.0, Rgb{0.35, 0.30, 0.22});
      canvas.stroke(prop.cx + s * 0.3, prop.cy + s * 0.2, prop.cx + s * 0.3,
                    prop.cy + s * 0.5, 1.0, Rgb{0.35, 0.30, 0.22});
      break;
  }
}

namespace {

struct SlotRealization {
  std::vector<std::string> words;
  std::vector<int> labels;
  bool ok = false;
};

SlotRealization realize_template(const Template& tpl, const PersonSpec& target,
                                 const AttributeSchema& schema, bool generic_entry,
                                 bool location_ok) {
  SlotRealization r;
  r.labels.assign(schema.k(), kAbsent);
  std::istringstream ss(tpl.pattern);
  std::string tok;
  while (ss >> tok) {
    if (tok[0] != '{') {
      r.words.push_back(tok);
      continue;
    }
    int type = -1;
    switch (tok[1]) {
      case 'E': type = kEntry; break;
      case 'G': type = kGender; break;
      case 'S': type = kStyle; break;
      case 'C': type = kColor; break;
      case 'L': type = kLocation; break;
      case 'O': type = kObject; break;
      case 'A': type = kAction; break;
      case 'X': type = kAccessory; break;
      default: return r;
    }
    if (type == kEntry && generic_entry) {
      r.words.push_back("person");
      continue;
    }
    if (type == kLocation && !location_ok) return r;
    const int cls = target.attrs[type];
    if (cls == kAbsent) return r;
    r.words.push_back(schema.types[type].classes[cls]);
    r.labels[type] = cls;
  }
  r.ok = true;
  return r;
}

int count_mentions(const std::vector<int>& labels) {
  int n = 0;
  for (int l : labels) n += l != kAbsent;
  return n;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, const AttributeSchema& schema,
                     uint64_t scene_seed) {
  cfg.validate();
  Rng rng(scene_seed);
  const int W = cfg.image_width, H = cfg.image_height;

  Scene scene;
  const int n = rng.uniform_int(cfg.persons_min, cfg.persons_max);

  // grid placement
  const int cols = std::max(2, static_cast<int>(std::ceil(
                                   std::sqrt(n * static_cast<double>(W) / H))));
  const int rows = std::max(2, static_cast<int>(std::ceil(n / static_cast<double>(cols))));
  const double cell_w = static_cast<double>(W) / cols;
  const double cell_h = static_cast<double>(H) / rows;
  std::vector<int> cells(static_cast<size_t>(cols) * rows);
  for (size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  rng.shuffle(cells);

  const double base_h = std::min(cell_h * 0.92, 30.0);
  static const double kSizeFactor[3] = {0.78, 1.0, 1.25};
  for (int i = 0; i < n; ++i) {
    PersonSpec p;
    p.size_class = rng.weighted_index({0.3, 0.45, 0.25});
    p.child = rng.uniform() < cfg.child_prob;
    double hgt = base_h * kSizeFactor[p.size_class] * (p.child ? 0.68 : 1.0);
    p.height = std::clamp(hgt, 12.0, 44.0);
    const int cell = cells[i];
    const double cx0 = (cell % cols + 0.5) * cell_w;
    const double cy0 = (cell / cols + 0.5) * cell_h;
    p.cx = cx0 + (rng.uniform() - 0.5) * 2 * cfg.occlusion * cell_w;
    p.cy = cy0 + (rng.uniform() - 0.5) * 2 * cfg.occlusion * cell_h;
    const double half_w = 0.36 * p.height, up = 0.60 * p.height, down = 0.54 * p.height;
    p.cx = std::clamp(p.cx, half_w + 1, W - half_w - 1);
    p.cy = std::clamp(p.cy, up + 1, H - down - 1);
    p.skin = rng.uniform_int(0, 2);
    p.pants = rng.uniform_int(0, 3);
    p.hair = rng.uniform_int(0, 3);
    p.attrs.assign(schema.k(), kAbsent);
    scene.persons.push_back(p);
  }

  // choose targets (first one optionally biased toward the largest glyph)
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  const int n_samples = std::min(cfg.samples_per_scene, n);
  std::vector<int> targets(order.begin(), order.begin() + n_samples);
  if (n_samples < n && rng.uniform() < cfg.size_bias) {
    int largest = 0;
    for (int i = 1; i < n; ++i)
      if (scene.persons[i].height > scene.persons[largest].height) largest = i;
    targets[0] = largest;
    for (int s = 1; s < n_samples; ++s)
      if (targets[s] == largest) targets[s] = order[n_samples];  // keep distinct
  }

  const auto style_w = skew_weights(schema.num_classes(kStyle), cfg.class_skew);
  const auto color_w = skew_weights(schema.num_classes(kColor), cfg.class_skew);
  const auto action_w = skew_weights(schema.num_classes(kAction), cfg.class_skew);

  auto sample_intrinsics = [&](PersonSpec& p) {
    const int gender = rng.uniform_int(0, 1);
    p.attrs[kGender] = gender;
    p.attrs[kEntry] = p.child ? 2 + gender : gender;  // man/woman/boy/girl
    p.attrs[kStyle] = rng.weighted_index(style_w);
    p.attrs[kColor] = rng.weighted_index(color_w);
    p.attrs[kAction] = rng.weighted_index(action_w);
    p.attrs[kAccessory] = rng.uniform() < cfg.accessory_prob
                              ? rng.uniform_int(0, schema.num_classes(kAccessory) - 1)
                              : kAbsent;
  };

  // attribute assignment + expression search, with bounded resampling
  std::vector<int> mention_count_choices{2, 2, 2, 2, 2, 2, 2, 3, 3, 3, 3, 3, 3, 3,
                                         4, 4, 4, 4, 5, 5};
  for (int attempt = 0; attempt < cfg.max_scene_attempts; ++attempt) {
    scene.props.clear();
    scene.samples.clear();

    for (int t : targets) sample_intrinsics(scene.persons[t]);
    for (int i = 0; i < n; ++i) {
      if (std::find(targets.begin(), targets.end(), i) != targets.end()) continue;
      auto& p = scene.persons[i];
      if (rng.uniform() < cfg.hard_negative_prob) {
        // near-clone of the first target, differing in one intrinsic type;
        // keeps its own child/size geometry so glyph scale stays truthful
        const auto& t0 = scene.persons[targets[0]];
        p.attrs = t0.attrs;
        p.attrs[kEntry] = p.child ? 2 + p.attrs[kGender] : p.attrs[kGender];
        const int mutate = rng.uniform_int(0, 3);
        if (mutate == 0) {
          p.attrs[kGender] ^= 1;
          p.attrs[kEntry] = p.child ? 2 + p.attrs[kGender] : p.attrs[kGender];
        } else {
          const int type = mutate == 1 ? kStyle : (mutate == 2 ? kColor : kAction);
          int cls = p.attrs[type];
          while (cls == p.attrs[type]) cls = rng.uniform_int(0, schema.num_classes(type) - 1);
          p.attrs[type] = cls;
        }
        if (rng.uniform() < 0.5) p.attrs[kAccessory] = kAbsent;
      } else {
        sample_intrinsics(p);
      }
      p.attrs[kObject] = kAbsent;
    }
    for (int t : targets) scene.persons[t].attrs[kObject] = kAbsent;

    // props: adjacent glyph, clearly closer to its owner than to anyone else
    for (int i = 0; i < n; ++i) {
      if (rng.uniform() >= cfg.prop_prob) continue;
      auto& p = scene.persons[i];
      const int cls = rng.uniform_int(0, schema.num_classes(kObject) - 1);
      const double size = std::clamp(p.height * 0.30, 4.0, 9.0);
      for (int side = 0; side < 2; ++side) {
        const double dir = (side ^ (p.cx > W / 2.0)) ? -1.0 : 1.0;
        PropSpec prop;
        prop.cls = cls;
        prop.size = size;
        prop.cx = p.cx + dir * (0.36 * p.height + size * 0.7 + 1);
        prop.cy = p.cy + 0.54 * p.height - size * 0.5;
        if (prop.cx - size < 0 || prop.cx + size >= W || prop.cy - size < 0 ||
            prop.cy + size >= H)
          continue;
        const double own = std::hypot(prop.cx - p.cx, prop.cy - p.cy);
        bool clear = true;
        for (int q = 0; q < n && clear; ++q)
          if (q != i &&
              std::hypot(prop.cx - scene.persons[q].cx, prop.cy - scene.persons[q].cy) <
                  own * 1.6)
            clear = false;
        if (!clear) continue;
        scene.props.push_back(prop);
        p.attrs[kObject] = cls;
        break;
      }
    }

    for (auto& p : scene.persons)
      p.attrs[kLocation] = location_cell(p.cx, p.cy, W, H);

    // expressions
    std::vector<const Template*> pool;
    for (const auto& t : kTemplates)
      if (cfg.template_ids.empty() ||
          std::find(cfg.template_ids.begin(), cfg.template_ids.end(), t.id) !=
              cfg.template_ids.end())
        pool.push_back(&t);
    check(!pool.empty(), "scene config: template_ids selects no templates");

    bool all_ok = true;
    for (int t : targets) {
      const auto& person = scene.persons[t];
      const bool loc_ok = cell_robust(person.cx, person.cy, W, H, cfg.location_margin);
      const int desired =
          mention_count_choices[rng.uniform_int(0, static_cast<int>(mention_count_choices.size()) - 1)];
      std::vector<const Template*> shuffled = pool;
      rng.shuffle(shuffled);

      bool found = false;
      for (int pass = 0; pass < 2 && !found; ++pass) {
        for (const Template* tpl : shuffled) {
          const bool generic = rng.uniform() < cfg.generic_entry_prob;
          auto real = realize_template(*tpl, person, schema, generic, loc_ok);
          if (!real.ok) continue;
          const int mentions = count_mentions(real.labels);
          if (mentions == 0) continue;
          if (pass == 0 && mentions != desired) continue;
          if (!expression_unique(scene, t, real.labels, cfg)) continue;
          SceneSample sample;
          sample.target = t;
          sample.words = std::move(real.words);
          sample.labels = std::move(real.labels);
          scene.samples.push_back(std::move(sample));
          found = true;
          break;
        }
      }
      if (!found) {
        all_ok = false;
        break;
      }
    }
    if (all_ok) break;
    if (attempt + 1 == cfg.max_scene_attempts)
      throw Error("scene generation failed: no unique expression after " +
                  std::to_string(cfg.max_scene_attempts) +
                  " attribute resamples; config=" + cfg.to_json_string());
  }

  // render: light background, props, persons back to front
  const double bg = 0.80 + rng.uniform() * 0.08;
  const double tint = (rng.uniform() - 0.5) * 0.03;
  Canvas canvas(W, H, Rgb{bg + tint, bg, bg - tint});
  for (const auto& prop : scene.props) render_prop(canvas, prop);

  std::vector<int> paint_order(n);
  for (int i = 0; i < n; ++i) paint_order[i] = i;
  std::sort(paint_order.begin(), paint_order.end(), [&](int a, int b) {
    if (scene.persons[a].cy != scene.persons[b].cy)
      return scene.persons[a].cy < scene.persons[b].cy;
    return a < b;
  });
  scene.boxes.resize(n);
  for (int idx : paint_order)
    scene.boxes[idx] = render_person(canvas, scene.persons[idx], schema);

  scene.image = canvas.to_image();
  return scene;
}

void generate_dataset(const SceneConfig& cfg, const std::string& out_root) {
  cfg.validate();
  const AttributeSchema schema = generator_schema();
  const int total = cfg.train_scenes + cfg.val_scenes + cfg.test_scenes;
  check(total > 0, "generator config produces no scenes");

  std::vector<Scene> scenes(total);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < total; ++i)
    scenes[i] = generate_scene(cfg, schema, Rng::child_seed(cfg.seed, i));

  Dataset ds;
  ds.root = out_root;
  ds.schema = schema;

  json manifest_scenes = json::array();
  std::vector<std::vector<int>> train_labels;
  for (int i = 0; i < total; ++i) {
    const std::string split = i < cfg.train_scenes
                                  ? "train"
                                  : (i < cfg.train_scenes + cfg.val_scenes ? "val" : "test");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%06d", i);
    const std::string image_id = buf;

    ImageInfo info;
    info.file = "images/" + image_id + ".ppm";
    info.width = cfg.image_width;
    info.height = cfg.image_height;
    ds.images[image_id] = info;
    ds.pixel_cache[image_id] = scenes[i].image;

    json js;
    js["image_id"] = image_id;
    js["split"] = split;
    js["persons"] = scenes[i].persons.size();
    js["mentions"] = json::array();

    int sub = 0;
    for (const auto& sample : scenes[i].samples) {
      GroundingSample s;
      s.image_id = image_id;
      s.sample_id = image_id + "#" + std::to_string(sub++);
      s.words = sample.words;
      s.target = scenes[i].boxes[sample.target];
      s.labels = sample.labels;
      s.split = split;
      if (split == "train") train_labels.push_back(s.labels);
      int mentions = 0;
      for (int l : s.labels) mentions += l != kAbsent;
      js["mentions"].push_back(mentions);
      ds.samples.push_back(std::move(s));
    }
    manifest_scenes.push_back(js);
  }

  accumulate_frequencies(ds.schema, train_labels);
  save_dataset(ds, out_root);

  json manifest;
  manifest["master_seed"] = cfg.seed;
  manifest["config"] = json::parse(cfg.to_json_string());
  manifest["scenes"] = manifest_scenes;
  std::ofstream mf(fs::path(out_root) / "manifest.json");
  check(mf.good(), "cannot write manifest under " + out_root);
  mf << manifest.dump(2) << "\n";
}

}  // namespace cg
