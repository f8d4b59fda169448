#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cg/generator.hpp"
#include "cg/stats.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cg;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("cg_gen_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

SceneConfig small_config() {
  SceneConfig cfg;
  cfg.image_width = 96;
  cfg.image_height = 72;
  cfg.persons_min = 5;
  cfg.persons_max = 9;
  cfg.train_scenes = 4;
  cfg.val_scenes = 1;
  cfg.test_scenes = 2;
  cfg.seed = 7;
  return cfg;
}

// independent ambiguity oracle: plain equality on every mentioned type,
// locations resolved to exact grid cells
bool oracle_unique(const Scene& scene, int target, const std::vector<int>& labels,
                   int img_w, int img_h) {
  for (size_t p = 0; p < scene.persons.size(); ++p) {
    if (static_cast<int>(p) == target) continue;
    bool all = true;
    for (size_t k = 0; k < labels.size(); ++k) {
      if (labels[k] == kAbsent) continue;
      int value = scene.persons[p].attrs[k];
      if (k == 4) value = location_cell(scene.persons[p].cx, scene.persons[p].cy, img_w, img_h);
      if (value != labels[k]) {
        all = false;
        break;
      }
    }
    if (all) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("scene generation is deterministic in the seed") {
  auto cfg = small_config();
  auto schema = generator_schema();
  Scene a = generate_scene(cfg, schema, 1234);
  Scene b = generate_scene(cfg, schema, 1234);
  CHECK(a.image.pixels == b.image.pixels);
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].words == b.samples[i].words);
    CHECK(a.samples[i].labels == b.samples[i].labels);
    CHECK(a.samples[i].target == b.samples[i].target);
  }
  Scene c = generate_scene(cfg, schema, 1235);
  CHECK(a.image.pixels != c.image.pixels);
}

TEST_CASE("every emitted expression is unambiguous (brute-force oracle)") {
  auto cfg = small_config();
  cfg.persons_min = 8;
  cfg.persons_max = 14;
  auto schema = generator_schema();
  int samples_checked = 0;
  for (int s = 0; s < 60; ++s) {
    Scene scene = generate_scene(cfg, schema, Rng::child_seed(99, s));
    for (const auto& sample : scene.samples) {
      CHECK(oracle_unique(scene, sample.target, sample.labels, cfg.image_width,
                          cfg.image_height));
      ++samples_checked;
      int mentions = 0;
      for (int l : sample.labels) mentions += l != kAbsent;
      CHECK(mentions >= 1);
      CHECK(mentions <= 5);
    }
  }
  CHECK(samples_checked >= 60);
}

TEST_CASE("generated labels equal parsing the generated expression") {
  auto cfg = small_config();
  auto schema = generator_schema();
  auto lex = generator_lexicon(schema);
  for (int s = 0; s < 40; ++s) {
    Scene scene = generate_scene(cfg, schema, Rng::child_seed(31, s));
    for (const auto& sample : scene.samples)
      CHECK(lex.parse(sample.words, schema) == sample.labels);
  }
}

TEST_CASE("render: determinism, torso color, box/pixel agreement") {
  auto schema = generator_schema();
  PersonSpec spec;
  spec.cx = 40;
  spec.cy = 34;
  spec.height = 30;
  spec.attrs = {0, 0, 0, 0, 4, kAbsent, 0, kAbsent};  // man, male, t-shirt, white, standing

  Canvas c1(96, 72, {0.5, 0.5, 0.5});
  Canvas c2(96, 72, {0.5, 0.5, 0.5});
  BoundingBox b1 = render_person(c1, spec, schema);
  BoundingBox b2 = render_person(c2, spec, schema);
  CHECK(c1.raw() == c2.raw());
  CHECK(b1.x == b2.x);
  CHECK(b1.w == b2.w);

  SUBCASE("white torso renders near-white pixels") {
    auto region = torso_region(spec);
    ImageU8 img = c1.to_image();
    double mean = 0;
    int count = 0;
    for (int y = static_cast<int>(region.y1()) + 1; y < static_cast<int>(region.y2()) - 1; ++y)
      for (int x = static_cast<int>(region.x1()) + 1; x < static_cast<int>(region.x2()) - 1; ++x) {
        const uint8_t* p = img.at(x, y);
        mean += (p[0] + p[1] + p[2]) / 3.0;
        ++count;
      }
    REQUIRE(count > 0);
    mean /= count;
    CHECK(mean > 0.90 * 255);
  }

  SUBCASE("returned box equals the tight box recomputed from changed pixels") {
    Canvas blank(96, 72, {0.5, 0.5, 0.5});
    const auto before = blank.raw();
    BoundingBox ret = render_person(blank, spec, schema);
    const auto& after = blank.raw();
    int min_x = 96, min_y = 72, max_x = -1, max_y = -1;
    for (int y = 0; y < 72; ++y)
      for (int x = 0; x < 96; ++x) {
        const size_t i = (static_cast<size_t>(y) * 96 + x) * 3;
        if (after[i] != before[i] || after[i + 1] != before[i + 1] ||
            after[i + 2] != before[i + 2]) {
          min_x = std::min(min_x, x);
          min_y = std::min(min_y, y);
          max_x = std::max(max_x, x);
          max_y = std::max(max_y, y);
        }
      }
    BoundingBox recomputed(min_x, min_y, max_x - min_x + 1, max_y - min_y + 1);
    CHECK(iou(ret, recomputed) == doctest::Approx(1.0));
  }
}

TEST_CASE("painter order: the glyph drawn later occludes the earlier one") {
  auto schema = generator_schema();
  PersonSpec rear, front;
  rear.cx = 40;
  rear.cy = 30;
  rear.height = 28;
  rear.attrs = {0, 0, 0, 2, 4, kAbsent, 0, kAbsent};  // red torso
  front = rear;
  front.cy = 36;  // lower = closer
  front.attrs[3] = 3;  // blue torso

  Canvas c(96, 72, {0.8, 0.8, 0.8});
  render_person(c, rear, schema);
  render_person(c, front, schema);
  // sample the front torso center: must be blue, not red
  auto region = torso_region(front);
  ImageU8 img = c.to_image();
  const uint8_t* p = img.at(static_cast<int>(region.cx()), static_cast<int>(region.cy()));
  CHECK(p[2] > p[0]);  // blue dominates
}

TEST_CASE("two-person scene with a single-mention template") {
  SceneConfig cfg = small_config();
  cfg.persons_min = 2;
  cfg.persons_max = 2;
  cfg.hard_negative_prob = 0.0;
  cfg.generic_entry_prob = 0.0;
  cfg.template_ids = {1};  // "the {E}"
  auto schema = generator_schema();
  int emitted = 0;
  for (int s = 0; s < 10; ++s) {
    Scene scene = generate_scene(cfg, schema, Rng::child_seed(7, s));
    REQUIRE(scene.samples.size() == 1);
    const auto& sample = scene.samples[0];
    int mentions = 0;
    for (int l : sample.labels) mentions += l != kAbsent;
    CHECK(mentions == 1);
    CHECK(sample.labels[0] != kAbsent);  // entrylevel carries the gender/age split
    CHECK(scene.persons[0].attrs[0] != scene.persons[1].attrs[0]);
    ++emitted;
  }
  CHECK(emitted == 10);
}

TEST_CASE("persons-per-image histogram mode stays inside the configured range") {
  SceneConfig cfg = small_config();
  cfg.persons_min = 5;
  cfg.persons_max = 25;
  cfg.image_width = 160;
  cfg.image_height = 96;
  auto schema = generator_schema();
  std::map<int, int> hist;
  for (int s = 0; s < 250; ++s) {
    Scene scene = generate_scene(cfg, schema, Rng::child_seed(55, s));
    ++hist[static_cast<int>(scene.persons.size())];
  }
  int mode = -1, best = -1;
  for (auto& [k, v] : hist)
    if (v > best) {
      best = v;
      mode = k;
    }
  CHECK(mode >= 5);
  CHECK(mode <= 25);
}

TEST_CASE("generate_dataset: deterministic bytes, loadable, stats match manifest") {
  auto cfg = small_config();
  auto dir1 = temp_dir("ds1");
  auto dir2 = temp_dir("ds2");
  generate_dataset(cfg, dir1);
  generate_dataset(cfg, dir2);
  CHECK(slurp(dir1 + "/annotations.json") == slurp(dir2 + "/annotations.json"));
  CHECK(slurp(dir1 + "/manifest.json") == slurp(dir2 + "/manifest.json"));
  CHECK(slurp(dir1 + "/images/img_000000.ppm") == slurp(dir2 + "/images/img_000000.ppm"));

  auto schema = AttributeSchema::load(dir1 + "/schema.json");
  CHECK(schema.has_frequencies());
  Dataset ds = load_dataset(dir1, schema);
  CHECK(ds.samples.size() == 7);  // one per scene
  CHECK(ds.split_samples("train").size() == 4);
  CHECK(ds.split_samples("val").size() == 1);
  CHECK(ds.split_samples("test").size() == 2);

  // write-then-read equality for a 2-image root
  SceneConfig tiny = cfg;
  tiny.train_scenes = 1;
  tiny.val_scenes = 0;
  tiny.test_scenes = 1;
  auto dir3 = temp_dir("ds3");
  generate_dataset(tiny, dir3);
  Dataset d3 = load_dataset(dir3, AttributeSchema::load(dir3 + "/schema.json"));
  d3.preload_images();
  auto dir4 = temp_dir("ds4");
  save_dataset(d3, dir4);
  CHECK(slurp(dir3 + "/annotations.json") == slurp(dir4 + "/annotations.json"));
  CHECK(slurp(dir3 + "/images/img_000001.ppm") == slurp(dir4 + "/images/img_000001.ppm"));

  // attributes-per-person histogram equals the generator's bookkeeping
  auto manifest = nlohmann::json::parse(slurp(dir1 + "/manifest.json"));
  std::map<int, int64_t> expected;
  for (const auto& scene : manifest["scenes"])
    for (const auto& m : scene["mentions"]) ++expected[m.get<int>()];
  auto st = compute_statistics(ds);
  CHECK(st.attributes_per_person == expected);
}
