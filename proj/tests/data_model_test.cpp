#include <filesystem>
#include <fstream>
#include <sstream>

#include "cg/dataset.hpp"
#include "cg/generator.hpp"
#include "cg/geometry.hpp"
#include "cg/lexicon.hpp"
#include "cg/stats.hpp"
#include "doctest.h"

using namespace cg;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("cg_test_" + tag);
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

}  // namespace

TEST_CASE("bounding box corner form round trip and clipping") {
  BoundingBox b(3.5, 2.0, 10.0, 4.0);
  CHECK(b.x2() == doctest::Approx(13.5));
  CHECK(b.y2() == doctest::Approx(6.0));
  auto r = BoundingBox::from_corners(b.x1(), b.y1(), b.x2(), b.y2());
  CHECK(r.x == b.x);
  CHECK(r.y == b.y);
  CHECK(r.w == b.w);
  CHECK(r.h == b.h);

  auto c = BoundingBox(-5, -5, 20, 8).clipped(12, 12);
  CHECK(c.x1() == 0);
  CHECK(c.y1() == 0);
  CHECK(c.x2() == doctest::Approx(12));
  CHECK(c.y2() == doctest::Approx(3));
}

TEST_CASE("iou: hand cases and properties") {
  BoundingBox a(0, 0, 10, 10);
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, BoundingBox(20, 20, 5, 5)) == doctest::Approx(0.0));
  CHECK(iou(a, BoundingBox(5, 0, 10, 10)) == doctest::Approx(50.0 / 150.0));
  CHECK_THROWS_AS(iou(a, BoundingBox(0, 0, 0, 5)), Error);

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    BoundingBox p(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 30),
                  rng.uniform(1, 30));
    BoundingBox q(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 30),
                  rng.uniform(1, 30));
    const double v = iou(p, q);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == doctest::Approx(iou(q, p)));
  }
}

TEST_CASE("giou: hand cases and properties") {
  BoundingBox a(0, 0, 10, 10);
  CHECK(giou(a, a) == doctest::Approx(1.0));
  // corner-touching: no overlap, enclosing box equals the union area
  CHECK(giou(a, BoundingBox(10, 0, 10, 10)) == doctest::Approx(0.0));
  CHECK(giou(a, BoundingBox(5, 0, 10, 10)) == doctest::Approx(1.0 / 3.0));

  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    BoundingBox p(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 30),
                  rng.uniform(1, 30));
    BoundingBox q(rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 30),
                  rng.uniform(1, 30));
    const double g = giou(p, q);
    CHECK(g == doctest::Approx(giou(q, p)));
    CHECK(g <= iou(p, q) + 1e-12);
    CHECK(g > -1.0);
    CHECK(g <= 1.0);
  }
}

TEST_CASE("default schema: 8 types, 86 classes") {
  auto s = default_schema();
  CHECK(s.k() == 8);
  CHECK(s.total_classes() == 86);
  const std::vector<std::string> expected = {
      "entrylevel",        "gender",          "upclothes_style", "upclothes_color",
      "relative_location", "relative_object", "action",          "accessory"};
  for (int k = 0; k < 8; ++k) CHECK(s.types[k].name == expected[k]);
}

TEST_CASE("schema validation and weights") {
  AttributeSchema s;
  s.types = {{"color", {"red", "red"}, {}}};
  CHECK_THROWS_AS(s.validate(), Error);

  s.types = {{"color", {"red", "blue"}, {}}};
  s.validate();
  accumulate_frequencies(s, {{0}, {0}, {0}, {0}, {1}});
  CHECK(s.types[0].frequency[0] == 4);
  CHECK(s.types[0].frequency[1] == 1);
  CHECK(s.class_weight(0, 0) == doctest::Approx(0.5));
  CHECK(s.class_weight(0, 1) == doctest::Approx(1.0));

  // zero frequency clamps to one
  accumulate_frequencies(s, {{1}});
  CHECK(s.class_weight(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("schema file round trip") {
  auto dir = temp_dir("schema");
  auto s = default_schema();
  accumulate_frequencies(s, {{0, 0, 0, 1, 4, kAbsent, 2, kAbsent}});
  s.save(dir + "/schema.json");
  auto r = AttributeSchema::load(dir + "/schema.json");
  CHECK(r.k() == s.k());
  for (int k = 0; k < s.k(); ++k) {
    CHECK(r.types[k].name == s.types[k].name);
    CHECK(r.types[k].classes == s.types[k].classes);
    CHECK(r.types[k].frequency == s.types[k].frequency);
  }
  CHECK_THROWS_AS(AttributeSchema::load(dir + "/nope.json"), Error);
}

TEST_CASE("tokenize strips punctuation, keeps hyphens, lower-cases") {
  auto t = tokenize("The Man, in a White T-Shirt!");
  CHECK(t == std::vector<std::string>{"the", "man", "in", "a", "white", "t-shirt"});
  CHECK(tokenize("").empty());
}

TEST_CASE("parse_attributes with the default lexicon") {
  auto schema = default_schema();
  auto lex = default_lexicon(schema);

  SUBCASE("keyword example: man in white t-shirt") {
    auto labels = lex.parse(tokenize("man in white t-shirt"), schema);
    CHECK(labels[schema.type_index("gender")] ==
          schema.class_index(schema.type_index("gender"), "male"));
    CHECK(labels[schema.type_index("upclothes_color")] ==
          schema.class_index(schema.type_index("upclothes_color"), "white"));
    CHECK(labels[schema.type_index("upclothes_style")] ==
          schema.class_index(schema.type_index("upclothes_style"), "t-shirt"));
    CHECK(labels[schema.type_index("entrylevel")] == kAbsent);
    CHECK(labels[schema.type_index("action")] == kAbsent);
  }
  SUBCASE("empty tokens: all absent") {
    auto labels = lex.parse({}, schema);
    for (int l : labels) CHECK(l == kAbsent);
  }
  SUBCASE("out-of-lexicon words: all absent, no error") {
    auto labels = lex.parse({"zzz", "qqq", "the"}, schema);
    for (int l : labels) CHECK(l == kAbsent);
  }
  SUBCASE("first match wins and parsing is deterministic") {
    auto tokens = tokenize("red blue shirt");
    auto a = lex.parse(tokens, schema);
    auto b = lex.parse(tokens, schema);
    CHECK(a == b);
    CHECK(a[schema.type_index("upclothes_color")] ==
          schema.class_index(schema.type_index("upclothes_color"), "red"));
  }
}

TEST_CASE("subject and noun token extraction") {
  auto schema = default_schema();
  auto lex = default_lexicon(schema);
  auto tokens = tokenize("the man in white t-shirt on the left");

  CHECK(lex.subject_tokens(tokens) == std::vector<std::string>{"the", "man"});
  CHECK(lex.noun_tokens(tokens) == std::vector<std::string>{"man", "t-shirt", "left"});

  CHECK(lex.subject_tokens({"man"}) == std::vector<std::string>{"man"});
  CHECK(lex.noun_tokens({"man"}) == std::vector<std::string>{"man"});
  CHECK(lex.subject_tokens({}).empty());
  CHECK(lex.noun_tokens({}).empty());
  CHECK(lex.subject_tokens({"red", "blue"}).empty());
}

namespace {

Dataset make_tiny_dataset(const std::string& root) {
  Dataset ds;
  ds.root = root;
  ds.schema = generator_schema();
  for (int i = 0; i < 2; ++i) {
    const std::string id = "img_" + std::to_string(i);
    ImageInfo info;
    info.file = "images/" + id + ".ppm";
    info.width = 64;
    info.height = 48;
    ds.images[id] = info;
    Canvas canvas(64, 48, {0.8, 0.8, 0.8});
    canvas.fill_rect(5 + i * 3, 5, 20, 20, {0.2, 0.3, 0.4});
    ds.pixel_cache[id] = canvas.to_image();

    GroundingSample s;
    s.image_id = id;
    s.sample_id = id + "#0";
    s.words = {"the", "man", "in", "red", "t-shirt"};
    s.target = BoundingBox(5 + i * 3, 5, 15, 15);
    s.labels.assign(ds.schema.k(), kAbsent);
    s.labels[0] = 0;  // man
    s.labels[3] = 2;  // red
    s.labels[2] = 0;  // t-shirt
    s.split = i == 0 ? "train" : "test";
    ds.samples.push_back(s);
  }
  return ds;
}

}  // namespace

TEST_CASE("dataset save/load round trip is exact") {
  auto dir = temp_dir("roundtrip");
  Dataset ds = make_tiny_dataset(dir);
  save_dataset(ds, dir);

  Dataset r = load_dataset(dir, ds.schema);
  REQUIRE(r.samples.size() == ds.samples.size());
  for (size_t i = 0; i < r.samples.size(); ++i) {
    const auto &a = ds.samples[i], &b = r.samples[i];
    CHECK(a.sample_id == b.sample_id);
    CHECK(a.image_id == b.image_id);
    CHECK(a.words == b.words);
    CHECK(a.labels == b.labels);
    CHECK(a.split == b.split);
    CHECK(a.target.x == b.target.x);
    CHECK(a.target.y == b.target.y);
    CHECK(a.target.w == b.target.w);
    CHECK(a.target.h == b.target.h);
  }
  CHECK(r.image("img_0").pixels == ds.pixel_cache.at("img_0").pixels);

  // serialize(load(x)) == x at the byte level
  auto dir2 = temp_dir("roundtrip2");
  save_dataset(r, dir2);
  CHECK(slurp(dir + "/annotations.json") == slurp(dir2 + "/annotations.json"));
}

TEST_CASE("dataset loading errors") {
  auto schema = generator_schema();

  SUBCASE("missing annotation file names the file") {
    auto dir = temp_dir("missing");
    try {
      load_dataset(dir, schema);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("annotations.json") != std::string::npos);
    }
  }
  SUBCASE("bbox outside image names the sample") {
    auto dir = temp_dir("badbox");
    Dataset ds = make_tiny_dataset(dir);
    ds.samples[1].target = BoundingBox(50, 40, 20, 20);  // spills outside 64x48
    save_dataset(ds, dir);
    try {
      load_dataset(dir, schema);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("img_1#0") != std::string::npos);
    }
  }
  SUBCASE("unknown attribute class is a schema error") {
    auto dir = temp_dir("badclass");
    Dataset ds = make_tiny_dataset(dir);
    save_dataset(ds, dir);
    auto text = slurp(dir + "/annotations.json");
    auto pos = text.find("\"red\"");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 5, "\"vermillion\"");
    std::ofstream(dir + "/annotations.json") << text;
    CHECK_THROWS_AS(load_dataset(dir, schema), Error);
  }
  SUBCASE("empty annotation list loads as empty, no error") {
    auto dir = temp_dir("empty");
    std::ofstream(dir + "/annotations.json")
        << R"({"schema_version":1,"images":[],"annotations":[]})";
    auto ds = load_dataset(dir, schema);
    CHECK(ds.samples.empty());
  }
}

TEST_CASE("vocabulary: reserved ids, ordering, round trip") {
  GroundingSample a, b;
  a.words = {"red", "man", "red"};
  b.words = {"man", "red", "blue"};
  Vocabulary v = Vocabulary::build({&a, &b});
  CHECK(v.words[0] == "<pad>");
  CHECK(v.words[1] == "<unk>");
  CHECK(v.id("red") == 2);   // most frequent
  CHECK(v.id("man") == 3);
  CHECK(v.id("blue") == 4);
  CHECK(v.id("zebra") == Vocabulary::kUnk);

  auto dir = temp_dir("vocab");
  v.save(dir + "/vocab.txt");
  auto r = Vocabulary::load(dir + "/vocab.txt");
  CHECK(r.words == v.words);
}

TEST_CASE("statistics: trivial single-sample histogram and invariants") {
  auto dir = temp_dir("stats");
  Dataset ds = make_tiny_dataset(dir);
  ds.samples.resize(1);
  auto st = compute_statistics(ds);
  CHECK(st.expr_len_per_expression == std::map<int, int64_t>{{5, 1}});
  CHECK(st.num_expressions == 1);
  CHECK(st.num_persons == 1);
  CHECK(st.attributes_per_person == std::map<int, int64_t>{{3, 1}});

  Dataset full = make_tiny_dataset(dir);
  std::map<std::string, int> counts{{"img_0", 4}, {"img_1", 7}};
  auto st2 = compute_statistics(full, &counts);
  int64_t total = 0;
  for (auto& [k, v2] : st2.persons_per_image) total += v2;
  CHECK(total == static_cast<int64_t>(full.images.size()));
  int64_t expr_total = 0;
  for (auto& [k, v3] : st2.expr_len_per_expression) expr_total += v3;
  CHECK(expr_total == st2.num_expressions);
  CHECK(st2.avg_persons_per_image() == doctest::Approx(5.5));

  Dataset empty = full;
  empty.samples.clear();
  CHECK_THROWS_AS(compute_statistics(empty), Error);
}
