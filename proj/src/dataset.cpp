#include "cg/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace cg {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const ImageU8& Dataset::image(const std::string& image_id) const {
  auto cached = pixel_cache.find(image_id);
  if (cached != pixel_cache.end()) return cached->second;
  auto info = images.find(image_id);
  check(info != images.end(), "unknown image id: " + image_id);
  ImageU8 img = read_ppm((fs::path(root) / info->second.file).string());
  check(img.width == info->second.width && img.height == info->second.height,
        "image size mismatch for " + image_id);
  return pixel_cache.emplace(image_id, std::move(img)).first->second;
}

std::vector<const GroundingSample*> Dataset::split_samples(const std::string& split) const {
  std::vector<const GroundingSample*> out;
  for (const auto& s : samples)
    if (s.split == split) out.push_back(&s);
  return out;
}

void Dataset::preload_images() const {
  for (const auto& [id, info] : images) {
    (void)info;
    image(id);
  }
}

Dataset load_dataset(const std::string& root, const AttributeSchema& schema,
                     const Lexicon* lexicon) {
  schema.validate();
  Dataset ds;
  ds.root = root;
  ds.schema = schema;

  const fs::path ann_path = fs::path(root) / "annotations.json";
  std::ifstream f(ann_path);
  check(f.good(), "missing annotation file: " + ann_path.string());
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw Error("corrupt annotation file " + ann_path.string() + ": " + e.what());
  }

  for (const auto& ji : j.at("images")) {
    ImageInfo info;
    info.file = ji.at("file").get<std::string>();
    info.width = ji.at("width").get<int>();
    info.height = ji.at("height").get<int>();
    const auto id = ji.at("id").get<std::string>();
    check(!ds.images.count(id), "duplicate image id: " + id);
    ds.images[id] = info;
  }

  Lexicon fallback;
  if (!lexicon) fallback = lexicon_from_schema(schema);
  const Lexicon& lex = lexicon ? *lexicon : fallback;

  std::map<std::string, int> per_image_counter;
  for (const auto& ja : j.at("annotations")) {
    GroundingSample s;
    s.image_id = ja.at("image_id").get<std::string>();
    auto info = ds.images.find(s.image_id);
    check(info != ds.images.end(), "annotation references unknown image " + s.image_id);
    s.sample_id = s.image_id + "#" + std::to_string(per_image_counter[s.image_id]++);

    const auto& bb = ja.at("bbox");
    check(bb.size() == 4, "bbox must have 4 entries in sample " + s.sample_id);
    s.target = BoundingBox(bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                           bb[3].get<double>());
    if (!s.target.valid() ||
        !s.target.inside(info->second.width, info->second.height))
      throw Error("bbox outside image bounds in sample " + s.sample_id);

    s.words = tokenize(ja.at("expression").get<std::string>());
    check(!s.words.empty(), "empty expression in sample " + s.sample_id);

    s.split = ja.at("split").get<std::string>();
    check(s.split == "train" || s.split == "val" || s.split == "test",
          "bad split '" + s.split + "' in sample " + s.sample_id);

    s.labels.assign(schema.k(), kAbsent);
    if (ja.contains("attributes") && !ja["attributes"].is_null()) {
      for (const auto& [type_name, cls] : ja["attributes"].items()) {
        const int k = schema.type_index(type_name);
        check(k >= 0, "schema error: unknown attribute type '" + type_name +
                          "' in sample " + s.sample_id);
        if (cls.is_null()) continue;
        const int n = schema.class_index(k, cls.get<std::string>());
        check(n >= 0, "schema error: unknown attribute class '" +
                          cls.get<std::string>() + "' of type " + type_name +
                          " in sample " + s.sample_id);
        s.labels[k] = n;
      }
    } else {
      s.labels = lex.parse(s.words, schema);
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& root) {
  fs::create_directories(root);
  fs::create_directories(fs::path(root) / "images");

  json j;
  j["schema_version"] = 1;
  j["images"] = json::array();
  for (const auto& [id, info] : ds.images) {
    json ji;
    ji["id"] = id;
    ji["file"] = info.file;
    ji["width"] = info.width;
    ji["height"] = info.height;
    j["images"].push_back(ji);
  }
  j["annotations"] = json::array();
  for (const auto& s : ds.samples) {
    json ja;
    ja["image_id"] = s.image_id;
    ja["bbox"] = {s.target.x, s.target.y, s.target.w, s.target.h};
    std::string expr;
    for (size_t i = 0; i < s.words.size(); ++i) {
      if (i) expr += " ";
      expr += s.words[i];
    }
    ja["expression"] = expr;
    json attrs = json::object();
    for (int k = 0; k < ds.schema.k(); ++k) {
      if (s.labels[k] == kAbsent)
        attrs[ds.schema.types[k].name] = nullptr;
      else
        attrs[ds.schema.types[k].name] = ds.schema.types[k].classes[s.labels[k]];
    }
    ja["attributes"] = attrs;
    ja["split"] = s.split;
    j["annotations"].push_back(ja);
  }

  std::ofstream f(fs::path(root) / "annotations.json");
  check(f.good(), "cannot write annotations under " + root);
  f << j.dump(2) << "\n";

  ds.schema.save((fs::path(root) / "schema.json").string());

  for (const auto& [id, info] : ds.images) {
    auto img = ds.pixel_cache.find(id);
    if (img != ds.pixel_cache.end())
      write_ppm(img->second, (fs::path(root) / info.file).string());
  }
}

Vocabulary Vocabulary::build(const std::vector<const GroundingSample*>& samples) {
  std::map<std::string, int64_t> counts;
  for (const auto* s : samples)
    for (const auto& w : s->words) ++counts[w];

  std::vector<std::pair<std::string, int64_t>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.words = {"<pad>", "<unk>"};
  for (const auto& [w, c] : sorted) v.words.push_back(w);
  for (size_t i = 0; i < v.words.size(); ++i) v.index[v.words[i]] = static_cast<int>(i);
  return v;
}

int Vocabulary::id(const std::string& w) const {
  auto it = index.find(w);
  return it == index.end() ? kUnk : it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream f(path);
  check(f.good(), "cannot write vocabulary: " + path);
  for (const auto& w : words) f << w << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open vocabulary: " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) v.words.push_back(line);
  check(v.words.size() >= 2 && v.words[0] == "<pad>" && v.words[1] == "<unk>",
        "vocabulary file must start with <pad> and <unk>: " + path);
  for (size_t i = 0; i < v.words.size(); ++i) v.index[v.words[i]] = static_cast<int>(i);
  return v;
}

void apply_vocabulary(Dataset& ds, const Vocabulary& vocab) {
  for (auto& s : ds.samples) {
    s.tokens.clear();
    s.tokens.reserve(s.words.size());
    for (const auto& w : s.words) s.tokens.push_back(vocab.id(w));
  }
}

}  // namespace cg
