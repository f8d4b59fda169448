#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cg/geometry.hpp"
#include "cg/image.hpp"
#include "cg/lexicon.hpp"
#include "cg/schema.hpp"

namespace cg {

// One (expression, target box) pair. Pixels live in the owning Dataset's
// image store (several expressions usually share an image).
struct GroundingSample {
  std::string sample_id;  // "<image_id>#<index within image>"
  std::string image_id;
  std::vector<std::string> words;
  std::vector<int> tokens;  // ids; filled by apply_vocabulary
  BoundingBox target;
  std::vector<int> labels;  // size K, kAbsent allowed
  std::string split;        // train / val / test
};

struct ImageInfo {
  std::string file;
  int width = 0, height = 0;
};

struct Dataset {
  std::string root;
  AttributeSchema schema;
  std::vector<GroundingSample> samples;
  std::map<std::string, ImageInfo> images;               // by image_id
  mutable std::unordered_map<std::string, ImageU8> pixel_cache;

  const ImageU8& image(const std::string& image_id) const;
  std::vector<const GroundingSample*> split_samples(const std::string& split) const;
  void preload_images() const;
};

// Reads <root>/annotations.json (+ image files). Labels come from the file
// when the annotation carries them, otherwise from parsing the expression
// with the given lexicon (or a schema-derived one when absent).
Dataset load_dataset(const std::string& root, const AttributeSchema& schema,
                     const Lexicon* lexicon = nullptr);

// Writes annotations.json, schema.json and every cached image under root.
void save_dataset(const Dataset& ds, const std::string& root);

struct Vocabulary {
  std::vector<std::string> words;  // index == id; 0 = <pad>, 1 = <unk>
  std::unordered_map<std::string, int> index;

  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  static Vocabulary build(const std::vector<const GroundingSample*>& samples);
  int id(const std::string& w) const;
  int size() const { return static_cast<int>(words.size()); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
};

// Fills sample.tokens for every sample (unknown words map to <unk>).
void apply_vocabulary(Dataset& ds, const Vocabulary& vocab);

}  // namespace cg
