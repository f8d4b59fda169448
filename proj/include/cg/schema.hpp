#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cg {

// Label value for attribute types an expression does not mention.
constexpr int kAbsent = -1;

// The attribute taxonomy: K ordered types, each with an ordered list of
// fine-grained classes, plus optional per-class training-split counts used
// for the classification weighting.
struct AttributeSchema {
  struct Type {
    std::string name;
    std::vector<std::string> classes;
    std::vector<int64_t> frequency;  // empty until computed
  };

  std::vector<Type> types;

  int k() const { return static_cast<int>(types.size()); }
  int num_classes(int type) const { return static_cast<int>(types[type].classes.size()); }
  int total_classes() const;

  int type_index(const std::string& name) const;   // -1 when unknown
  int class_index(int type, const std::string& name) const;

  // 1/sqrt(frequency); zero counts are clamped to one.
  double class_weight(int type, int cls) const;
  bool has_frequencies() const;

  void validate() const;

  static AttributeSchema load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_json_string() const;
  static AttributeSchema from_json_string(const std::string& text);
};

// Counts (type, class) occurrences over a label set; labels[i] has one entry
// per type, kAbsent allowed.
void accumulate_frequencies(AttributeSchema& schema,
                            const std::vector<std::vector<int>>& labels);

}  // namespace cg
