#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cg/dataset.hpp"

namespace cg {

// Corpus-level distributions. "Person" means a distinct (image, target box)
// pair; several expressions can describe the same person.
struct DatasetStatistics {
  std::map<int, int64_t> persons_per_image;        // only when counts provided
  std::map<int, int64_t> attributes_per_person;    // distinct (type,class) mentions
  std::map<int, int64_t> expr_len_per_person;      // summed words over a person's expressions
  std::map<int, int64_t> expr_len_per_expression;
  std::vector<int64_t> attribute_type_counts;      // per type, over expressions
  std::map<std::string, int64_t> word_frequency;

  int64_t num_images = 0;
  int64_t num_expressions = 0;
  int64_t num_persons = 0;

  double avg_expression_length_per_person() const;
  double avg_expression_length_per_expression() const;
  double avg_persons_per_image() const;
};

DatasetStatistics compute_statistics(
    const Dataset& ds, const std::map<std::string, int>* persons_per_image = nullptr);

// CSV histograms plus a short text summary under dir.
void write_statistics(const DatasetStatistics& st, const AttributeSchema& schema,
                      const std::string& dir);

}  // namespace cg
