#include "cg/stats.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace cg {

namespace fs = std::filesystem;

double DatasetStatistics::avg_expression_length_per_person() const {
  int64_t total = 0, n = 0;
  for (const auto& [len, cnt] : expr_len_per_person) {
    total += static_cast<int64_t>(len) * cnt;
    n += cnt;
  }
  return n ? static_cast<double>(total) / n : 0.0;
}

double DatasetStatistics::avg_expression_length_per_expression() const {
  int64_t total = 0, n = 0;
  for (const auto& [len, cnt] : expr_len_per_expression) {
    total += static_cast<int64_t>(len) * cnt;
    n += cnt;
  }
  return n ? static_cast<double>(total) / n : 0.0;
}

double DatasetStatistics::avg_persons_per_image() const {
  int64_t total = 0, n = 0;
  for (const auto& [p, cnt] : persons_per_image) {
    total += static_cast<int64_t>(p) * cnt;
    n += cnt;
  }
  return n ? static_cast<double>(total) / n : 0.0;
}

DatasetStatistics compute_statistics(const Dataset& ds,
                                     const std::map<std::string, int>* persons_per_image) {
  check(!ds.samples.empty(), "compute_statistics: empty sample list");
  DatasetStatistics st;
  st.num_images = static_cast<int64_t>(ds.images.size());
  st.num_expressions = static_cast<int64_t>(ds.samples.size());
  st.attribute_type_counts.assign(ds.schema.k(), 0);

  // person identity: image + target box at integer-pixel resolution
  struct PersonAgg {
    std::set<std::pair<int, int>> attrs;
    int64_t words = 0;
  };
  std::map<std::string, PersonAgg> persons;

  for (const auto& s : ds.samples) {
    std::ostringstream key;
    key << s.image_id << ":" << s.target.x << "," << s.target.y << "," << s.target.w
        << "," << s.target.h;
    auto& agg = persons[key.str()];
    agg.words += static_cast<int64_t>(s.words.size());

    ++st.expr_len_per_expression[static_cast<int>(s.words.size())];
    for (const auto& w : s.words) ++st.word_frequency[w];
    for (int k = 0; k < ds.schema.k(); ++k)
      if (s.labels[k] != kAbsent) {
        ++st.attribute_type_counts[k];
        agg.attrs.insert({k, s.labels[k]});
      }
  }

  st.num_persons = static_cast<int64_t>(persons.size());
  for (const auto& [key, agg] : persons) {
    ++st.attributes_per_person[static_cast<int>(agg.attrs.size())];
    ++st.expr_len_per_person[static_cast<int>(agg.words)];
  }

  if (persons_per_image)
    for (const auto& [img, count] : *persons_per_image) {
      (void)img;
      ++st.persons_per_image[count];
    }
  return st;
}

namespace {

void write_histogram(const std::map<int, int64_t>& h, const std::string& path,
                     const std::string& key_name) {
  std::ofstream f(path);
  check(f.good(), "cannot write " + path);
  f << key_name << ",count\n";
  for (const auto& [k, v] : h) f << k << "," << v << "\n";
}

}  // namespace

void write_statistics(const DatasetStatistics& st, const AttributeSchema& schema,
                      const std::string& dir) {
  fs::create_directories(dir);
  write_histogram(st.persons_per_image, dir + "/persons_per_image.csv", "persons");
  write_histogram(st.attributes_per_person, dir + "/attributes_per_person.csv",
                  "attributes");
  write_histogram(st.expr_len_per_person, dir + "/expression_length_per_person.csv",
                  "words");
  write_histogram(st.expr_len_per_expression,
                  dir + "/expression_length_per_expression.csv", "words");

  {
    std::ofstream f(dir + "/attribute_types.csv");
    f << "type,count\n";
    for (int k = 0; k < schema.k(); ++k)
      f << schema.types[k].name << "," << st.attribute_type_counts[k] << "\n";
  }
  {
    std::ofstream f(dir + "/word_frequency.csv");
    f << "word,count\n";
    for (const auto& [w, c] : st.word_frequency) f << w << "," << c << "\n";
  }
  {
    std::ofstream f(dir + "/summary.txt");
    f << "images:              " << st.num_images << "\n";
    f << "expressions:         " << st.num_expressions << "\n";
    f << "queried persons:     " << st.num_persons << "\n";
    f << "avg words/person:    " << st.avg_expression_length_per_person() << "\n";
    f << "avg words/expression:" << st.avg_expression_length_per_expression() << "\n";
    if (!st.persons_per_image.empty())
      f << "avg persons/image:   " << st.avg_persons_per_image() << "\n";
  }
}

}  // namespace cg
