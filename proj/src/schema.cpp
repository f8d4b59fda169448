#include "cg/schema.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <set>

#include "cg/tensor.hpp"
#include "json.hpp"

namespace cg {

using json = nlohmann::ordered_json;

int AttributeSchema::total_classes() const {
  int n = 0;
  for (const auto& t : types) n += static_cast<int>(t.classes.size());
  return n;
}

int AttributeSchema::type_index(const std::string& name) const {
  for (size_t i = 0; i < types.size(); ++i)
    if (types[i].name == name) return static_cast<int>(i);
  return -1;
}

int AttributeSchema::class_index(int type, const std::string& name) const {
  const auto& cls = types[type].classes;
  for (size_t i = 0; i < cls.size(); ++i)
    if (cls[i] == name) return static_cast<int>(i);
  return -1;
}

double AttributeSchema::class_weight(int type, int cls) const {
  const auto& freq = types[type].frequency;
  check(!freq.empty(), "schema has no frequency table for type " + types[type].name);
  const int64_t f = std::max<int64_t>(1, freq[cls]);
  return 1.0 / std::sqrt(static_cast<double>(f));
}

bool AttributeSchema::has_frequencies() const {
  for (const auto& t : types)
    if (t.frequency.size() != t.classes.size()) return false;
  return !types.empty();
}

void AttributeSchema::validate() const {
  check(!types.empty(), "schema error: needs at least one attribute type");
  std::set<std::string> type_names;
  for (const auto& t : types) {
    check(!t.name.empty(), "schema error: empty type name");
    check(type_names.insert(t.name).second, "schema error: duplicate type " + t.name);
    check(!t.classes.empty(), "schema error: type " + t.name + " has no classes");
    std::set<std::string> names;
    for (const auto& c : t.classes)
      check(names.insert(c).second,
            "schema error: duplicate class '" + c + "' in type " + t.name);
    if (!t.frequency.empty()) {
      check(t.frequency.size() == t.classes.size(),
            "schema error: frequency size mismatch in type " + t.name);
      for (int64_t f : t.frequency)
        check(f >= 0, "schema error: negative frequency in type " + t.name);
    }
  }
}

AttributeSchema AttributeSchema::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("corrupt schema: ") + e.what());
  }
  AttributeSchema s;
  for (const auto& jt : j.at("types")) {
    Type t;
    t.name = jt.at("name").get<std::string>();
    for (const auto& c : jt.at("classes")) t.classes.push_back(c.get<std::string>());
    if (jt.contains("frequency") && !jt["frequency"].is_null())
      for (const auto& fv : jt["frequency"]) t.frequency.push_back(fv.get<int64_t>());
    s.types.push_back(std::move(t));
  }
  s.validate();
  return s;
}

AttributeSchema AttributeSchema::load(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), "cannot open schema file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return from_json_string(ss.str());
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " (file " + path + ")");
  }
}

std::string AttributeSchema::to_json_string() const {
  json j;
  j["schema_version"] = 1;
  j["types"] = json::array();
  for (const auto& t : types) {
    json jt;
    jt["name"] = t.name;
    jt["classes"] = t.classes;
    if (!t.frequency.empty()) jt["frequency"] = t.frequency;
    j["types"].push_back(jt);
  }
  return j.dump(2);
}

void AttributeSchema::save(const std::string& path) const {
  std::ofstream f(path);
  check(f.good(), "cannot write schema file: " + path);
  f << to_json_string() << "\n";
}

void accumulate_frequencies(AttributeSchema& schema,
                            const std::vector<std::vector<int>>& labels) {
  for (auto& t : schema.types) t.frequency.assign(t.classes.size(), 0);
  for (const auto& lab : labels) {
    check(static_cast<int>(lab.size()) == schema.k(), "label vector size mismatch");
    for (int k = 0; k < schema.k(); ++k)
      if (lab[k] != kAbsent) {
        check(lab[k] >= 0 && lab[k] < schema.num_classes(k), "label index out of range");
        ++schema.types[k].frequency[lab[k]];
      }
  }
}

}  // namespace cg
