#include "cg/lexicon.hpp"

#include <algorithm>
#include <cctype>

#include "cg/tensor.hpp"

namespace cg {

void Lexicon::add(const std::string& word, const std::string& type,
                  const std::string& cls, bool noun, bool subject_head) {
  auto [it, inserted] = words.insert({word, WordInfo{type, cls, noun, subject_head}});
  check(inserted, "lexicon: keyword '" + word + "' registered twice");
}

void Lexicon::add_plain(const std::string& word, bool noun, bool subject_head) {
  words[word] = WordInfo{"", "", noun, subject_head};
}

std::vector<int> Lexicon::parse(const std::vector<std::string>& tokens,
                                const AttributeSchema& schema) const {
  std::vector<int> labels(schema.k(), kAbsent);
  for (const auto& tok : tokens) {
    auto it = words.find(tok);
    if (it == words.end() || it->second.type.empty()) continue;
    const int k = schema.type_index(it->second.type);
    check(k >= 0, "lexicon references unknown attribute type '" + it->second.type + "'");
    if (labels[k] != kAbsent) continue;  // first match wins
    const int cls = schema.class_index(k, it->second.cls);
    check(cls >= 0, "lexicon references unknown attribute class '" + it->second.cls +
                        "' of type " + it->second.type);
    labels[k] = cls;
  }
  return labels;
}

std::vector<std::string> Lexicon::subject_tokens(
    const std::vector<std::string>& tokens) const {
  int head = -1, first_noun = -1;
  for (size_t i = 0; i < tokens.size(); ++i) {
    auto it = words.find(tokens[i]);
    if (it == words.end()) continue;
    if (it->second.subject_head) {
      head = static_cast<int>(i);
      break;
    }
    if (it->second.noun && first_noun < 0) first_noun = static_cast<int>(i);
  }
  const int end = head >= 0 ? head : first_noun;
  if (end < 0) return {};
  return std::vector<std::string>(tokens.begin(), tokens.begin() + end + 1);
}

std::vector<std::string> Lexicon::noun_tokens(
    const std::vector<std::string>& tokens) const {
  std::vector<std::string> out;
  for (const auto& tok : tokens) {
    auto it = words.find(tok);
    if (it != words.end() && it->second.noun) out.push_back(tok);
  }
  return out;
}

namespace {

bool nouny_type(const std::string& type) {
  return type == "entrylevel" || type == "upclothes_style" || type == "accessory" ||
         type == "relative_object" || type == "relative_location";
}

}  // namespace

Lexicon lexicon_from_schema(const AttributeSchema& schema) {
  Lexicon lex;
  for (const auto& t : schema.types)
    for (const auto& c : t.classes) {
      if (lex.words.count(c)) continue;  // first type owning a word keeps it
      lex.add(c, t.name, c, nouny_type(t.name), t.name == "entrylevel");
    }
  return lex;
}

AttributeSchema default_schema() {
  AttributeSchema s;
  s.types = {
      {"entrylevel", {"person", "man", "woman", "boy", "girl", "kid"}, {}},
      {"gender", {"male", "female"}, {}},
      {"upclothes_style",
       {"t-shirt", "shirt", "coat", "jacket", "hoodie", "sweater", "dress", "vest",
        "suit", "tank-top", "blouse", "polo"},
       {}},
      {"upclothes_color",
       {"white", "black", "red", "blue", "green", "yellow", "orange", "purple", "pink",
        "brown", "gray", "cyan", "navy", "beige", "magenta", "olive"},
       {}},
      {"relative_location",
       {"top-left", "top", "top-right", "left", "center", "right", "bottom-left",
        "bottom", "bottom-right"},
       {}},
      {"relative_object",
       {"ball", "bag", "umbrella", "bench", "tree", "car", "bicycle", "chair", "table",
        "dog", "sign", "cart", "box", "door", "window"},
       {}},
      {"action",
       {"standing", "sitting", "walking", "running", "riding", "bending", "waving",
        "jumping", "holding", "carrying", "pointing", "squatting", "leaning", "lying"},
       {}},
      {"accessory",
       {"hat", "backpack", "glasses", "scarf", "watch", "cap", "helmet", "mask",
        "headphones", "tie", "belt", "gloves"},
       {}},
  };
  s.validate();
  return s;
}

Lexicon default_lexicon(const AttributeSchema& schema) {
  Lexicon lex;
  // People words signal gender; the bare entry-level nouns keep their own type.
  lex.add("man", "gender", "male", /*noun=*/true, /*subject=*/true);
  lex.add("men", "gender", "male", true, true);
  lex.add("male", "gender", "male");
  lex.add("guy", "gender", "male", true, true);
  lex.add("woman", "gender", "female", true, true);
  lex.add("women", "gender", "female", true, true);
  lex.add("female", "gender", "female");
  lex.add("lady", "gender", "female", true, true);
  lex.add("person", "entrylevel", "person", true, true);
  lex.add("boy", "entrylevel", "boy", true, true);
  lex.add("girl", "entrylevel", "girl", true, true);
  lex.add("kid", "entrylevel", "kid", true, true);
  lex.add("child", "entrylevel", "kid", true, true);

  for (const auto& t : schema.types) {
    if (t.name == "entrylevel" || t.name == "gender") continue;
    for (const auto& c : t.classes)
      if (!lex.words.count(c)) lex.add(c, t.name, c, nouny_type(t.name));
  }
  // common synonyms
  if (schema.type_index("upclothes_color") >= 0 &&
      schema.class_index(schema.type_index("upclothes_color"), "gray") >= 0)
    lex.add("grey", "upclothes_color", "gray");
  if (schema.type_index("upclothes_style") >= 0 &&
      schema.class_index(schema.type_index("upclothes_style"), "t-shirt") >= 0)
    lex.add("tshirt", "upclothes_style", "t-shirt", true);
  if (schema.type_index("relative_location") >= 0 &&
      schema.class_index(schema.type_index("relative_location"), "center") >= 0)
    lex.add("middle", "relative_location", "center", true);
  return lex;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u) || ch == '-') {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace cg
