#pragma once

#include <map>
#include <string>
#include <vector>

#include "cg/schema.hpp"

namespace cg {

// Keyword table driving attribute parsing and the expression-degradation
// modes. Every keyword maps to at most one (type, class); the noun/subject
// flags are independent of that mapping (a word can be a noun and still
// signal, say, a gender class).
struct Lexicon {
  struct WordInfo {
    std::string type;  // empty when the word carries no attribute
    std::string cls;
    bool noun = false;
    bool subject_head = false;
  };

  std::map<std::string, WordInfo> words;

  void add(const std::string& word, const std::string& type, const std::string& cls,
           bool noun = false, bool subject_head = false);
  void add_plain(const std::string& word, bool noun, bool subject_head = false);

  // For each type, the class of the first matching keyword, else kAbsent.
  // Unknown words are ignored. Result has schema.k() entries.
  std::vector<int> parse(const std::vector<std::string>& tokens,
                         const AttributeSchema& schema) const;

  // Leading tokens up to and including the first subject-head noun
  // (falling back to the first noun); empty when the expression has none.
  std::vector<std::string> subject_tokens(const std::vector<std::string>& tokens) const;

  // All noun-flagged tokens, order preserved.
  std::vector<std::string> noun_tokens(const std::vector<std::string>& tokens) const;
};

// Generic lexicon: every class name of the schema becomes its own keyword.
// Types whose values are object-like (entrylevel, clothing styles,
// accessories, relative objects, locations) get noun flags.
Lexicon lexicon_from_schema(const AttributeSchema& schema);

// Keyword table for the default taxonomy, with the usual English synonyms
// ("man" signals the male gender class, "grey" maps to gray, ...).
Lexicon default_lexicon(const AttributeSchema& schema);

// The default 8-type, 86-class taxonomy.
AttributeSchema default_schema();

// lower-cases and splits on whitespace, stripping punctuation except '-'
std::vector<std::string> tokenize(const std::string& text);

}  // namespace cg
