#pragma once
// Natural-language realization of (subgraph, logical form) pairs.
//
// Each relation maps to an affirmative and a negative predicate phrase
// ("is capable of" / "is not capable of"). Each of the 14 forms has a fixed
// sentence skeleton choosing which predicates appear, whether each one is
// negated, and the connective between them. Realization is deterministic:
// same inputs, same bytes.

#include <array>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kbmcq/error.hpp"
#include "kbmcq/kb.hpp"
#include "kbmcq/logic.hpp"

namespace kbmcq {

struct LexiconEntry {
  std::string affirmative;
  std::string negative;

  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

namespace detail {

// "CapableOf" -> "capable of"
inline std::string decamelize(std::string_view name) {
  std::string out;
  out.reserve(name.size() + 4);
  for (std::size_t i = 0; i < name.size(); ++i) {
    const char c = name[i];
    if (c >= 'A' && c <= 'Z') {
      if (i > 0) out.push_back(' ');
      out.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (c == '/' || c == '_') {
      out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

class RelationLexicon {
 public:
  // Covers the common ConceptNet relations; anything else goes through the
  // decamelized fallback unless fallback is disabled.
  static RelationLexicon builtin_defaults() {
    RelationLexicon lex;
    lex.set("Antonym", {"is an antonym of", "is not an antonym of"});
    lex.set("RelatedTo", {"is related to", "is not related to"});
    lex.set("CapableOf", {"is capable of", "is not capable of"});
    lex.set("IsA", {"is a kind of", "is not a kind of"});
    lex.set("HasA", {"has", "does not have"});
    lex.set("PartOf", {"is part of", "is not part of"});
    lex.set("AtLocation", {"is located at", "is not located at"});
    lex.set("Causes", {"causes", "does not cause"});
    lex.set("UsedFor", {"is used for", "is not used for"});
    lex.set("Desires", {"desires", "does not desire"});
    lex.set("HasProperty", {"has the property of", "does not have the property of"});
    lex.set("Synonym", {"is a synonym of", "is not a synonym of"});
    lex.set("MadeOf", {"is made of", "is not made of"});
    lex.set("HasSubevent", {"has a subevent of", "does not have a subevent of"});
    return lex;
  }

  void set(std::string_view relation, LexiconEntry entry) {
    entries_[std::string(relation)] = std::move(entry);
  }

  void set_fallback_enabled(bool enabled) { fallback_enabled_ = enabled; }
  bool fallback_enabled() const { return fallback_enabled_; }

  bool has(std::string_view relation) const {
    return entries_.find(std::string(relation)) != entries_.end();
  }

  // Phrase pair for a relation name. Unmapped relations fall back to
  // "is <decamelized name> of" / "is not <decamelized name> of".
  LexiconEntry resolve(std::string_view relation) const {
    auto it = entries_.find(std::string(relation));
    if (it != entries_.end()) return it->second;
    if (!fallback_enabled_)
      throw_error(Errc::missing_lexicon_entry,
                  "no lexicon entry for relation '" + std::string(relation) + "'");
    const std::string stem = detail::decamelize(relation);
    return LexiconEntry{"is " + stem + " of", "is not " + stem + " of"};
  }

  const std::map<std::string, LexiconEntry>& entries() const { return entries_; }

  std::string to_json() const {
    nlohmann::ordered_json doc;
    for (const auto& [name, entry] : entries_) {
      doc[name] = {{"affirmative", entry.affirmative}, {"negative", entry.negative}};
    }
    return doc.dump(2);
  }

 private:
  std::map<std::string, LexiconEntry> entries_;
  bool fallback_enabled_ = true;
};

// Loads a lexicon document and merges it over the built-in defaults.
// Schema: { "RelationName": {"affirmative": "...", "negative": "..."} , ...}.
// Duplicate relation keys resolve last-wins and are reported as warnings.
inline RelationLexicon parse_lexicon(std::string_view text,
                                     std::vector<std::string>* warnings = nullptr) {
  std::vector<std::string> top_keys;
  int depth = 0;
  const auto track_keys = [&](int cb_depth, nlohmann::json::parse_event_t event,
                              nlohmann::json& parsed) {
    if (event == nlohmann::json::parse_event_t::key && cb_depth == 1)
      top_keys.push_back(parsed.get<std::string>());
    (void)depth;
    return true;
  };

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text, track_keys);
  } catch (const nlohmann::json::parse_error& e) {
    throw_error(Errc::lexicon_parse_error,
                "lexicon parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!doc.is_object())
    throw_error(Errc::lexicon_parse_error, "lexicon root must be a JSON object");

  if (warnings) {
    std::map<std::string, int> seen;
    for (const auto& k : top_keys)
      if (++seen[k] == 2)
        warnings->push_back("duplicate lexicon key '" + k + "': last entry wins");
  }

  RelationLexicon lex = RelationLexicon::builtin_defaults();
  for (const auto& [name, value] : doc.items()) {
    if (!value.is_object() || !value.contains("affirmative") || !value.contains("negative") ||
        !value["affirmative"].is_string() || !value["negative"].is_string())
      throw_error(Errc::lexicon_parse_error,
                  "lexicon entry '" + name + "' must carry string fields 'affirmative' and 'negative'");
    LexiconEntry entry{value["affirmative"].get<std::string>(),
                       value["negative"].get<std::string>()};
    if (entry.negative.find("not") == std::string::npos)
      throw_error(Errc::lexicon_parse_error,
                  "lexicon entry '" + name + "': negative phrase lacks a negation marker");
    lex.set(name, std::move(entry));
  }
  return lex;
}

inline RelationLexicon load_lexicon(const std::string& path,
                                    std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(Errc::io_error, "cannot open lexicon file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_lexicon(text, warnings);
}

// Sentence pattern of one form: which predicates appear, their polarity,
// and the glue text. The first predicate verbalizes (A R1 ?), the second
// (? R2 C); both read "<phrase> <entity>".
struct FormSkeleton {
  bool use_p1;
  bool p1_negated;
  bool use_p2;
  bool p2_negated;
  const char* connective;  // between the predicates, with outer spaces
  const char* suffix;      // trailing clause before the question mark
};

inline const std::array<FormSkeleton, kFormCount>& form_skeletons() {
  static const std::array<FormSkeleton, kFormCount> skeletons = {{
      {true, false, true, true, " and meanwhile ", ""},   // #0  p1 & !p2
      {true, false, true, false, " and meanwhile ", ""},  // #1  p1 & p2
      {true, false, false, false, "", ""},                // #2  p1
      {true, true, true, false, " and meanwhile ", ""},   // #3  !p1 & p2
      {true, false, true, false, " or ", ", but not both of them"},  // #4  p1 xor p2
      {false, false, true, false, "", ""},                // #5  p2
      {true, false, true, false, " or ", ""},             // #6  p1 | p2
      {true, true, true, true, " and ", ""},              // #7  !p1 & !p2
      {false, false, true, true, "", ""},                 // #8  !p2
      {true, false, true, false, " and ", ", or neither of them"},  // #9  p1 xnor p2
      {true, false, true, true, " or ", ""},              // #10 p1 | !p2
      {true, true, false, false, "", ""},                 // #11 !p1
      {true, true, true, true, " or ", ""},               // #12 !p1 | !p2
      {true, true, true, false, " or ", ""},              // #13 !p1 | p2
  }};
  return skeletons;
}

// Realizes the question text. Entity surfaces come from the KB string
// table; predicate polarity follows the form's formula. Single terminal
// question mark, no space before it.
inline std::string realize_question(const SubgraphPair& sg, const LogicalForm& f,
                                    const RelationLexicon& lex, const KnowledgeBase& kb) {
  if (f.index < 0 || f.index >= kFormCount)
    throw_error(Errc::invalid_form, "logical form index outside [0, 13]");
  const FormSkeleton& sk = form_skeletons()[static_cast<std::size_t>(f.index)];

  std::string out = "which of the following ";
  if (sk.use_p1) {
    const LexiconEntry e1 = lex.resolve(kb.relation_name(sg.r1));
    out += sk.p1_negated ? e1.negative : e1.affirmative;
    out += ' ';
    out += kb.entity_name(sg.a);
  }
  if (sk.use_p1 && sk.use_p2) out += sk.connective;
  if (sk.use_p2) {
    const LexiconEntry e2 = lex.resolve(kb.relation_name(sg.r2));
    out += sk.p2_negated ? e2.negative : e2.affirmative;
    out += ' ';
    out += kb.entity_name(sg.c);
  }
  out += sk.suffix;
  out += '?';
  return out;
}

}  // namespace kbmcq
