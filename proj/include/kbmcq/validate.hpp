#pragma once
// Independent dataset checker. Re-derives every record's label from the KB
// triples alone: schema conformance, metadata resolution, subgraph sanity,
// and the membership oracle on every choice. Shares no code with the
// generation-side samplers beyond the KB accessors.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kbmcq/error.hpp"
#include "kbmcq/gzio.hpp"
#include "kbmcq/kb.hpp"
#include "kbmcq/logic.hpp"
#include "kbmcq/sampler.hpp"

namespace kbmcq {

struct Violation {
  std::uint64_t line_no = 0;
  std::string id;  // empty when the record was unparseable
  std::string reason;
};

struct ValidationReport {
  std::uint64_t records = 0;
  std::uint64_t violations = 0;
  std::vector<Violation> sample;  // first ten offending records

  bool clean() const { return violations == 0; }
};

namespace detail {

// First problem found in one parsed record, or nullopt when it is sound.
inline std::optional<std::string> check_record(const KnowledgeBase& kb,
                                               const nlohmann::json& j) {
  if (!j.is_object()) return "record is not a JSON object";
  for (const char* key : {"id", "question", "choices", "answer", "meta"})
    if (!j.contains(key)) return std::string("missing field '") + key + "'";
  if (!j["id"].is_string()) return "field 'id' must be a string";
  if (!j["question"].is_string()) return "field 'question' must be a string";
  if (!j["choices"].is_array()) return "field 'choices' must be an array";
  if (!j["answer"].is_number_integer()) return "field 'answer' must be an integer";
  if (!j["meta"].is_object()) return "field 'meta' must be an object";

  const auto& choices = j["choices"];
  if (choices.size() < 2) return "fewer than two choices";
  for (const auto& c : choices)
    if (!c.is_string()) return "non-string choice";
  for (std::size_t i = 0; i < choices.size(); ++i)
    for (std::size_t k = i + 1; k < choices.size(); ++k)
      if (choices[i].get<std::string>() == choices[k].get<std::string>())
        return "duplicate choice '" + choices[i].get<std::string>() + "'";

  const std::int64_t answer = j["answer"].get<std::int64_t>();
  if (answer < 0 || answer >= static_cast<std::int64_t>(choices.size()))
    return "answer index " + std::to_string(answer) + " outside [0, " +
           std::to_string(choices.size()) + ")";

  const auto& meta = j["meta"];
  for (const char* key : {"head", "rel1", "bridge", "rel2", "tail"})
    if (!meta.contains(key) || !meta[key].is_string())
      return std::string("meta field '") + key + "' missing or not a string";
  if (!meta.contains("form") || !meta["form"].is_number_integer())
    return "meta field 'form' missing or not an integer";
  if (!meta.contains("strategy") || !meta["strategy"].is_string())
    return "meta field 'strategy' missing or not a string";
  if (!strategy_from_name(meta["strategy"].get<std::string>()))
    return "unknown strategy '" + meta["strategy"].get<std::string>() + "'";

  const std::int64_t form_index = meta["form"].get<std::int64_t>();
  if (form_index < 0 || form_index >= kFormCount)
    return "form index " + std::to_string(form_index) + " outside [0, 13]";
  const LogicalForm form = form_by_index(static_cast<int>(form_index));

  const auto a = kb.find_entity(meta["head"].get<std::string>());
  const auto r1 = kb.find_relation(meta["rel1"].get<std::string>());
  const auto b = kb.find_entity(meta["bridge"].get<std::string>());
  const auto r2 = kb.find_relation(meta["rel2"].get<std::string>());
  const auto c = kb.find_entity(meta["tail"].get<std::string>());
  if (!a) return "unknown head entity '" + meta["head"].get<std::string>() + "'";
  if (!r1) return "unknown relation '" + meta["rel1"].get<std::string>() + "'";
  if (!b) return "unknown bridge entity '" + meta["bridge"].get<std::string>() + "'";
  if (!r2) return "unknown relation '" + meta["rel2"].get<std::string>() + "'";
  if (!c) return "unknown tail entity '" + meta["tail"].get<std::string>() + "'";

  if (*a == *b || *b == *c || *a == *c) return "subgraph entities are not pairwise distinct";
  if (*r1 == *r2) return "subgraph relations are not distinct";
  if (!kb.has_triple(*a, *r1, *b)) return "first-hop triple absent from the KB";
  if (!kb.has_triple(*b, *r2, *c)) return "second-hop triple absent from the KB";

  const SubgraphPair sg{*a, *r1, *b, *r2, *c};
  for (std::size_t i = 0; i < choices.size(); ++i) {
    const std::string text = choices[i].get<std::string>();
    const auto x = kb.find_entity(text);
    if (!x) return "choice '" + text + "' is not a KB entity";
    const bool satisfies = eval_form_membership(kb, sg, form, *x);
    const bool keyed = static_cast<std::int64_t>(i) == answer;
    if (keyed && !satisfies)
      return "keyed choice '" + text + "' fails the membership oracle";
    if (!keyed && satisfies)
      return "distractor '" + text + "' passes the membership oracle";
  }
  return std::nullopt;
}

}  // namespace detail

inline ValidationReport validate_dataset(const KnowledgeBase& kb, const std::string& path) {
  GzLineSource source(path);
  ValidationReport report;
  std::string line;
  std::uint64_t line_no = 0;
  while (source.next_line(line)) {
    ++line_no;
    ++report.records;
    std::string id;
    std::optional<std::string> problem;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      problem = "line is not valid JSON";
    } else {
      if (j.is_object() && j.contains("id") && j["id"].is_string())
        id = j["id"].get<std::string>();
      problem = detail::check_record(kb, j);
    }
    if (problem) {
      ++report.violations;
      if (report.sample.size() < 10)
        report.sample.push_back(Violation{line_no, id, *problem});
    }
  }
  return report;
}

}  // namespace kbmcq
