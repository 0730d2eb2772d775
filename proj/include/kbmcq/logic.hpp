#pragma once
// Boolean set algebra over a two-hop subgraph.
//
// A subgraph (A -R1-> B -R2-> C) induces two adjacency sets over the entity
// universe: the tails of (A, R1) and the heads of (R2, C). Membership in
// those two sets partitions the universe into four disjoint cells:
//
//   S1 = in first only    S2 = in both    S3 = in second only    S4 = in neither
//
// A logical form is a nonempty, non-full selection of cells, identified by a
// 4-bit mask (bit k selects cell k+1). Excluding the empty and full masks
// leaves 14 forms; form index = mask - 1. An answer set is the union of the
// selected cells.

#include <algorithm>
#include <array>
#include <cstdint>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "kbmcq/error.hpp"
#include "kbmcq/kb.hpp"

namespace kbmcq {

inline constexpr int kFormCount = 14;

enum class S4Mode {
  exact,        // the complement cell is materialized
  approximate,  // the complement cell stays implicit; draws treat it as the
                // whole universe and verify membership per draw
};

struct LogicalForm {
  int index = 0;      // 0..13
  unsigned mask = 1;  // bit0=S1 .. bit3=S4; always index + 1

  bool selects(int cell) const { return (mask >> cell & 1u) != 0; }
  bool selects_s4() const { return selects(3); }

  friend bool operator==(const LogicalForm&, const LogicalForm&) = default;
};

inline LogicalForm form_by_index(int index) {
  if (index < 0 || index >= kFormCount)
    throw_error(Errc::invalid_form, "logical form index " + std::to_string(index) +
                                        " outside [0, 13]");
  return LogicalForm{index, static_cast<unsigned>(index) + 1u};
}

inline std::array<LogicalForm, kFormCount> enumerate_forms() {
  std::array<LogicalForm, kFormCount> forms;
  for (int i = 0; i < kFormCount; ++i) forms[i] = form_by_index(i);
  return forms;
}

// The four cells induced by a subgraph. s1..s3 are always materialized as
// sorted id vectors; s4 is materialized only in exact mode, but its size is
// known in either mode since the cells partition the universe.
struct Partition {
  S4Mode mode = S4Mode::exact;
  std::uint32_t universe = 0;
  std::vector<EntityId> r1_set;  // tails of (A, R1)
  std::vector<EntityId> r2_set;  // heads of (R2, C)
  std::vector<EntityId> s1;
  std::vector<EntityId> s2;
  std::vector<EntityId> s3;
  std::vector<EntityId> s4;  // exact mode only

  std::uint64_t s4_size() const {
    return static_cast<std::uint64_t>(universe) - s1.size() - s2.size() - s3.size();
  }

  std::uint64_t cell_size(int cell) const {
    switch (cell) {
      case 0: return s1.size();
      case 1: return s2.size();
      case 2: return s3.size();
      case 3: return s4_size();
      default: throw_error(Errc::invalid_handle, "cell index outside [0, 3]");
    }
  }

  // Materialized ids of a cell; requesting S4 in approximate mode is an error.
  const std::vector<EntityId>& cell(int cell) const {
    switch (cell) {
      case 0: return s1;
      case 1: return s2;
      case 2: return s3;
      case 3:
        if (mode != S4Mode::exact)
          throw_error(Errc::requires_exact_mode,
                      "S4 is implicit in approximate mode; recompute the partition in exact mode");
        return s4;
      default: throw_error(Errc::invalid_handle, "cell index outside [0, 3]");
    }
  }

  std::uint64_t answer_size(const LogicalForm& f) const {
    std::uint64_t n = 0;
    for (int c = 0; c < 4; ++c)
      if (f.selects(c)) n += cell_size(c);
    return n;
  }

  std::uint64_t wrong_size(const LogicalForm& f) const {
    return universe - answer_size(f);
  }

  // Cell index of an arbitrary entity, by membership in the two hop sets.
  // Works in both modes; never touches the materialized cells.
  int locate(EntityId x) const {
    const bool in1 = std::binary_search(r1_set.begin(), r1_set.end(), x);
    const bool in2 = std::binary_search(r2_set.begin(), r2_set.end(), x);
    if (in1) return in2 ? 1 : 0;
    return in2 ? 2 : 3;
  }
};

inline Partition compute_partition(const KnowledgeBase& kb, const SubgraphPair& sg,
                                   S4Mode mode = S4Mode::exact) {
  if (!kb.has_triple(sg.a, sg.r1, sg.b) || !kb.has_triple(sg.b, sg.r2, sg.c))
    throw_error(Errc::inconsistent_subgraph, "subgraph edges are not present in the KB");

  const auto r1_tails = kb.tails_of(sg.a, sg.r1);
  const auto r2_heads = kb.heads_of(sg.r2, sg.c);

  Partition p;
  p.mode = mode;
  p.universe = kb.entity_count();
  p.r1_set.assign(r1_tails.begin(), r1_tails.end());
  p.r2_set.assign(r2_heads.begin(), r2_heads.end());
  std::set_difference(r1_tails.begin(), r1_tails.end(), r2_heads.begin(), r2_heads.end(),
                      std::back_inserter(p.s1));
  std::set_intersection(r1_tails.begin(), r1_tails.end(), r2_heads.begin(), r2_heads.end(),
                        std::back_inserter(p.s2));
  std::set_difference(r2_heads.begin(), r2_heads.end(), r1_tails.begin(), r1_tails.end(),
                      std::back_inserter(p.s3));
  if (mode == S4Mode::exact) {
    std::vector<EntityId> covered;
    covered.reserve(p.r1_set.size() + p.s3.size());
    std::set_union(r1_tails.begin(), r1_tails.end(), r2_heads.begin(), r2_heads.end(),
                   std::back_inserter(covered));
    p.s4.reserve(p.universe - covered.size());
    std::size_t k = 0;
    for (EntityId x = 0; x < p.universe; ++x) {
      if (k < covered.size() && covered[k] == x) {
        ++k;
      } else {
        p.s4.push_back(x);
      }
    }
  }
  return p;
}

// Union of the selected cells, sorted. S4-selecting forms need exact mode.
inline std::vector<EntityId> answer_set(const Partition& p, const LogicalForm& f) {
  std::vector<EntityId> out;
  for (int c = 0; c < 4; ++c) {
    if (!f.selects(c)) continue;
    const auto& cell = p.cell(c);
    if (out.empty()) {
      out = cell;
    } else {
      std::vector<EntityId> merged;
      merged.reserve(out.size() + cell.size());
      std::merge(out.begin(), out.end(), cell.begin(), cell.end(), std::back_inserter(merged));
      out.swap(merged);
    }
  }
  return out;
}

// Truth-table cell of x: evaluates the two membership predicates directly
// against the KB. (true, false) -> 0, (true, true) -> 1, (false, true) -> 2,
// (false, false) -> 3. Independent of Partition.
inline int cell_of(const KnowledgeBase& kb, const SubgraphPair& sg, EntityId x) {
  const bool p1 = kb.has_triple(sg.a, sg.r1, x);
  const bool p2 = kb.has_triple(x, sg.r2, sg.c);
  if (p1) return p2 ? 1 : 0;
  return p2 ? 2 : 3;
}

// Membership oracle: true iff x lies in form f's answer set. Evaluates the
// Boolean formula of the form from the raw predicates, bypassing Partition.
inline bool eval_form_membership(const KnowledgeBase& kb, const SubgraphPair& sg,
                                 const LogicalForm& f, EntityId x) {
  return f.selects(cell_of(kb, sg, x));
}

// Per-subgraph 14-bit validity vector: bit i set iff form i has a nonempty
// answer set. Cells are disjoint, so nonemptiness ORs over selected cells.
struct ValidityMask {
  std::array<bool, kFormCount> bits{};

  bool operator[](int i) const { return bits[static_cast<std::size_t>(i)]; }

  unsigned packed() const {
    unsigned v = 0;
    for (int i = 0; i < kFormCount; ++i)
      if (bits[static_cast<std::size_t>(i)]) v |= 1u << i;
    return v;
  }
};

inline ValidityMask compute_validity_mask(const Partition& p) {
  const bool nonempty[4] = {!p.s1.empty(), !p.s2.empty(), !p.s3.empty(), p.s4_size() > 0};
  ValidityMask m;
  for (int i = 0; i < kFormCount; ++i) {
    const LogicalForm f = form_by_index(i);
    bool v = false;
    for (int c = 0; c < 4; ++c) v = v || (f.selects(c) && nonempty[c]);
    m.bits[static_cast<std::size_t>(i)] = v;
  }
  return m;
}

// Canonical ASCII rendering of a form's Boolean formula. Injective over the
// 14 forms; frozen (golden-file tested through the show-forms command).
inline std::string render_form(const LogicalForm& f) {
  static constexpr const char* kRenderings[kFormCount] = {
      "(A R1 ?) AND NOT(? R2 C)",                             // #0  {S1}
      "(A R1 ?) AND (? R2 C)",                                // #1  {S2}
      "(A R1 ?)",                                             // #2  {S1,S2}
      "NOT(A R1 ?) AND (? R2 C)",                             // #3  {S3}
      "((A R1 ?) OR (? R2 C)) AND NOT((A R1 ?) AND (? R2 C))", // #4 {S1,S3}
      "(? R2 C)",                                             // #5  {S2,S3}
      "(A R1 ?) OR (? R2 C)",                                 // #6  {S1,S2,S3}
      "NOT(A R1 ?) AND NOT(? R2 C)",                          // #7  {S4}
      "NOT(? R2 C)",                                          // #8  {S1,S4}
      "((A R1 ?) AND (? R2 C)) OR (NOT(A R1 ?) AND NOT(? R2 C))", // #9 {S2,S4}
      "(A R1 ?) OR NOT(? R2 C)",                              // #10 {S1,S2,S4}
      "NOT(A R1 ?)",                                          // #11 {S3,S4}
      "NOT(A R1 ?) OR NOT(? R2 C)",                           // #12 {S1,S3,S4}
      "NOT(A R1 ?) OR (? R2 C)",                              // #13 {S2,S3,S4}
  };
  if (f.index < 0 || f.index >= kFormCount)
    throw_error(Errc::invalid_form, "logical form index outside [0, 13]");
  return kRenderings[f.index];
}

}  // namespace kbmcq
