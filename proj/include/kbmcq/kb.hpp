#pragma once
// Knowledge base store: interned entities/relations, a deduplicated triple
// set, and forward/backward adjacency indexes.
//
// Layout after construction (immutable):
//   heads_/rels_/tails_  triple columns sorted by (head, rel, tail)
//   fwd_                 (head, rel) -> [offset, length) slice of tails_
//   bwd_heads_           head column re-sorted by (tail, rel, head)
//   bwd_                 (tail, rel) -> [offset, length) slice of bwd_heads_
//   out_adj_/in_adj_     per-entity relation group lists for ordered iteration
//
// Cache file (kb.cache):
//   magic, format version, source checksum, counts,
//   entity strings, relation strings, triple columns, backward permutation,
//   end sentinel

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "kbmcq/error.hpp"
#include "kbmcq/gzio.hpp"
#include "kbmcq/rng.hpp"
#include "kbmcq/version.hpp"

namespace kbmcq {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend bool operator<(const Triple& a, const Triple& b) {
    if (a.head != b.head) return a.head < b.head;
    if (a.relation != b.relation) return a.relation < b.relation;
    return a.tail < b.tail;
  }
};

// Two-hop chain A -R1-> B -R2-> C. Entities pairwise distinct, R1 != R2.
struct SubgraphPair {
  EntityId a;
  RelationId r1;
  EntityId b;
  RelationId r2;
  EntityId c;

  friend bool operator==(const SubgraphPair&, const SubgraphPair&) = default;
};

// One (entity, relation) adjacency run inside a flat neighbor column.
struct AdjGroup {
  RelationId relation;
  std::uint32_t offset;
  std::uint32_t length;
};

struct IngestReport {
  std::uint64_t lines_total = 0;
  std::uint64_t kept = 0;        // unique triples stored
  std::uint64_t rejected = 0;    // malformed lines
  std::uint64_t non_english = 0; // dropped by the language filter
  std::uint64_t duplicates = 0;  // well-formed repeats of a stored triple
  std::uint64_t self_loops = 0;  // head == tail, stored but never enumerated
  std::uint64_t source_checksum = kFnvOffset;
};

struct ParseOptions {
  bool english_only = true;
  bool strict = false;  // abort on the first malformed line
};

namespace detail {

inline constexpr std::uint32_t kCacheMagic = 0x314D514BU;       // "KQM1"
inline constexpr std::uint32_t kCacheEndSentinel = 0x444E454BU; // "KEND"

inline std::uint64_t adj_key(std::uint32_t e, std::uint32_t r) {
  return (static_cast<std::uint64_t>(e) << 32) | r;
}

// "/c/en/sit_up/v/wn" -> "sit up": segment after the language code,
// underscores to spaces, ASCII lowercase.
inline std::string normalize_concept(std::string_view after_lang) {
  const std::size_t slash = after_lang.find('/');
  if (slash != std::string_view::npos) after_lang = after_lang.substr(0, slash);
  std::string s;
  s.reserve(after_lang.size());
  for (char c : after_lang) {
    if (c == '_') {
      s.push_back(' ');
    } else if (c >= 'A' && c <= 'Z') {
      s.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      s.push_back(c);
    }
  }
  return s;
}

inline bool contains_sorted(std::span<const EntityId> xs, EntityId x) {
  return std::binary_search(xs.begin(), xs.end(), x);
}

}  // namespace detail

class KnowledgeBase {
 public:
  KnowledgeBase() = default;

  std::uint32_t entity_count() const { return static_cast<std::uint32_t>(entity_names_.size()); }
  std::uint32_t relation_count() const { return static_cast<std::uint32_t>(relation_names_.size()); }
  std::uint64_t triple_count() const { return heads_.size(); }

  std::string_view entity_name(EntityId id) const {
    check_entity(id);
    return entity_names_[id];
  }
  std::string_view relation_name(RelationId id) const {
    check_relation(id);
    return relation_names_[id];
  }

  std::optional<EntityId> find_entity(std::string_view name) const {
    auto it = entity_index_.find(std::string(name));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<RelationId> find_relation(std::string_view name) const {
    auto it = relation_index_.find(std::string(name));
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
  }

  Triple triple(std::uint64_t i) const {
    if (i >= heads_.size()) throw_error(Errc::invalid_handle, "triple index out of range");
    return Triple{heads_[i], rels_[i], tails_[i]};
  }

  // {X : (a, r, X) in KB}, sorted ascending.
  std::span<const EntityId> tails_of(EntityId a, RelationId r) const {
    check_entity(a);
    check_relation(r);
    auto it = fwd_.find(detail::adj_key(a, r));
    if (it == fwd_.end()) return {};
    return std::span<const EntityId>(tails_).subspan(it->second.offset, it->second.length);
  }

  // {X : (X, r, c) in KB}, sorted ascending.
  std::span<const EntityId> heads_of(RelationId r, EntityId c) const {
    check_entity(c);
    check_relation(r);
    auto it = bwd_.find(detail::adj_key(c, r));
    if (it == bwd_.end()) return {};
    return std::span<const EntityId>(bwd_heads_).subspan(it->second.offset, it->second.length);
  }

  bool has_triple(EntityId a, RelationId r, EntityId x) const {
    return detail::contains_sorted(tails_of(a, r), x);
  }

  // Relation groups of an entity, ascending by relation id.
  std::span<const AdjGroup> out_groups(EntityId e) const {
    check_entity(e);
    return std::span<const AdjGroup>(out_adj_)
        .subspan(out_adj_offsets_[e], out_adj_offsets_[e + 1] - out_adj_offsets_[e]);
  }
  std::span<const AdjGroup> in_groups(EntityId e) const {
    check_entity(e);
    return std::span<const AdjGroup>(in_adj_)
        .subspan(in_adj_offsets_[e], in_adj_offsets_[e + 1] - in_adj_offsets_[e]);
  }
  std::span<const EntityId> group_tails(const AdjGroup& g) const {
    return std::span<const EntityId>(tails_).subspan(g.offset, g.length);
  }
  std::span<const EntityId> group_heads(const AdjGroup& g) const {
    return std::span<const EntityId>(bwd_heads_).subspan(g.offset, g.length);
  }

  // Hash of the parsed dump bytes; recorded for provenance.
  std::uint64_t source_checksum() const { return source_checksum_; }

  // Content hash over all tables; identifies the KB in dataset summaries.
  std::uint64_t checksum() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& s : entity_names_) {
      h = fnv1a64(s, h);
      h = fnv1a64("\x1f", h);
    }
    for (const auto& s : relation_names_) {
      h = fnv1a64(s, h);
      h = fnv1a64("\x1f", h);
    }
    for (std::size_t i = 0; i < heads_.size(); ++i) {
      h = fnv1a64_u64((static_cast<std::uint64_t>(heads_[i]) << 32) | tails_[i], h);
      h = fnv1a64_u64(rels_[i], h);
    }
    return h;
  }

  bool operator==(const KnowledgeBase& other) const {
    return entity_names_ == other.entity_names_ && relation_names_ == other.relation_names_ &&
           heads_ == other.heads_ && rels_ == other.rels_ && tails_ == other.tails_ &&
           source_checksum_ == other.source_checksum_;
  }

  void save(const std::string& path) const;
  static KnowledgeBase load(const std::string& path);

  friend KnowledgeBase parse_kb(LineSource& src, const ParseOptions& opt, IngestReport* report);

 private:
  struct Range {
    std::uint32_t offset;
    std::uint32_t length;
  };

  void check_entity(EntityId id) const {
    if (id >= entity_names_.size())
      throw_error(Errc::invalid_handle, "entity id " + std::to_string(id) + " out of range");
  }
  void check_relation(RelationId id) const {
    if (id >= relation_names_.size())
      throw_error(Errc::invalid_handle, "relation id " + std::to_string(id) + " out of range");
  }

  // Sorts, deduplicates and indexes the raw triple list. `raw` is consumed.
  void finalize(std::vector<Triple>&& raw, IngestReport* report) {
    std::sort(raw.begin(), raw.end());
    const auto last = std::unique(raw.begin(), raw.end());
    if (report) report->duplicates = static_cast<std::uint64_t>(raw.end() - last);
    raw.erase(last, raw.end());

    const std::size_t n = raw.size();
    heads_.resize(n);
    rels_.resize(n);
    tails_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      heads_[i] = raw[i].head;
      rels_[i] = raw[i].relation;
      tails_[i] = raw[i].tail;
      if (report && raw[i].head == raw[i].tail) ++report->self_loops;
    }
    if (report) report->kept = n;

    bwd_order_.resize(n);
    std::iota(bwd_order_.begin(), bwd_order_.end(), 0u);
    std::sort(bwd_order_.begin(), bwd_order_.end(), [&](std::uint32_t x, std::uint32_t y) {
      if (tails_[x] != tails_[y]) return tails_[x] < tails_[y];
      if (rels_[x] != rels_[y]) return rels_[x] < rels_[y];
      return heads_[x] < heads_[y];
    });
    build_indexes();
  }

  void build_indexes() {
    const std::size_t n = heads_.size();
    bwd_heads_.resize(n);
    for (std::size_t i = 0; i < n; ++i) bwd_heads_[i] = heads_[bwd_order_[i]];

    entity_index_.reserve(entity_names_.size());
    for (std::uint32_t i = 0; i < entity_names_.size(); ++i) entity_index_[entity_names_[i]] = i;
    relation_index_.reserve(relation_names_.size());
    for (std::uint32_t i = 0; i < relation_names_.size(); ++i)
      relation_index_[relation_names_[i]] = i;

    const std::uint32_t ecount = entity_count();
    fwd_.clear();
    bwd_.clear();
    out_adj_.clear();
    in_adj_.clear();
    out_adj_offsets_.assign(ecount + 1, 0);
    in_adj_offsets_.assign(ecount + 1, 0);

    // Forward runs over (head, rel): triples are already in that order.
    std::vector<std::vector<AdjGroup>> out_by_entity(ecount);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && heads_[j] == heads_[i] && rels_[j] == rels_[i]) ++j;
      const Range r{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j - i)};
      fwd_.emplace(detail::adj_key(heads_[i], rels_[i]), r);
      out_by_entity[heads_[i]].push_back(AdjGroup{rels_[i], r.offset, r.length});
      i = j;
    }
    // Backward runs over (tail, rel) through the permutation.
    std::vector<std::vector<AdjGroup>> in_by_entity(ecount);
    for (std::size_t i = 0; i < n;) {
      const EntityId t = tails_[bwd_order_[i]];
      const RelationId r = rels_[bwd_order_[i]];
      std::size_t j = i;
      while (j < n && tails_[bwd_order_[j]] == t && rels_[bwd_order_[j]] == r) ++j;
      const Range rr{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j - i)};
      bwd_.emplace(detail::adj_key(t, r), rr);
      in_by_entity[t].push_back(AdjGroup{r, rr.offset, rr.length});
      i = j;
    }
    for (std::uint32_t e = 0; e < ecount; ++e) {
      out_adj_offsets_[e] = static_cast<std::uint32_t>(out_adj_.size());
      out_adj_.insert(out_adj_.end(), out_by_entity[e].begin(), out_by_entity[e].end());
      in_adj_offsets_[e] = static_cast<std::uint32_t>(in_adj_.size());
      in_adj_.insert(in_adj_.end(), in_by_entity[e].begin(), in_by_entity[e].end());
    }
    out_adj_offsets_[ecount] = static_cast<std::uint32_t>(out_adj_.size());
    in_adj_offsets_[ecount] = static_cast<std::uint32_t>(in_adj_.size());
  }

  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;

  std::vector<EntityId> heads_;
  std::vector<RelationId> rels_;
  std::vector<EntityId> tails_;
  std::vector<std::uint32_t> bwd_order_;  // triple indexes sorted by (tail, rel, head)
  std::vector<EntityId> bwd_heads_;

  std::unordered_map<std::uint64_t, Range> fwd_;
  std::unordered_map<std::uint64_t, Range> bwd_;
  std::vector<AdjGroup> out_adj_;
  std::vector<AdjGroup> in_adj_;
  std::vector<std::uint32_t> out_adj_offsets_;
  std::vector<std::uint32_t> in_adj_offsets_;

  std::uint64_t source_checksum_ = kFnvOffset;
};

// ---------------------------------------------------------------------------
// Parsing

// Parses a ConceptNet-style assertion dump: tab-separated rows of
// (assertion-uri, relation-uri, start-uri, end-uri, metadata). Rows whose
// start or end lack the "/c/en/" prefix are dropped when english_only is set.
inline KnowledgeBase parse_kb(LineSource& src, const ParseOptions& opt = {},
                              IngestReport* report = nullptr) {
  KnowledgeBase kb;
  std::vector<Triple> raw;
  IngestReport local;
  IngestReport& rep = report ? *report : local;

  const auto intern = [](std::vector<std::string>& names,
                         std::unordered_map<std::string, std::uint32_t>& index,
                         std::string&& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names.size());
    names.push_back(name);
    index.emplace(std::move(name), id);
    return id;
  };

  std::string line;
  std::uint64_t line_no = 0;
  std::uint64_t checksum = kFnvOffset;
  while (src.next_line(line)) {
    ++line_no;
    ++rep.lines_total;
    checksum = fnv1a64(line, checksum);
    checksum = fnv1a64("\n", checksum);

    std::string_view sv(line);
    std::string_view fields[5];
    int nfields = 0;
    while (nfields < 5) {
      const std::size_t tab = sv.find('\t');
      if (tab == std::string_view::npos) {
        fields[nfields++] = sv;
        break;
      }
      fields[nfields++] = sv.substr(0, tab);
      sv = sv.substr(tab + 1);
    }

    const auto malformed = [&](const char* why) {
      if (opt.strict)
        throw_error(Errc::parse_error,
                    "line " + std::to_string(line_no) + ": " + why);
      ++rep.rejected;
    };

    if (nfields < 5) {
      malformed("expected 5 tab-separated fields");
      continue;
    }
    const std::string_view rel_uri = fields[1];
    const std::string_view start_uri = fields[2];
    const std::string_view end_uri = fields[3];
    if (!rel_uri.starts_with("/r/") || rel_uri.size() <= 3) {
      malformed("relation uri must start with /r/");
      continue;
    }
    if (!start_uri.starts_with("/c/") || !end_uri.starts_with("/c/")) {
      malformed("concept uris must start with /c/");
      continue;
    }
    if (opt.english_only &&
        (!start_uri.starts_with("/c/en/") || !end_uri.starts_with("/c/en/"))) {
      ++rep.non_english;
      continue;
    }

    // Past the "/c/<lang>/" prefix.
    const auto concept_body = [](std::string_view uri) -> std::string_view {
      const std::size_t lang_end = uri.find('/', 3);
      if (lang_end == std::string_view::npos || lang_end + 1 >= uri.size()) return {};
      return uri.substr(lang_end + 1);
    };
    const std::string start = detail::normalize_concept(concept_body(start_uri));
    const std::string end = detail::normalize_concept(concept_body(end_uri));
    if (start.empty() || end.empty()) {
      malformed("empty concept after normalization");
      continue;
    }

    const EntityId h = intern(kb.entity_names_, kb.entity_index_, std::string(start));
    const RelationId r =
        intern(kb.relation_names_, kb.relation_index_, std::string(rel_uri.substr(3)));
    const EntityId t = intern(kb.entity_names_, kb.entity_index_, std::string(end));
    raw.push_back(Triple{h, r, t});
  }

  rep.source_checksum = checksum;
  if (raw.empty()) throw_error(Errc::empty_kb, "no triples survived parsing");

  kb.entity_index_.clear();
  kb.relation_index_.clear();
  kb.source_checksum_ = checksum;
  kb.finalize(std::move(raw), &rep);
  return kb;
}

inline KnowledgeBase parse_kb(std::istream& in, const ParseOptions& opt = {},
                              IngestReport* report = nullptr) {
  StreamLineSource src(in);
  return parse_kb(src, opt, report);
}

// Opens a plain or gzip dump file.
inline KnowledgeBase parse_kb_file(const std::string& path, const ParseOptions& opt = {},
                                   IngestReport* report = nullptr) {
  GzLineSource src(path);
  return parse_kb(src, opt, report);
}

// ---------------------------------------------------------------------------
// Cache serialization

namespace detail {

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw_error(Errc::cache_corrupt, "truncated KB cache");
}

inline void write_string_table(std::ostream& out, const std::vector<std::string>& names) {
  for (const auto& s : names) {
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
}

inline void read_string_table(std::istream& in, std::uint32_t count,
                              std::vector<std::string>& names) {
  names.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t len;
    read_pod(in, len);
    if (len > (1u << 20)) throw_error(Errc::cache_corrupt, "implausible string length");
    names[i].resize(len);
    in.read(names[i].data(), len);
    if (!in) throw_error(Errc::cache_corrupt, "truncated KB cache");
  }
}

template <class T>
void write_column(std::ostream& out, const std::vector<T>& col) {
  out.write(reinterpret_cast<const char*>(col.data()),
            static_cast<std::streamsize>(col.size() * sizeof(T)));
}

template <class T>
void read_column(std::istream& in, std::uint64_t count, std::vector<T>& col) {
  col.resize(count);
  in.read(reinterpret_cast<char*>(col.data()),
          static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw_error(Errc::cache_corrupt, "truncated KB cache");
}

}  // namespace detail

inline void KnowledgeBase::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(Errc::io_error, "cannot open cache for writing: " + path);
  detail::write_pod(out, detail::kCacheMagic);
  detail::write_pod(out, kCacheFormatVersion);
  detail::write_pod(out, source_checksum_);
  detail::write_pod(out, entity_count());
  detail::write_pod(out, relation_count());
  detail::write_pod(out, triple_count());
  detail::write_string_table(out, entity_names_);
  detail::write_string_table(out, relation_names_);
  detail::write_column(out, heads_);
  detail::write_column(out, rels_);
  detail::write_column(out, tails_);
  detail::write_column(out, bwd_order_);
  detail::write_pod(out, detail::kCacheEndSentinel);
  out.flush();
  if (!out) throw_error(Errc::io_error, "write failed: " + path);
}

inline KnowledgeBase KnowledgeBase::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(Errc::io_error, "cannot open cache: " + path);

  std::uint32_t magic;
  detail::read_pod(in, magic);
  if (magic != detail::kCacheMagic)
    throw_error(Errc::cache_corrupt, "not a KB cache (bad magic): " + path);
  std::uint32_t version;
  detail::read_pod(in, version);
  if (version != kCacheFormatVersion)
    throw_error(Errc::cache_version_mismatch,
                "cache format version " + std::to_string(version) + " unsupported; this build reads version " +
                    std::to_string(kCacheFormatVersion));

  KnowledgeBase kb;
  std::uint32_t ecount, rcount;
  std::uint64_t tcount;
  detail::read_pod(in, kb.source_checksum_);
  detail::read_pod(in, ecount);
  detail::read_pod(in, rcount);
  detail::read_pod(in, tcount);
  detail::read_string_table(in, ecount, kb.entity_names_);
  detail::read_string_table(in, rcount, kb.relation_names_);
  detail::read_column(in, tcount, kb.heads_);
  detail::read_column(in, tcount, kb.rels_);
  detail::read_column(in, tcount, kb.tails_);
  detail::read_column(in, tcount, kb.bwd_order_);
  std::uint32_t sentinel;
  detail::read_pod(in, sentinel);
  if (sentinel != detail::kCacheEndSentinel)
    throw_error(Errc::cache_corrupt, "missing end sentinel: " + path);

  for (std::size_t i = 0; i < kb.heads_.size(); ++i) {
    if (kb.heads_[i] >= ecount || kb.tails_[i] >= ecount || kb.rels_[i] >= rcount)
      throw_error(Errc::cache_corrupt, "triple id out of range in cache");
    if (i > 0 && !(Triple{kb.heads_[i - 1], kb.rels_[i - 1], kb.tails_[i - 1]} <
                   Triple{kb.heads_[i], kb.rels_[i], kb.tails_[i]}))
      throw_error(Errc::cache_corrupt, "triples not strictly sorted in cache");
  }
  std::vector<bool> seen(kb.bwd_order_.size(), false);
  for (std::size_t i = 0; i < kb.bwd_order_.size(); ++i) {
    const std::uint32_t x = kb.bwd_order_[i];
    if (x >= kb.bwd_order_.size() || seen[x])
      throw_error(Errc::cache_corrupt, "backward index is not a permutation");
    seen[x] = true;
    if (i > 0) {
      const std::uint32_t p = kb.bwd_order_[i - 1];
      const bool ordered =
          std::tie(kb.tails_[p], kb.rels_[p], kb.heads_[p]) <
          std::tie(kb.tails_[x], kb.rels_[x], kb.heads_[x]);
      if (!ordered) throw_error(Errc::cache_corrupt, "backward index out of order");
    }
  }

  kb.build_indexes();
  return kb;
}

// ---------------------------------------------------------------------------
// Two-hop subgraph enumeration
//
// A subgraph is a pair of stored triples (a, r1, b), (b, r2, c) with
// a != b, b != c, a != c and r1 != r2. Enumeration order is lexicographic
// over interned ids (a, r1, b, r2, c).

template <class Fn>
void for_each_subgraph(const KnowledgeBase& kb, Fn&& fn) {
  const std::uint64_t n = kb.triple_count();
  for (std::uint64_t i = 0; i < n; ++i) {
    const Triple t1 = kb.triple(i);
    if (t1.head == t1.tail) continue;
    for (const AdjGroup& g : kb.out_groups(t1.tail)) {
      if (g.relation == t1.relation) continue;
      for (const EntityId c : kb.group_tails(g)) {
        if (c == t1.tail || c == t1.head) continue;
        fn(SubgraphPair{t1.head, t1.relation, t1.tail, g.relation, c});
      }
    }
  }
}

inline std::vector<SubgraphPair> enumerate_subgraphs(const KnowledgeBase& kb) {
  std::vector<SubgraphPair> out;
  for_each_subgraph(kb, [&](const SubgraphPair& sg) { out.push_back(sg); });
  return out;
}

// Exact subgraph count without materialization. Per bridge entity b:
//   |in'(b)| * |out'(b)|
//   - pairs sharing the relation - pairs closing the chain (a == c)
//   + pairs excluded twice (same relation and a == c),
// where in'/out' drop self-loops.
inline std::uint64_t count_subgraphs(const KnowledgeBase& kb) {
  std::uint64_t total = 0;
  std::unordered_map<EntityId, std::uint32_t> in_count;
  for (EntityId b = 0; b < kb.entity_count(); ++b) {
    const auto ins = kb.in_groups(b);
    const auto outs = kb.out_groups(b);
    if (ins.empty() || outs.empty()) continue;

    std::uint64_t in_deg = 0, out_deg = 0, same_rel = 0, same_ent = 0, both = 0;
    for (const AdjGroup& gi : ins) {
      const auto heads = kb.group_heads(gi);
      in_deg += heads.size() - (detail::contains_sorted(heads, b) ? 1 : 0);
    }
    for (const AdjGroup& go : outs) {
      const auto tails = kb.group_tails(go);
      out_deg += tails.size() - (detail::contains_sorted(tails, b) ? 1 : 0);
    }
    if (in_deg == 0 || out_deg == 0) continue;

    // Same relation on both hops.
    {
      auto it = ins.begin();
      auto ot = outs.begin();
      while (it != ins.end() && ot != outs.end()) {
        if (it->relation < ot->relation) {
          ++it;
        } else if (ot->relation < it->relation) {
          ++ot;
        } else {
          const auto heads = kb.group_heads(*it);
          const auto tails = kb.group_tails(*ot);
          const std::uint64_t hi = heads.size() - (detail::contains_sorted(heads, b) ? 1 : 0);
          const std::uint64_t ti = tails.size() - (detail::contains_sorted(tails, b) ? 1 : 0);
          same_rel += hi * ti;
          ++it;
          ++ot;
        }
      }
    }
    // Chain-closing pairs (a == c), any relation combination.
    in_count.clear();
    for (const AdjGroup& gi : ins)
      for (const EntityId a : kb.group_heads(gi))
        if (a != b) ++in_count[a];
    for (const AdjGroup& go : outs)
      for (const EntityId c : kb.group_tails(go)) {
        if (c == b) continue;
        auto found = in_count.find(c);
        if (found != in_count.end()) same_ent += found->second;
      }
    // Pairs subtracted twice: same relation and a == c.
    for (const AdjGroup& gi : ins)
      for (const EntityId a : kb.group_heads(gi))
        if (a != b && kb.has_triple(b, gi.relation, a)) ++both;

    total += in_deg * out_deg - same_rel - same_ent + both;
  }
  return total;
}

// Random access into the subgraph enumeration: maps a rank in
// [0, total_subgraphs()) to the subgraph at that position of the
// enumeration order. Backs uniform subgraph sampling.
class SubgraphIndex {
 public:
  explicit SubgraphIndex(const KnowledgeBase& kb) : kb_(&kb) {
    const std::uint64_t n = kb.triple_count();
    prefix_.resize(n + 1);
    prefix_[0] = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const Triple t1 = kb.triple(i);
      std::uint64_t cnt = 0;
      if (t1.head != t1.tail) {
        for (const AdjGroup& g : kb.out_groups(t1.tail)) {
          if (g.relation == t1.relation) continue;
          const auto tails = kb.group_tails(g);
          cnt += tails.size();
          if (detail::contains_sorted(tails, t1.tail)) --cnt;
          if (detail::contains_sorted(tails, t1.head)) --cnt;
        }
      }
      prefix_[i + 1] = prefix_[i] + cnt;
    }
  }

  std::uint64_t total_subgraphs() const { return prefix_.back(); }

  SubgraphPair at(std::uint64_t rank) const {
    if (rank >= total_subgraphs())
      throw_error(Errc::invalid_handle, "subgraph rank out of range");
    const auto it = std::upper_bound(prefix_.begin(), prefix_.end(), rank);
    const std::uint64_t i = static_cast<std::uint64_t>(it - prefix_.begin()) - 1;
    std::uint64_t j = rank - prefix_[i];
    const Triple t1 = kb_->triple(i);
    for (const AdjGroup& g : kb_->out_groups(t1.tail)) {
      if (g.relation == t1.relation) continue;
      const auto tails = kb_->group_tails(g);
      const auto find_pos = [&](EntityId x) -> std::int64_t {
        const auto pos = std::lower_bound(tails.begin(), tails.end(), x);
        if (pos != tails.end() && *pos == x) return pos - tails.begin();
        return -1;
      };
      std::int64_t excl[2] = {find_pos(std::min(t1.head, t1.tail)),
                              find_pos(std::max(t1.head, t1.tail))};
      std::uint64_t valid = tails.size();
      if (excl[0] >= 0) --valid;
      if (excl[1] >= 0) --valid;
      if (j >= valid) {
        j -= valid;
        continue;
      }
      std::uint64_t pos = j;
      for (const std::int64_t e : excl)
        if (e >= 0 && pos >= static_cast<std::uint64_t>(e)) ++pos;
      return SubgraphPair{t1.head, t1.relation, t1.tail, g.relation, tails[pos]};
    }
    throw_error(Errc::invalid_handle, "corrupt subgraph index");
  }

 private:
  const KnowledgeBase* kb_;
  std::vector<std::uint64_t> prefix_;
};

}  // namespace kbmcq
