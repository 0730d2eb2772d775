#pragma once
// End-to-end question generation: subgraph draw, form selection under the
// validity mask, realization, answer and distractor sampling, and emission.
//
// Determinism contract: every attempt owns a draw id t and derives its entire
// random state from (seed, t). Shards split the draw-id space round-robin and
// the single consumer folds results back in ascending t, so the output bytes
// depend only on (kb, config), never on the shard count or thread timing.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kbmcq/error.hpp"
#include "kbmcq/gzio.hpp"
#include "kbmcq/kb.hpp"
#include "kbmcq/logic.hpp"
#include "kbmcq/rng.hpp"
#include "kbmcq/sampler.hpp"
#include "kbmcq/templater.hpp"

namespace kbmcq {

// Above this entity count the default policy stops materializing S4.
inline constexpr std::uint32_t kExactUniverseLimit = 100000;

enum class S4Policy { auto_mode, exact, approximate };

inline S4Mode resolve_s4_mode(S4Policy policy, std::uint32_t entity_count) {
  switch (policy) {
    case S4Policy::exact: return S4Mode::exact;
    case S4Policy::approximate: return S4Mode::approximate;
    case S4Policy::auto_mode: break;
  }
  return entity_count < kExactUniverseLimit ? S4Mode::exact : S4Mode::approximate;
}

struct GenerationConfig {
  std::uint64_t seed = 0;
  // Emission target. Unset means a full sweep: one attempt per subgraph in
  // enumeration order instead of seeded rank draws.
  std::optional<std::uint64_t> count = 1000;
  Strategy strategy = Strategy::uniform_cell;
  std::uint32_t choices = 3;
  // Allowed form indices; empty selects all 14.
  std::vector<int> form_filter;
  S4Policy s4_policy = S4Policy::auto_mode;
  std::uint32_t shards = 1;
  bool dedup = false;
};

// Sorts and bounds-checks the config in place.
inline void validate_config(GenerationConfig& cfg) {
  if (cfg.choices < 2) throw_error(Errc::bad_config, "choices must be at least 2");
  if (cfg.shards < 1) throw_error(Errc::bad_config, "shards must be at least 1");
  if (cfg.count && *cfg.count == 0)
    throw_error(Errc::bad_config, "count must be positive, or unset for a full sweep");
  if (cfg.form_filter.empty()) {
    cfg.form_filter.resize(kFormCount);
    std::iota(cfg.form_filter.begin(), cfg.form_filter.end(), 0);
  } else {
    std::sort(cfg.form_filter.begin(), cfg.form_filter.end());
    cfg.form_filter.erase(std::unique(cfg.form_filter.begin(), cfg.form_filter.end()),
                          cfg.form_filter.end());
    for (int f : cfg.form_filter) form_by_index(f);
  }
}

struct MultipleChoiceQuestion {
  std::string id;
  std::string question;
  std::vector<std::string> choices;
  std::uint32_t answer_index = 0;
  SubgraphPair sg{};
  int form_index = 0;
  Strategy strategy = Strategy::uniform_cell;
  std::uint64_t draw_id = 0;
};

struct GenerationStats {
  std::uint64_t attempts = 0;
  std::uint64_t emitted = 0;
  std::uint64_t skipped_no_eligible_form = 0;
  std::uint64_t skipped_small_pool = 0;
  std::uint64_t skipped_duplicate = 0;
  std::array<std::uint64_t, kFormCount> per_form{};
  double elapsed_seconds = 0.0;

  std::uint64_t skipped_total() const {
    return skipped_no_eligible_form + skipped_small_pool + skipped_duplicate;
  }
};

using QuestionSink = std::function<void(const MultipleChoiceQuestion&)>;

namespace detail {

// In sampled mode, give up after this many consecutive fruitless attempts.
inline constexpr std::uint64_t kStallLimit = 100000;
// Attempts handed to each shard per synchronization round.
inline constexpr std::uint64_t kBlockPerShard = 64;

struct AttemptResult {
  enum class Kind { question, no_eligible_form, small_pool };
  Kind kind = Kind::no_eligible_form;
  MultipleChoiceQuestion q;
  std::exception_ptr error;
};

inline std::string question_id(const KnowledgeBase& kb, const SubgraphPair& sg, int form_index,
                               std::uint64_t draw_id) {
  std::uint64_t h = kFnvOffset;
  h = fnv1a64(kb.entity_name(sg.a), h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(kb.relation_name(sg.r1), h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(kb.entity_name(sg.b), h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(kb.relation_name(sg.r2), h);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(kb.entity_name(sg.c), h);
  h = fnv1a64_u64(static_cast<std::uint64_t>(form_index), h);
  h = fnv1a64_u64(draw_id, h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string subgraph_context(const KnowledgeBase& kb, const SubgraphPair& sg) {
  std::string out = "(";
  out += kb.entity_name(sg.a);
  out += ", ";
  out += kb.relation_name(sg.r1);
  out += ", ";
  out += kb.entity_name(sg.b);
  out += ", ";
  out += kb.relation_name(sg.r2);
  out += ", ";
  out += kb.entity_name(sg.c);
  out += ")";
  return out;
}

// One attempt, fully determined by (seed, t). Never throws; failures travel
// back to the consumer as an exception_ptr so shard workers stay silent.
inline AttemptResult run_attempt(const KnowledgeBase& kb, const SubgraphIndex& index,
                                 const RelationLexicon& lex, const GenerationConfig& cfg,
                                 S4Mode mode, bool exhaustive, std::uint64_t t) noexcept {
  AttemptResult r;
  try {
    Rng rng = Rng::for_draw(cfg.seed, t);
    const std::uint64_t rank = exhaustive ? t : rng.below(index.total_subgraphs());
    const SubgraphPair sg = index.at(rank);
    const Partition part = compute_partition(kb, sg, mode);
    const ValidityMask vm = compute_validity_mask(part);

    std::vector<int> eligible;
    eligible.reserve(cfg.form_filter.size());
    for (int f : cfg.form_filter)
      if (vm[f]) eligible.push_back(f);
    if (eligible.empty()) {
      r.kind = AttemptResult::Kind::no_eligible_form;
      return r;
    }
    const LogicalForm form =
        form_by_index(eligible[static_cast<std::size_t>(rng.below(eligible.size()))]);

    const std::uint32_t need = cfg.choices - 1;
    if (part.wrong_size(form) < need) {
      r.kind = AttemptResult::Kind::small_pool;
      return r;
    }

    const SamplerContext ctx{kb, sg, part};
    const EntityId correct = select_correct_answer(ctx, form, rng);
    const std::vector<EntityId> distractors = sample_distractors(ctx, form, need, cfg.strategy, rng);

    std::string question;
    try {
      question = realize_question(sg, form, lex, kb);
    } catch (const Error& e) {
      throw_error(e.code(), std::string(e.what()) + " [subgraph " + subgraph_context(kb, sg) + "]");
    }

    std::vector<EntityId> order;
    order.reserve(cfg.choices);
    order.push_back(correct);
    order.insert(order.end(), distractors.begin(), distractors.end());
    rng.shuffle(order);

    MultipleChoiceQuestion q;
    q.id = question_id(kb, sg, form.index, t);
    q.question = std::move(question);
    q.choices.reserve(order.size());
    for (EntityId e : order) q.choices.emplace_back(kb.entity_name(e));
    q.answer_index = static_cast<std::uint32_t>(
        std::find(order.begin(), order.end(), correct) - order.begin());
    q.sg = sg;
    q.form_index = form.index;
    q.strategy = cfg.strategy;
    q.draw_id = t;

    r.kind = AttemptResult::Kind::question;
    r.q = std::move(q);
  } catch (...) {
    r.error = std::current_exception();
  }
  return r;
}

// Content hash used by the dedup flag: question text plus the unordered
// choice set plus the keyed answer, so reshuffles of one question collapse.
inline std::uint64_t dedup_key(const MultipleChoiceQuestion& q) {
  std::uint64_t h = fnv1a64(q.question);
  std::vector<std::string> sorted = q.choices;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& c : sorted) {
    h = fnv1a64("\x1f", h);
    h = fnv1a64(c, h);
  }
  h = fnv1a64("\x1f", h);
  h = fnv1a64(q.choices[q.answer_index], h);
  return h;
}

}  // namespace detail

// Runs generation and feeds each emitted question to the sink in draw-id
// order. Returns accounting that satisfies
// attempts == emitted + skipped_total().
inline GenerationStats generate_dataset(const KnowledgeBase& kb, const SubgraphIndex& index,
                                        const RelationLexicon& lex, const GenerationConfig& cfg_in,
                                        const QuestionSink& sink) {
  GenerationConfig cfg = cfg_in;
  validate_config(cfg);
  const std::uint64_t total = index.total_subgraphs();
  if (total == 0)
    throw_error(Errc::empty_dataset, "knowledge base contains no two-hop subgraphs");
  const S4Mode mode = resolve_s4_mode(cfg.s4_policy, kb.entity_count());
  const bool exhaustive = !cfg.count.has_value();
  const std::uint64_t target =
      exhaustive ? std::numeric_limits<std::uint64_t>::max() : *cfg.count;

  GenerationStats stats;
  const auto t0 = std::chrono::steady_clock::now();
  std::unordered_set<std::uint64_t> seen;
  std::uint64_t fruitless = 0;
  bool done = false;

  const auto consume = [&](detail::AttemptResult&& r) {
    if (r.error) std::rethrow_exception(r.error);
    ++stats.attempts;
    switch (r.kind) {
      case detail::AttemptResult::Kind::no_eligible_form:
        ++stats.skipped_no_eligible_form;
        ++fruitless;
        break;
      case detail::AttemptResult::Kind::small_pool:
        ++stats.skipped_small_pool;
        ++fruitless;
        break;
      case detail::AttemptResult::Kind::question: {
        if (cfg.dedup && !seen.insert(detail::dedup_key(r.q)).second) {
          ++stats.skipped_duplicate;
          ++fruitless;
          break;
        }
        ++stats.emitted;
        ++stats.per_form[static_cast<std::size_t>(r.q.form_index)];
        fruitless = 0;
        sink(r.q);
        if (stats.emitted >= target) done = true;
        break;
      }
    }
    if (!exhaustive && fruitless >= detail::kStallLimit) done = true;
  };

  if (cfg.shards <= 1) {
    for (std::uint64_t t = 0; !done && (!exhaustive || t < total); ++t)
      consume(detail::run_attempt(kb, index, lex, cfg, mode, exhaustive, t));
  } else {
    const std::uint64_t block =
        static_cast<std::uint64_t>(cfg.shards) * detail::kBlockPerShard;
    std::vector<detail::AttemptResult> results(static_cast<std::size_t>(block));
    for (std::uint64_t base = 0; !done && (!exhaustive || base < total); base += block) {
      const std::uint64_t n = exhaustive ? std::min(block, total - base) : block;
      const auto worker = [&](std::uint32_t shard) {
        for (std::uint64_t i = shard; i < n; i += cfg.shards)
          results[static_cast<std::size_t>(i)] =
              detail::run_attempt(kb, index, lex, cfg, mode, exhaustive, base + i);
      };
      std::vector<std::thread> threads;
      threads.reserve(cfg.shards - 1);
      for (std::uint32_t s = 1; s < cfg.shards; ++s) threads.emplace_back(worker, s);
      worker(0);
      for (auto& th : threads) th.join();
      for (std::uint64_t i = 0; i < n && !done; ++i)
        consume(std::move(results[static_cast<std::size_t>(i)]));
    }
  }

  stats.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (stats.emitted == 0)
    throw_error(Errc::empty_dataset,
                "no subgraph yielded an emittable question after " +
                    std::to_string(stats.attempts) + " attempts");
  return stats;
}

enum class OutputFormat { jsonl, tsv };

inline std::string_view format_name(OutputFormat f) {
  return f == OutputFormat::jsonl ? "jsonl" : "tsv";
}

inline std::optional<OutputFormat> format_from_name(std::string_view name) {
  if (name == "jsonl") return OutputFormat::jsonl;
  if (name == "tsv") return OutputFormat::tsv;
  return std::nullopt;
}

class DatasetWriter {
 public:
  virtual ~DatasetWriter() = default;
  virtual void write(const MultipleChoiceQuestion& q) = 0;
  virtual void finish() = 0;
};

class JsonlWriter final : public DatasetWriter {
 public:
  JsonlWriter(LineSink& sink, const KnowledgeBase& kb) : sink_(&sink), kb_(&kb) {}

  void write(const MultipleChoiceQuestion& q) override {
    nlohmann::ordered_json j;
    j["id"] = q.id;
    j["question"] = q.question;
    j["choices"] = q.choices;
    j["answer"] = q.answer_index;
    nlohmann::ordered_json meta;
    meta["head"] = std::string(kb_->entity_name(q.sg.a));
    meta["rel1"] = std::string(kb_->relation_name(q.sg.r1));
    meta["bridge"] = std::string(kb_->entity_name(q.sg.b));
    meta["rel2"] = std::string(kb_->relation_name(q.sg.r2));
    meta["tail"] = std::string(kb_->entity_name(q.sg.c));
    meta["form"] = q.form_index;
    meta["strategy"] = std::string(strategy_name(q.strategy));
    j["meta"] = std::move(meta);
    sink_->write_line(j.dump());
  }

  void finish() override { sink_->flush(); }

 private:
  LineSink* sink_;
  const KnowledgeBase* kb_;
};

namespace detail {

inline std::string tsv_sanitize(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  return out;
}

}  // namespace detail

class TsvWriter final : public DatasetWriter {
 public:
  TsvWriter(LineSink& sink, const KnowledgeBase& kb) : sink_(&sink), kb_(&kb) {}

  void write(const MultipleChoiceQuestion& q) override {
    if (!header_written_) {
      std::string h = "id\tquestion";
      for (std::size_t i = 0; i < q.choices.size(); ++i) h += "\tchoice_" + std::to_string(i);
      h += "\tanswer\thead\trel1\tbridge\trel2\ttail\tform\tstrategy";
      sink_->write_line(h);
      header_written_ = true;
    }
    std::string line = q.id;
    line += '\t';
    line += detail::tsv_sanitize(q.question);
    for (const auto& c : q.choices) {
      line += '\t';
      line += detail::tsv_sanitize(c);
    }
    line += '\t';
    line += std::to_string(q.answer_index);
    line += '\t';
    line += detail::tsv_sanitize(kb_->entity_name(q.sg.a));
    line += '\t';
    line += detail::tsv_sanitize(kb_->relation_name(q.sg.r1));
    line += '\t';
    line += detail::tsv_sanitize(kb_->entity_name(q.sg.b));
    line += '\t';
    line += detail::tsv_sanitize(kb_->relation_name(q.sg.r2));
    line += '\t';
    line += detail::tsv_sanitize(kb_->entity_name(q.sg.c));
    line += '\t';
    line += std::to_string(q.form_index);
    line += '\t';
    line += strategy_name(q.strategy);
    sink_->write_line(line);
  }

  void finish() override { sink_->flush(); }

 private:
  LineSink* sink_;
  const KnowledgeBase* kb_;
  bool header_written_ = false;
};

inline std::unique_ptr<DatasetWriter> make_writer(OutputFormat format, LineSink& sink,
                                                  const KnowledgeBase& kb) {
  if (format == OutputFormat::jsonl) return std::make_unique<JsonlWriter>(sink, kb);
  return std::make_unique<TsvWriter>(sink, kb);
}

struct EmitOptions {
  OutputFormat format = OutputFormat::jsonl;
  std::string path;
  bool gzip = false;
};

struct EmitSummary {
  std::string path;
  std::string format;
  std::string strategy;
  GenerationStats stats;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["path"] = path;
    j["format"] = format;
    j["strategy"] = strategy;
    j["emitted"] = stats.emitted;
    j["attempts"] = stats.attempts;
    nlohmann::ordered_json skipped;
    skipped["no_eligible_form"] = stats.skipped_no_eligible_form;
    skipped["small_pool"] = stats.skipped_small_pool;
    skipped["duplicate"] = stats.skipped_duplicate;
    j["skipped"] = std::move(skipped);
    j["per_form"] = stats.per_form;
    j["elapsed_seconds"] = stats.elapsed_seconds;
    return j;
  }
};

// Generates straight into a file. I/O failures report how many records made
// it out before the stream broke.
inline EmitSummary emit_dataset(const KnowledgeBase& kb, const SubgraphIndex& index,
                                const RelationLexicon& lex, const GenerationConfig& cfg,
                                const EmitOptions& out) {
  auto sink = open_line_sink(out.path, out.gzip);
  auto writer = make_writer(out.format, *sink, kb);
  std::uint64_t written = 0;
  GenerationStats stats;
  try {
    stats = generate_dataset(kb, index, lex, cfg, [&](const MultipleChoiceQuestion& q) {
      writer->write(q);
      ++written;
    });
    writer->finish();
  } catch (const Error& e) {
    if (e.code() == Errc::io_error)
      throw_error(Errc::io_error, std::string(e.what()) + " (" + std::to_string(written) +
                                      " records written before the failure)");
    throw;
  }
  EmitSummary summary;
  summary.path = out.path;
  summary.format = std::string(format_name(out.format));
  summary.strategy = std::string(strategy_name(cfg.strategy));
  summary.stats = stats;
  return summary;
}

struct KbStats {
  std::uint64_t entities = 0;
  std::uint64_t relations = 0;
  std::uint64_t triples = 0;
  std::uint64_t subgraphs = 0;
  // (first relation, second relation, subgraph count), sorted by the pair.
  std::vector<std::tuple<std::string, std::string, std::uint64_t>> relation_pair_histogram;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["entities"] = entities;
    j["relations"] = relations;
    j["triples"] = triples;
    j["subgraphs"] = subgraphs;
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const auto& [r1, r2, n] : relation_pair_histogram) {
      nlohmann::ordered_json row;
      row["rel1"] = r1;
      row["rel2"] = r2;
      row["subgraphs"] = n;
      hist.push_back(std::move(row));
    }
    j["relation_pairs"] = std::move(hist);
    return j;
  }
};

// Streaming subgraph census. Per bridge entity, pairs every incoming
// relation group with every outgoing group of a different relation; the
// product of the group sizes (bridge excluded on both sides) minus the
// size of their intersection counts exactly the chains that satisfy the
// three-distinct-entities rule.
inline KbStats dataset_stats(const KnowledgeBase& kb) {
  KbStats st;
  st.entities = kb.entity_count();
  st.relations = kb.relation_count();
  st.triples = kb.triple_count();

  const std::size_t nrel = kb.relation_count();
  std::vector<std::uint64_t> hist(nrel * nrel, 0);
  for (std::uint32_t b = 0; b < kb.entity_count(); ++b) {
    const auto in_groups = kb.in_groups(static_cast<EntityId>(b));
    const auto out_groups = kb.out_groups(static_cast<EntityId>(b));
    if (in_groups.empty() || out_groups.empty()) continue;
    for (const AdjGroup& gi : in_groups) {
      const auto heads = kb.group_heads(gi);
      const std::uint64_t in_size =
          heads.size() - (detail::contains_sorted(heads, static_cast<EntityId>(b)) ? 1 : 0);
      if (in_size == 0) continue;
      for (const AdjGroup& go : out_groups) {
        if (go.relation == gi.relation) continue;
        const auto tails = kb.group_tails(go);
        const std::uint64_t out_size =
            tails.size() - (detail::contains_sorted(tails, static_cast<EntityId>(b)) ? 1 : 0);
        if (out_size == 0) continue;
        std::uint64_t shared = 0;
        std::size_t i = 0, k = 0;
        while (i < heads.size() && k < tails.size()) {
          if (heads[i] == tails[k]) {
            if (heads[i] != static_cast<EntityId>(b)) ++shared;
            ++i;
            ++k;
          } else if (heads[i] < tails[k]) {
            ++i;
          } else {
            ++k;
          }
        }
        hist[gi.relation * nrel + go.relation] += in_size * out_size - shared;
      }
    }
  }

  std::uint64_t total = 0;
  for (std::size_t r1 = 0; r1 < nrel; ++r1) {
    for (std::size_t r2 = 0; r2 < nrel; ++r2) {
      const std::uint64_t n = hist[r1 * nrel + r2];
      if (n == 0) continue;
      total += n;
      st.relation_pair_histogram.emplace_back(
          std::string(kb.relation_name(static_cast<RelationId>(r1))),
          std::string(kb.relation_name(static_cast<RelationId>(r2))), n);
    }
  }
  st.subgraphs = total;
  return st;
}

}  // namespace kbmcq
