#pragma once
// Answer and distractor selection over a partitioned subgraph.
//
// The correct answer is uniform over the form's answer set. Distractors come
// from the complement under one of three strategies. All draws consume a
// caller-supplied Rng, so results are a pure function of the rng state.
// Rejection loops carry an exact-materialization fallback, which keeps every
// draw terminating and deterministic even on adversarial partitions.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbmcq/error.hpp"
#include "kbmcq/kb.hpp"
#include "kbmcq/logic.hpp"
#include "kbmcq/rng.hpp"

namespace kbmcq {

enum class Strategy {
  random_global,  // uniform over the whole wrong pool
  nearest,        // graph neighbors of A first, random top-up
  uniform_cell,   // cell uniform, then uniform within the cell
};

inline std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::random_global: return "random";
    case Strategy::nearest: return "nearest";
    case Strategy::uniform_cell: return "uniform";
  }
  throw_error(Errc::invalid_handle, "unknown strategy value");
}

inline std::optional<Strategy> strategy_from_name(std::string_view name) {
  if (name == "random") return Strategy::random_global;
  if (name == "nearest") return Strategy::nearest;
  if (name == "uniform") return Strategy::uniform_cell;
  return std::nullopt;
}

struct SamplerContext {
  const KnowledgeBase& kb;
  const SubgraphPair& sg;
  const Partition& partition;
};

namespace detail {

inline constexpr int kRejectionCap = 1024;

// Uniform element of S4 while it is implicit: rejection from the universe,
// then a full scan if the cap trips. Precondition: s4_size() > 0.
inline EntityId draw_from_implicit_s4(const Partition& p, Rng& rng) {
  for (int tries = 0; tries < kRejectionCap; ++tries) {
    const auto x = static_cast<EntityId>(rng.below(p.universe));
    if (p.locate(x) == 3) return x;
  }
  std::vector<EntityId> s4;
  s4.reserve(static_cast<std::size_t>(p.s4_size()));
  for (std::uint32_t e = 0; e < p.universe; ++e)
    if (p.locate(static_cast<EntityId>(e)) == 3) s4.push_back(static_cast<EntityId>(e));
  if (s4.empty())
    throw_error(Errc::invalid_handle, "S4 draw requested while the cell is empty");
  return s4[static_cast<std::size_t>(rng.below(s4.size()))];
}

// Uniform draw without replacement: swap the tail element into the hole.
inline EntityId take_uniform(std::vector<EntityId>& pool, Rng& rng) {
  const auto i = static_cast<std::size_t>(rng.below(pool.size()));
  const EntityId x = pool[i];
  pool[i] = pool.back();
  pool.pop_back();
  return x;
}

}  // namespace detail

// Uniform member of the form's answer set: cell chosen by size, element
// uniform within the cell. Empty answer sets are a caller bug (the validity
// mask exists to filter them out first).
inline EntityId select_correct_answer(const SamplerContext& ctx, const LogicalForm& f, Rng& rng) {
  const Partition& p = ctx.partition;
  const std::uint64_t total = p.answer_size(f);
  if (total == 0)
    throw_error(Errc::invalid_form,
                "form " + std::to_string(f.index) + " has an empty answer set for this subgraph");
  std::uint64_t k = rng.below(total);
  for (int cell = 0; cell < 4; ++cell) {
    if (!f.selects(cell)) continue;
    const std::uint64_t size = p.cell_size(cell);
    if (k < size) {
      if (cell == 3 && p.mode == S4Mode::approximate)
        return detail::draw_from_implicit_s4(p, rng);
      return p.cell(cell)[static_cast<std::size_t>(k)];
    }
    k -= size;
  }
  throw_error(Errc::invalid_handle, "answer index walk exhausted the selected cells");
}

// n distinct entities outside the form's answer set. Throws no_distractor
// when the wrong pool is empty and insufficient_pool when it is smaller
// than n; past those guards the draw always succeeds.
inline std::vector<EntityId> sample_distractors(const SamplerContext& ctx, const LogicalForm& f,
                                                std::uint32_t n, Strategy strategy, Rng& rng) {
  const Partition& p = ctx.partition;
  if (n == 0) return {};
  const std::uint64_t wrong = p.wrong_size(f);
  if (wrong == 0)
    throw_error(Errc::no_distractor,
                "every entity satisfies form " + std::to_string(f.index) + " for this subgraph");
  if (wrong < n)
    throw_error(Errc::insufficient_pool,
                "form " + std::to_string(f.index) + " leaves " + std::to_string(wrong) +
                    " wrong entities but " + std::to_string(n) + " distractors were requested");

  std::vector<EntityId> chosen;
  chosen.reserve(n);
  const auto already = [&](EntityId x) {
    return std::find(chosen.begin(), chosen.end(), x) != chosen.end();
  };
  // Membership check against the KB triples themselves, not the cached cells.
  const auto is_wrong = [&](EntityId x) { return !f.selects(cell_of(ctx.kb, ctx.sg, x)); };

  // Enumerates the remaining wrong pool and finishes without replacement.
  // The size guard above makes the pool large enough by construction.
  const auto fill_from_materialized = [&] {
    std::vector<EntityId> pool;
    pool.reserve(static_cast<std::size_t>(wrong) - chosen.size());
    for (std::uint32_t e = 0; e < p.universe; ++e) {
      const auto x = static_cast<EntityId>(e);
      if (!f.selects(p.locate(x)) && !already(x)) pool.push_back(x);
    }
    while (chosen.size() < n) chosen.push_back(detail::take_uniform(pool, rng));
  };

  const auto fill_random = [&] {
    while (chosen.size() < n) {
      bool found = false;
      for (int tries = 0; tries < detail::kRejectionCap; ++tries) {
        const auto x = static_cast<EntityId>(rng.below(p.universe));
        if (is_wrong(x) && !already(x)) {
          chosen.push_back(x);
          found = true;
          break;
        }
      }
      if (!found) {
        fill_from_materialized();
        return;
      }
    }
  };

  switch (strategy) {
    case Strategy::random_global: {
      fill_random();
      break;
    }
    case Strategy::nearest: {
      std::vector<EntityId> pool;
      for (const AdjGroup& g : ctx.kb.out_groups(ctx.sg.a)) {
        if (g.relation == ctx.sg.r1) continue;
        const auto tails = ctx.kb.group_tails(g);
        pool.insert(pool.end(), tails.begin(), tails.end());
      }
      std::sort(pool.begin(), pool.end());
      pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
      std::erase_if(pool, [&](EntityId x) { return !is_wrong(x); });
      while (chosen.size() < n && !pool.empty())
        chosen.push_back(detail::take_uniform(pool, rng));
      fill_random();
      break;
    }
    case Strategy::uniform_cell: {
      std::vector<int> cells;
      for (int c = 0; c < 4; ++c)
        if (!f.selects(c) && p.cell_size(c) > 0) cells.push_back(c);
      while (chosen.size() < n) {
        bool found = false;
        for (int tries = 0; tries < detail::kRejectionCap; ++tries) {
          const int c = cells[static_cast<std::size_t>(rng.below(cells.size()))];
          EntityId x;
          if (c == 3 && p.mode == S4Mode::approximate) {
            x = detail::draw_from_implicit_s4(p, rng);
          } else {
            const auto& members = p.cell(c);
            x = members[static_cast<std::size_t>(rng.below(members.size()))];
          }
          if (!already(x)) {
            chosen.push_back(x);
            found = true;
            break;
          }
        }
        if (!found) {
          fill_from_materialized();
          break;
        }
      }
      break;
    }
  }
  return chosen;
}

}  // namespace kbmcq
