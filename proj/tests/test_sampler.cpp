#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kbmcq/kb.hpp"
#include "kbmcq/logic.hpp"
#include "kbmcq/rng.hpp"
#include "kbmcq/sampler.hpp"
#include "helpers.hpp"

using namespace kbmcq;
using namespace testutil;

namespace {

SubgraphPair fixture_subgraph(const KnowledgeBase& kb) {
  return SubgraphPair{*kb.find_entity("a"), *kb.find_relation("r1"), *kb.find_entity("b"),
                      *kb.find_relation("r2"), *kb.find_entity("c")};
}

}  // namespace

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::random_global, Strategy::nearest, Strategy::uniform_cell})
    REQUIRE(strategy_from_name(strategy_name(s)) == s);
  REQUIRE_FALSE(strategy_from_name("bogus").has_value());
}

TEST_CASE("correct answers always satisfy the form") {
  std::mt19937_64 gen(47);
  for (int round = 0; round < 15; ++round) {
    const auto triples = random_triples(gen, 12, 4, 60);
    KnowledgeBase kb = make_kb(triples);
    for (const auto& sg : enumerate_subgraphs(kb)) {
      for (S4Mode mode : {S4Mode::exact, S4Mode::approximate}) {
        const Partition p = compute_partition(kb, sg, mode);
        const ValidityMask vm = compute_validity_mask(p);
        const SamplerContext ctx{kb, sg, p};
        for (const auto& f : enumerate_forms()) {
          if (!vm[f.index]) continue;
          Rng rng = Rng::for_draw(99, static_cast<std::uint64_t>(round * 100 + f.index));
          const EntityId x = select_correct_answer(ctx, f, rng);
          REQUIRE(eval_form_membership(kb, sg, f, x));
        }
      }
    }
  }
}

TEST_CASE("an empty answer set is rejected as a caller bug") {
  KnowledgeBase kb = make_kb({{"a", "r1", "b"}, {"b", "r2", "c"}});
  const SubgraphPair sg = fixture_subgraph(kb);
  const Partition p = compute_partition(kb, sg);
  REQUIRE(p.s1.empty());  // tails {b} minus heads {b}
  const SamplerContext ctx{kb, sg, p};
  Rng rng(1);
  REQUIRE(thrown_code([&] { select_correct_answer(ctx, form_by_index(0), rng); }) ==
          Errc::invalid_form);
}

TEST_CASE("correct answers cover the whole answer set roughly uniformly") {
  KnowledgeBase kb = make_kb(logic_fixture());
  const SubgraphPair sg = fixture_subgraph(kb);
  const Partition p = compute_partition(kb, sg);
  const SamplerContext ctx{kb, sg, p};
  const LogicalForm f = form_by_index(6);  // answer {b, d, e, f}
  std::map<std::string, std::uint64_t> hits;
  const int draws = 8000;
  for (int i = 0; i < draws; ++i) {
    Rng rng = Rng::for_draw(7, static_cast<std::uint64_t>(i));
    hits[std::string(kb.entity_name(select_correct_answer(ctx, f, rng)))]++;
  }
  REQUIRE(hits.size() == 4);
  std::vector<std::uint64_t> counts;
  for (const auto& [name, n] : hits) counts.push_back(n);
  // df = 3; 11.34 is the 99% point, generous for a sanity check.
  REQUIRE(chi_square(counts, draws / 4.0) < 16.27);
}

TEST_CASE("distractors are distinct, sound and exactly as many as asked") {
  std::mt19937_64 gen(53);
  for (int round = 0; round < 12; ++round) {
    const auto triples = random_triples(gen, 14, 4, 70);
    KnowledgeBase kb = make_kb(triples);
    for (const auto& sg : enumerate_subgraphs(kb)) {
      for (S4Mode mode : {S4Mode::exact, S4Mode::approximate}) {
        const Partition p = compute_partition(kb, sg, mode);
        const ValidityMask vm = compute_validity_mask(p);
        const SamplerContext ctx{kb, sg, p};
        for (const auto& f : enumerate_forms()) {
          if (!vm[f.index]) continue;
          const std::uint64_t wrong = p.wrong_size(f);
          if (wrong < 2) continue;
          for (Strategy s :
               {Strategy::random_global, Strategy::nearest, Strategy::uniform_cell}) {
            Rng rng = Rng::for_draw(3, static_cast<std::uint64_t>(f.index));
            const auto ds = sample_distractors(ctx, f, 2, s, rng);
            REQUIRE(ds.size() == 2);
            REQUIRE(ds[0] != ds[1]);
            for (EntityId d : ds) REQUIRE_FALSE(eval_form_membership(kb, sg, f, d));
          }
        }
      }
    }
  }
}

TEST_CASE("a universe-covering answer set leaves no distractors") {
  // Self-loops put a and c inside both hop sets, so form #6 covers Ω.
  KnowledgeBase kb = make_kb({{"a", "r1", "b"}, {"b", "r2", "c"}, {"a", "r1", "a"},
                              {"c", "r2", "c"}});
  const SubgraphPair sg = fixture_subgraph(kb);
  const Partition p = compute_partition(kb, sg);
  const LogicalForm f = form_by_index(6);
  REQUIRE(p.wrong_size(f) == 0);
  const SamplerContext ctx{kb, sg, p};
  Rng rng(5);
  REQUIRE(thrown_code([&] { sample_distractors(ctx, f, 1, Strategy::random_global, rng); }) ==
          Errc::no_distractor);
}

TEST_CASE("a wrong pool smaller than the request is rejected up front") {
  KnowledgeBase kb = make_kb(logic_fixture());
  const SubgraphPair sg = fixture_subgraph(kb);
  const Partition p = compute_partition(kb, sg);
  const LogicalForm f = form_by_index(6);  // wrong pool {a, c}
  REQUIRE(p.wrong_size(f) == 2);
  const SamplerContext ctx{kb, sg, p};
  Rng rng(5);
  REQUIRE(thrown_code([&] { sample_distractors(ctx, f, 3, Strategy::uniform_cell, rng); }) ==
          Errc::insufficient_pool);
  const auto ds = sample_distractors(ctx, f, 2, Strategy::uniform_cell, rng);
  std::set<EntityId> got(ds.begin(), ds.end());
  REQUIRE(got == std::set<EntityId>{*kb.find_entity("a"), *kb.find_entity("c")});
}

TEST_CASE("nearest strategy prefers the head's other-relation neighbors") {
  // a's non-r1 out-edges reach x and y; both fail form #1, so they are the
  // preferred distractor pool.
  KnowledgeBase kb = make_kb({{"a", "r1", "b"},
                              {"b", "r2", "c"},
                              {"a", "r3", "x"},
                              {"a", "r3", "y"},
                              {"x", "r2", "z"}});
  const SubgraphPair sg = fixture_subgraph(kb);
  const Partition p = compute_partition(kb, sg);
  const LogicalForm f = form_by_index(1);  // answer set {b}
  const SamplerContext ctx{kb, sg, p};
  const std::set<EntityId> neighborhood{*kb.find_entity("x"), *kb.find_entity("y")};
  for (int i = 0; i < 50; ++i) {
    Rng rng = Rng::for_draw(11, static_cast<std::uint64_t>(i));
    const auto ds = sample_distractors(ctx, f, 2, Strategy::nearest, rng);
    REQUIRE(std::set<EntityId>(ds.begin(), ds.end()) == neighborhood);
  }
}

TEST_CASE("nearest strategy tops up from the global pool when neighbors run short") {
  KnowledgeBase kb = make_kb(logic_fixture());  // a has only r1 out-edges
  const SubgraphPair sg = fixture_subgraph(kb);
  const Partition p = compute_partition(kb, sg);
  const LogicalForm f = form_by_index(1);
  const SamplerContext ctx{kb, sg, p};
  for (int i = 0; i < 20; ++i) {
    Rng rng = Rng::for_draw(13, static_cast<std::uint64_t>(i));
    const auto ds = sample_distractors(ctx, f, 2, Strategy::nearest, rng);
    REQUIRE(ds.size() == 2);
    for (EntityId d : ds) REQUIRE_FALSE(eval_form_membership(kb, sg, f, d));
  }
}

TEST_CASE("uniform-cell strategy picks wrong cells evenly") {
  KnowledgeBase kb = make_kb(logic_fixture());
  const SubgraphPair sg = fixture_subgraph(kb);
  const Partition p = compute_partition(kb, sg);
  const LogicalForm f = form_by_index(1);  // wrong cells S1={f}, S3={e}, S4={a,c}
  const SamplerContext ctx{kb, sg, p};
  std::vector<std::uint64_t> cell_hits(4, 0);
  const int draws = 9000;
  for (int i = 0; i < draws; ++i) {
    Rng rng = Rng::for_draw(17, static_cast<std::uint64_t>(i));
    const auto ds = sample_distractors(ctx, f, 1, Strategy::uniform_cell, rng);
    ++cell_hits[static_cast<std::size_t>(cell_of(kb, sg, ds[0]))];
  }
  REQUIRE(cell_hits[1] == 0);  // the selected cell never appears
  const std::vector<std::uint64_t> observed{cell_hits[0], cell_hits[2], cell_hits[3]};
  // df = 2; 11.83 is the two-sided 3-sigma point.
  REQUIRE(chi_square(observed, draws / 3.0) < 11.83);
}

TEST_CASE("sampling is a pure function of the rng state") {
  KnowledgeBase kb = make_kb(logic_fixture());
  const SubgraphPair sg = fixture_subgraph(kb);
  for (S4Mode mode : {S4Mode::exact, S4Mode::approximate}) {
    const Partition p = compute_partition(kb, sg, mode);
    const SamplerContext ctx{kb, sg, p};
    const LogicalForm f = form_by_index(6);
    for (Strategy s : {Strategy::random_global, Strategy::nearest, Strategy::uniform_cell}) {
      Rng r1 = Rng::for_draw(21, 5);
      Rng r2 = Rng::for_draw(21, 5);
      REQUIRE(select_correct_answer(ctx, f, r1) == select_correct_answer(ctx, f, r2));
      const auto d1 = sample_distractors(ctx, f, 2, s, r1);
      const auto d2 = sample_distractors(ctx, f, 2, s, r2);
      REQUIRE(d1 == d2);
    }
  }
}

TEST_CASE("approximate mode draws sound answers from the implicit complement") {
  KnowledgeBase kb = make_kb(logic_fixture());
  const SubgraphPair sg = fixture_subgraph(kb);
  const Partition p = compute_partition(kb, sg, S4Mode::approximate);
  const SamplerContext ctx{kb, sg, p};
  const LogicalForm f = form_by_index(7);  // answer = S4 = {a, c}
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) {
    Rng rng = Rng::for_draw(23, static_cast<std::uint64_t>(i));
    const EntityId x = select_correct_answer(ctx, f, rng);
    REQUIRE(cell_of(kb, sg, x) == 3);
    seen.insert(std::string(kb.entity_name(x)));
  }
  REQUIRE(seen == std::set<std::string>{"a", "c"});
}
