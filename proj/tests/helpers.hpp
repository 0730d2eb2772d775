#pragma once
// Shared test scaffolding: toy-KB builders in the assertion dump format,
// brute-force reference oracles that work on raw name triples (no shared
// code with the indexed KB), a subprocess runner for the CLI binary, and
// a temp directory guard.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "kbmcq/kb.hpp"

namespace testutil {

using NameTriple = std::array<std::string, 3>;  // head, relation, tail

// One dump row in the 5-field assertion format; spaces in concept names
// become underscores, mirroring the normalization the parser undoes.
inline std::string dump_line(const std::string& head, const std::string& rel,
                             const std::string& tail, const std::string& lang = "en") {
  auto uri = [&](const std::string& name) {
    std::string s = name;
    std::replace(s.begin(), s.end(), ' ', '_');
    return "/c/" + lang + "/" + s;
  };
  return "/a/[/r/" + rel + "/," + uri(head) + "/," + uri(tail) + "/]\t/r/" + rel + "\t" +
         uri(head) + "\t" + uri(tail) + "\t{\"weight\": 1.0}";
}

inline std::string dump_text(const std::vector<NameTriple>& triples) {
  std::string out;
  for (const auto& t : triples) out += dump_line(t[0], t[1], t[2]) + "\n";
  return out;
}

inline kbmcq::KnowledgeBase make_kb(const std::vector<NameTriple>& triples,
                                    kbmcq::IngestReport* report = nullptr) {
  std::istringstream in(dump_text(triples));
  return kbmcq::parse_kb(in, {}, report);
}

// The six-triple fixture used across the logic and sampler tests:
// S1={f}, S2={b,d}, S3={e}, S4={a,c} for the subgraph (a,r1,b,r2,c).
inline std::vector<NameTriple> logic_fixture() {
  return {{"a", "r1", "b"}, {"a", "r1", "d"}, {"a", "r1", "f"},
          {"b", "r2", "c"}, {"d", "r2", "c"}, {"e", "r2", "c"}};
}

// ---- brute-force reference oracles over raw name triples ----

inline std::set<std::string> bf_tails(const std::vector<NameTriple>& ts, const std::string& a,
                                      const std::string& r) {
  std::set<std::string> out;
  for (const auto& t : ts)
    if (t[0] == a && t[1] == r) out.insert(t[2]);
  return out;
}

inline std::set<std::string> bf_heads(const std::vector<NameTriple>& ts, const std::string& r,
                                      const std::string& c) {
  std::set<std::string> out;
  for (const auto& t : ts)
    if (t[1] == r && t[2] == c) out.insert(t[0]);
  return out;
}

using NameSubgraph = std::array<std::string, 5>;  // a, r1, b, r2, c

inline std::set<NameSubgraph> bf_subgraphs(const std::vector<NameTriple>& ts) {
  std::set<NameSubgraph> out;
  for (const auto& first : ts)
    for (const auto& second : ts) {
      if (first[2] != second[0]) continue;
      const auto& a = first[0];
      const auto& b = first[2];
      const auto& c = second[2];
      if (a == b || b == c || a == c) continue;
      if (first[1] == second[1]) continue;
      out.insert({a, first[1], b, second[1], c});
    }
  return out;
}

// Truth-table cell: 0=S1, 1=S2, 2=S3, 3=S4.
inline int bf_cell(const std::vector<NameTriple>& ts, const NameSubgraph& sg,
                   const std::string& x) {
  bool p1 = false, p2 = false;
  for (const auto& t : ts) {
    if (t[0] == sg[0] && t[1] == sg[1] && t[2] == x) p1 = true;
    if (t[0] == x && t[1] == sg[3] && t[2] == sg[4]) p2 = true;
  }
  if (p1) return p2 ? 1 : 0;
  return p2 ? 2 : 3;
}

inline std::set<std::string> bf_universe(const std::vector<NameTriple>& ts) {
  std::set<std::string> out;
  for (const auto& t : ts) {
    out.insert(t[0]);
    out.insert(t[2]);
  }
  return out;
}

// Answer set of a form given its cell mask (bit 0 = S1 ... bit 3 = S4).
inline std::set<std::string> bf_answer_set(const std::vector<NameTriple>& ts,
                                           const NameSubgraph& sg, unsigned mask) {
  std::set<std::string> out;
  for (const auto& x : bf_universe(ts))
    if (mask >> bf_cell(ts, sg, x) & 1u) out.insert(x);
  return out;
}

// ---- randomized toy KBs for property tests ----

inline std::vector<NameTriple> random_triples(std::mt19937_64& gen, int max_entities,
                                              int max_relations, int max_triples) {
  std::uniform_int_distribution<int> ne(2, max_entities);
  std::uniform_int_distribution<int> nr(1, max_relations);
  const int entities = ne(gen);
  const int relations = nr(gen);
  std::uniform_int_distribution<int> nt(1, max_triples);
  std::uniform_int_distribution<int> pe(0, entities - 1);
  std::uniform_int_distribution<int> pr(0, relations - 1);
  const int triples = nt(gen);
  std::vector<NameTriple> out;
  out.reserve(static_cast<std::size_t>(triples));
  for (int i = 0; i < triples; ++i)
    out.push_back({"e" + std::to_string(pe(gen)), "R" + std::to_string(pr(gen)),
                   "e" + std::to_string(pe(gen))});
  return out;
}

// ---- filesystem and subprocess plumbing ----

class TempDir {
 public:
  TempDir() {
    char buf[] = "/tmp/kbmcq_test_XXXXXX";
    if (!mkdtemp(buf)) throw std::runtime_error("mkdtemp failed");
    path_ = buf;
  }
  ~TempDir() {
    const int rc = std::system(("rm -rf '" + path_ + "'").c_str());
    (void)rc;
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read failed: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'')
      q += "'\\''";
    else
      q += c;
  }
  q += "'";
  return q;
}

// Runs the built CLI binary. `env` entries are NAME=VALUE prefixes.
inline CliResult run_cli(const std::vector<std::string>& args,
                         const std::vector<std::string>& env = {}) {
  static int counter = 0;
  const std::string tag = "/tmp/kbmcq_cli_" + std::to_string(getpid()) + "_" +
                          std::to_string(counter++);
  const std::string out_path = tag + ".out";
  const std::string err_path = tag + ".err";
  std::string cmd = "env";
  for (const auto& e : env) cmd += " " + shell_quote(e);
  cmd += " " + shell_quote(KBMCQ_CLI_PATH);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " >" + shell_quote(out_path) + " 2>" + shell_quote(err_path);
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return r;
}

// Same, but the caller supplies a pre-quoted argument string.
inline CliResult run_cli(const std::string& arg_line,
                         const std::vector<std::string>& env = {}) {
  static int counter = 0;
  const std::string tag = "/tmp/kbmcq_cliline_" + std::to_string(getpid()) + "_" +
                          std::to_string(counter++);
  const std::string out_path = tag + ".out";
  const std::string err_path = tag + ".err";
  std::string cmd = "env";
  for (const auto& e : env) cmd += " " + shell_quote(e);
  cmd += " " + shell_quote(KBMCQ_CLI_PATH) + " " + arg_line;
  cmd += " >" + shell_quote(out_path) + " 2>" + shell_quote(err_path);
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return r;
}

// Collapses whitespace runs, trims the ends, and drops any space before a
// question mark. Golden string comparisons run through this.
inline std::string normalize_ws(const std::string& s) {
  std::string out;
  bool in_space = false;
  for (char c : s) {
    const bool ws = (c == ' ' || c == '\t' || c == '\n' || c == '\r');
    if (ws) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty() && c != '?') out += ' ';
    in_space = false;
    out += c;
  }
  return out;
}

// Pearson statistic against a flat expectation.
inline double chi_square(const std::vector<std::uint64_t>& observed, double expected) {
  double chi = 0.0;
  for (auto o : observed) {
    const double d = static_cast<double>(o) - expected;
    chi += d * d / expected;
  }
  return chi;
}

template <class Fn>
std::optional<kbmcq::Errc> thrown_code(Fn&& fn) {
  try {
    fn();
  } catch (const kbmcq::Error& e) {
    return e.code();
  } catch (...) {
  }
  return std::nullopt;
}

template <class Fn>
std::string thrown_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace testutil
