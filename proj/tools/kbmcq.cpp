// Command line front end: ingest, stats, show-forms, dump-lexicon,
// generate, validate. Exit codes: 0 success, 1 user error, 2 data error.

#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kbmcq/error.hpp"
#include "kbmcq/kb.hpp"
#include "kbmcq/logic.hpp"
#include "kbmcq/pipeline.hpp"
#include "kbmcq/sampler.hpp"
#include "kbmcq/templater.hpp"
#include "kbmcq/validate.hpp"
#include "kbmcq/version.hpp"

namespace {

std::string default_cache_path() {
  const char* dir = std::getenv("KBMCQ_CACHE_DIR");
  const std::string base = (dir && *dir) ? dir : ".";
  return base + "/kb.cache";
}

int exit_code_for(const kbmcq::Error& e) {
  switch (e.code()) {
    case kbmcq::Errc::io_error:
    case kbmcq::Errc::bad_config:
    case kbmcq::Errc::invalid_form:
      return 1;
    default:
      return 2;
  }
}

std::uint64_t parse_u64(const std::string& text, const char* what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    kbmcq::throw_error(kbmcq::Errc::bad_config,
                       std::string(what) + " must be a non-negative integer, got '" + text + "'");
  return value;
}

// "all" or a comma list like "1,2,5"; an empty result means all 14.
std::vector<int> parse_forms_arg(const std::string& arg) {
  std::vector<int> out;
  if (arg == "all") return out;
  std::size_t pos = 0;
  while (pos <= arg.size()) {
    const std::size_t comma = std::min(arg.find(',', pos), arg.size());
    const std::string token = arg.substr(pos, comma - pos);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
      kbmcq::throw_error(kbmcq::Errc::bad_config,
                         "--forms expects 'all' or a comma list of indices, got '" + arg + "'");
    out.push_back(value);
    pos = comma + 1;
  }
  return out;
}

struct IngestArgs {
  std::string input;
  std::string out = default_cache_path();
  bool english_only = true;
  bool strict = false;
};

int run_ingest(const IngestArgs& a) {
  kbmcq::ParseOptions opt;
  opt.english_only = a.english_only;
  opt.strict = a.strict;
  kbmcq::IngestReport report;
  const kbmcq::KnowledgeBase kb = kbmcq::parse_kb_file(a.input, opt, &report);
  kb.save(a.out);
  nlohmann::ordered_json j;
  j["input"] = a.input;
  j["cache"] = a.out;
  j["lines_total"] = report.lines_total;
  j["kept"] = report.kept;
  j["duplicates"] = report.duplicates;
  j["rejected"] = report.rejected;
  j["non_english"] = report.non_english;
  j["self_loops"] = report.self_loops;
  j["entities"] = kb.entity_count();
  j["relations"] = kb.relation_count();
  j["triples"] = kb.triple_count();
  std::cout << j.dump() << "\n";
  return 0;
}

struct GenerateArgs {
  std::string kb_path = default_cache_path();
  std::string count = "1000";
  std::uint64_t seed = 0;
  std::string strategy = "uniform";
  std::uint32_t choices = 3;
  std::string forms = "all";
  std::string s4_mode = "auto";
  std::uint32_t shards = 1;
  std::string format = "jsonl";
  std::string out = "dataset.jsonl";
  bool gzip = false;
  std::string lexicon;
  bool dedup = false;
};

int run_generate(const GenerateArgs& a) {
  const kbmcq::KnowledgeBase kb = kbmcq::KnowledgeBase::load(a.kb_path);

  kbmcq::RelationLexicon lex = kbmcq::RelationLexicon::builtin_defaults();
  if (!a.lexicon.empty()) {
    std::vector<std::string> warnings;
    lex = kbmcq::load_lexicon(a.lexicon, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  }

  kbmcq::GenerationConfig cfg;
  cfg.seed = a.seed;
  if (a.count == "all")
    cfg.count.reset();
  else
    cfg.count = parse_u64(a.count, "--count");
  cfg.strategy = *kbmcq::strategy_from_name(a.strategy);
  cfg.choices = a.choices;
  cfg.form_filter = parse_forms_arg(a.forms);
  if (a.s4_mode == "exact")
    cfg.s4_policy = kbmcq::S4Policy::exact;
  else if (a.s4_mode == "approximate")
    cfg.s4_policy = kbmcq::S4Policy::approximate;
  else
    cfg.s4_policy = kbmcq::S4Policy::auto_mode;
  cfg.shards = a.shards;
  cfg.dedup = a.dedup;

  const kbmcq::SubgraphIndex index(kb);
  kbmcq::EmitOptions out;
  out.format = *kbmcq::format_from_name(a.format);
  out.path = a.out;
  out.gzip = a.gzip;
  const kbmcq::EmitSummary summary = kbmcq::emit_dataset(kb, index, lex, cfg, out);
  std::cout << summary.to_json().dump() << "\n";
  return 0;
}

int run_stats(const std::string& kb_path) {
  const kbmcq::KnowledgeBase kb = kbmcq::KnowledgeBase::load(kb_path);
  std::cout << kbmcq::dataset_stats(kb).to_json().dump() << "\n";
  return 0;
}

int run_show_forms() {
  for (const auto& f : kbmcq::enumerate_forms()) {
    std::string bits;
    for (int c = 0; c < 4; ++c) bits += f.selects(c) ? '1' : '0';
    std::cout << f.index << '\t' << bits << '\t' << kbmcq::render_form(f) << "\n";
  }
  return 0;
}

int run_dump_lexicon() {
  std::cout << kbmcq::RelationLexicon::builtin_defaults().to_json() << "\n";
  return 0;
}

int run_validate(const std::string& dataset, const std::string& kb_path) {
  const kbmcq::KnowledgeBase kb = kbmcq::KnowledgeBase::load(kb_path);
  const kbmcq::ValidationReport report = kbmcq::validate_dataset(kb, dataset);
  nlohmann::ordered_json j;
  j["dataset"] = dataset;
  j["records"] = report.records;
  j["violations"] = report.violations;
  nlohmann::ordered_json sample = nlohmann::ordered_json::array();
  for (const auto& v : report.sample) {
    nlohmann::ordered_json row;
    row["line"] = v.line_no;
    row["id"] = v.id;
    row["reason"] = v.reason;
    sample.push_back(std::move(row));
  }
  j["sample"] = std::move(sample);
  std::cout << j.dump() << "\n";
  if (!report.clean()) {
    for (const auto& v : report.sample)
      std::cerr << "violation at line " << v.line_no << " id=" << v.id << ": " << v.reason
                << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Turn a ConceptNet-style triple dump into logically structured "
      "multiple-choice questions"};
  app.set_version_flag("--version", std::string("kbmcq ") + kbmcq::kToolVersion +
                                        " (cache format " +
                                        std::to_string(kbmcq::kCacheFormatVersion) + ")");
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Parse a triple dump and write the KB cache");
  ingest->add_option("input", ingest_args.input, "triple dump, tab separated, optionally gzipped")
      ->required();
  ingest->add_option("--out", ingest_args.out, "cache output path")->capture_default_str();
  ingest
      ->add_flag("--english-only,!--all-languages", ingest_args.english_only,
                 "keep /c/en/ concepts only")
      ->capture_default_str();
  ingest->add_flag("--strict", ingest_args.strict, "fail on the first malformed line");

  GenerateArgs gen_args;
  auto* generate = app.add_subcommand("generate", "Sample questions from a KB cache");
  generate->add_option("--kb", gen_args.kb_path, "KB cache path")->capture_default_str();
  generate->add_option("--count", gen_args.count, "questions to emit, or 'all' for a full sweep")
      ->capture_default_str();
  generate->add_option("--seed", gen_args.seed, "random seed")->capture_default_str();
  generate->add_option("--strategy", gen_args.strategy, "distractor strategy")
      ->check(CLI::IsMember({"random", "nearest", "uniform"}))
      ->capture_default_str();
  generate->add_option("--choices", gen_args.choices, "options per question, at least 2")
      ->capture_default_str();
  generate->add_option("--forms", gen_args.forms, "'all' or a comma list like 1,2,5")
      ->capture_default_str();
  generate->add_option("--s4-mode", gen_args.s4_mode, "complement cell handling")
      ->check(CLI::IsMember({"auto", "exact", "approximate"}))
      ->capture_default_str();
  generate->add_option("--shards", gen_args.shards, "parallel shard count")
      ->capture_default_str();
  generate->add_option("--format", gen_args.format, "output format")
      ->check(CLI::IsMember({"jsonl", "tsv"}))
      ->capture_default_str();
  generate->add_option("--out", gen_args.out, "output path")->capture_default_str();
  generate->add_flag("--gzip", gen_args.gzip, "gzip the output");
  generate->add_option("--lexicon", gen_args.lexicon,
                       "relation phrase file merged over the built-in defaults");
  generate->add_flag("--dedup", gen_args.dedup, "drop exact duplicate questions");

  std::string stats_kb = default_cache_path();
  auto* stats = app.add_subcommand("stats", "Report KB and subgraph statistics");
  stats->add_option("--kb", stats_kb, "KB cache path")->capture_default_str();

  auto* show_forms = app.add_subcommand("show-forms", "List the 14 logical forms");

  auto* dump_lexicon =
      app.add_subcommand("dump-lexicon", "Print the built-in relation phrases as JSON");

  std::string validate_dataset_path;
  std::string validate_kb = default_cache_path();
  auto* validate = app.add_subcommand("validate", "Check a generated dataset against the KB");
  validate->add_option("dataset", validate_dataset_path, "JSONL dataset, optionally gzipped")
      ->required();
  validate->add_option("--kb", validate_kb, "KB cache path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ingest) return run_ingest(ingest_args);
    if (*generate) return run_generate(gen_args);
    if (*stats) return run_stats(stats_kb);
    if (*show_forms) return run_show_forms();
    if (*dump_lexicon) return run_dump_lexicon();
    if (*validate) return run_validate(validate_dataset_path, validate_kb);
  } catch (const kbmcq::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
