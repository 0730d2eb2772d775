#pragma once

#include <stdexcept>
#include <string>

namespace kbmcq {

enum class Errc {
  invalid_handle,
  parse_error,
  empty_kb,
  cache_corrupt,
  cache_version_mismatch,
  inconsistent_subgraph,
  requires_exact_mode,
  invalid_form,
  missing_lexicon_entry,
  lexicon_parse_error,
  no_distractor,
  insufficient_pool,
  empty_dataset,
  bad_config,
  io_error,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void throw_error(Errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace kbmcq
