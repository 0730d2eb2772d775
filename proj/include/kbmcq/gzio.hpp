#pragma once
// Line-oriented sources and sinks over plain or gzip files. zlib's gzFile
// API reads uncompressed input transparently, so one reader covers both.

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <string>
#include <string_view>

#include "kbmcq/error.hpp"

namespace kbmcq {

class LineSource {
 public:
  virtual ~LineSource() = default;
  // Fills `out` with the next line (no terminator). Returns false at end.
  virtual bool next_line(std::string& out) = 0;
};

class StreamLineSource final : public LineSource {
 public:
  explicit StreamLineSource(std::istream& in) : in_(&in) {}

  bool next_line(std::string& out) override {
    if (!std::getline(*in_, out)) return false;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

 private:
  std::istream* in_;
};

class GzLineSource final : public LineSource {
 public:
  explicit GzLineSource(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (!file_) throw_error(Errc::io_error, "cannot open input file: " + path);
    gzbuffer(file_, 1 << 20);
  }
  ~GzLineSource() override {
    if (file_) gzclose(file_);
  }
  GzLineSource(const GzLineSource&) = delete;
  GzLineSource& operator=(const GzLineSource&) = delete;

  bool next_line(std::string& out) override {
    out.clear();
    char buf[1 << 16];
    bool got = false;
    for (;;) {
      if (gzgets(file_, buf, sizeof buf) == nullptr) return got;
      got = true;
      std::size_t len = std::strlen(buf);
      if (len > 0 && buf[len - 1] == '\n') {
        out.append(buf, len - 1);
        break;
      }
      out.append(buf, len);
      if (len + 1 < sizeof buf) break;  // EOF without trailing newline
    }
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

 private:
  gzFile file_;
};

class LineSink {
 public:
  virtual ~LineSink() = default;
  virtual void write_line(std::string_view line) = 0;
  virtual void flush() {}
};

class FileLineSink final : public LineSink {
 public:
  explicit FileLineSink(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw_error(Errc::io_error, "cannot open output file: " + path);
  }

  void write_line(std::string_view line) override {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.put('\n');
    if (!out_) throw_error(Errc::io_error, "write failed");
  }

  void flush() override { out_.flush(); }

 private:
  std::ofstream out_;
};

class GzLineSink final : public LineSink {
 public:
  explicit GzLineSink(const std::string& path) : file_(gzopen(path.c_str(), "wb")) {
    if (!file_) throw_error(Errc::io_error, "cannot open output file: " + path);
  }
  ~GzLineSink() override {
    if (file_) gzclose(file_);
  }
  GzLineSink(const GzLineSink&) = delete;
  GzLineSink& operator=(const GzLineSink&) = delete;

  void write_line(std::string_view line) override {
    if (gzwrite(file_, line.data(), static_cast<unsigned>(line.size())) == 0 && !line.empty())
      throw_error(Errc::io_error, "gzip write failed");
    if (gzputc(file_, '\n') < 0) throw_error(Errc::io_error, "gzip write failed");
  }

  void flush() override { gzflush(file_, Z_SYNC_FLUSH); }

 private:
  gzFile file_;
};

inline std::unique_ptr<LineSink> open_line_sink(const std::string& path, bool gzip) {
  if (gzip) return std::make_unique<GzLineSink>(path);
  return std::make_unique<FileLineSink>(path);
}

}  // namespace kbmcq
