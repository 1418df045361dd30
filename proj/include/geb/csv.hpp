#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace geb::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a named column; ConfigError naming the file when absent.
  std::size_t column(const std::string& name) const;
  std::filesystem::path source;
};

/// Comma-separated, first line a header, no quoting. Blank lines and lines
/// starting with '#' are skipped.
Table read(const std::filesystem::path& path);

/// Parses a numeric cell; ConfigError with file, line and column on failure.
double number(const Table& t, std::size_t row, std::size_t col);
long integer(const Table& t, std::size_t row, std::size_t col);

/// Shortest text that parses back to exactly the same double.
std::string format(double v);

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  Writer& cell(const std::string& s);
  Writer& cell(double v);
  Writer& cell(long v);
  Writer& cell(int v) { return cell(static_cast<long>(v)); }
  Writer& cell(std::size_t v) { return cell(static_cast<long>(v)); }
  void end_row();

 private:
  std::filesystem::path path_;
  std::FILE* f_ = nullptr;
  bool first_ = true;
};

}  // namespace geb::csv
