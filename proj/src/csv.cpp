#include "geb/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geb/errors.hpp"

namespace geb::csv {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ConfigError(source.string() + ": missing column '" + name + "'");
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open file");
  Table t;
  t.source = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto cells = split(s);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields, found " +
                        std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw ConfigError(path.string() + ": empty file");
  return t;
}

double number(const Table& t, std::size_t row, std::size_t col) {
  const std::string& s = t.rows[row][col];
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(t.source.string() + ": row " + std::to_string(row + 1) + ", column '" +
                      t.header[col] + "': '" + s + "' is not a number");
  }
  return v;
}

long integer(const Table& t, std::size_t row, std::size_t col) {
  const std::string& s = t.rows[row][col];
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError(t.source.string() + ": row " + std::to_string(row + 1) + ", column '" +
                      t.header[col] + "': '" + s + "' is not an integer");
  }
  return v;
}

std::string format(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path) {
  f_ = std::fopen(path.string().c_str(), "w");
  if (!f_) throw Error(path.string() + ": cannot open for writing");
  for (const auto& h : header) cell(h);
  end_row();
}

Writer::~Writer() {
  if (f_) std::fclose(f_);
}

Writer& Writer::cell(const std::string& s) {
  if (!first_) std::fputc(',', f_);
  std::fputs(s.c_str(), f_);
  first_ = false;
  return *this;
}

Writer& Writer::cell(double v) { return cell(format(v)); }

Writer& Writer::cell(long v) { return cell(std::to_string(v)); }

void Writer::end_row() {
  std::fputc('\n', f_);
  first_ = true;
  if (std::ferror(f_)) throw Error(path_.string() + ": write failed");
}

}  // namespace geb::csv
