#include "uidkit/tsv.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "uidkit/error.hpp"

namespace uidkit::tsv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

namespace {
void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}
}  // namespace

Reader::Reader(std::istream& in, std::string source_name)
    : in_(in), source_(std::move(source_name)) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      comments_.push_back(line);
      continue;
    }
    const auto names = split(line);
    for (std::size_t i = 0; i < names.size(); ++i) columns_[names[i]] = i;
    return;
  }
  throw InputError(source_ + ": missing header row");
}

void Reader::require_columns(const std::vector<std::string>& names) const {
  for (const auto& name : names) {
    if (!columns_.count(name)) {
      throw InputError(source_ + ": missing column '" + name + "'");
    }
  }
}

bool Reader::has_column(const std::string& name) const { return columns_.count(name) > 0; }

bool Reader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    row_ = split(line);
    if (row_.size() < columns_.size()) {
      fail("expected " + std::to_string(columns_.size()) + " fields, got " +
           std::to_string(row_.size()));
    }
    return true;
  }
  return false;
}

const std::string& Reader::field(const std::string& name) const {
  const auto it = columns_.find(name);
  if (it == columns_.end()) fail("unknown column '" + name + "'");
  return row_.at(it->second);
}

double Reader::number(const std::string& name) const {
  const auto& text = field(name);
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    fail("column '" + name + "': not a number: '" + text + "'");
  }
  return value;
}

long long Reader::integer(const std::string& name) const {
  const auto& text = field(name);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail("column '" + name + "': not an integer: '" + text + "'");
  }
  return value;
}

void Reader::fail(const std::string& what) const {
  throw InputError(source_ + ":" + std::to_string(line_no_) + ": " + what);
}

std::string format_double(double value) {
  char buf[64];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

}  // namespace uidkit::tsv
