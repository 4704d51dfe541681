#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace uidkit::tsv {

std::vector<std::string> split(std::string_view line, char sep = '\t');

/// Row-oriented TSV reader keyed by a header row. Lines starting with '#'
/// before the header are collected as comments.
class Reader {
 public:
  Reader(std::istream& in, std::string source_name);

  /// Throws InputError when any of `names` is missing from the header.
  void require_columns(const std::vector<std::string>& names) const;
  bool has_column(const std::string& name) const;

  /// Advances to the next non-empty data row.
  bool next();

  const std::string& field(const std::string& name) const;
  double number(const std::string& name) const;
  long long integer(const std::string& name) const;

  std::size_t line_number() const { return line_no_; }
  const std::vector<std::string>& comments() const { return comments_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  std::istream& in_;
  std::string source_;
  std::map<std::string, std::size_t> columns_;
  std::vector<std::string> row_;
  std::vector<std::string> comments_;
  std::size_t line_no_ = 0;
};

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace uidkit::tsv
