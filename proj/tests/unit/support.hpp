#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "uidkit/error.hpp"

namespace testsupport {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(UIDKIT_TEST_DATA) / name;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw uidkit::InputError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("uidkit_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
