// Shared helpers for the test binaries.
#ifndef PHX_TESTS_TEST_UTIL_H
#define PHX_TESTS_TEST_UTIL_H

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

namespace phx_test {

// unique scratch directory per test binary invocation
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("phx_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace phx_test

#endif
