#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "../support/checks.hpp"
#include "morse/error.hpp"

namespace morse::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("morse_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

using check::five_point;
using check::rel_err;
using check::ulp_distance;

/// Distance in units in the last place between two finite doubles.
}  // namespace morse::test

// Runs `stmt` and checks it throws morse::Error with the given code.
#define EXPECT_MORSE_ERROR(stmt, expected_code)                                   \
  do {                                                                            \
    try {                                                                         \
      stmt;                                                                       \
      ADD_FAILURE() << "expected error " << (expected_code) << ", nothing thrown"; \
    } catch (const morse::Error& e_) {                                            \
      EXPECT_EQ(e_.code(), (expected_code)) << e_.what();                         \
    }                                                                             \
  } while (0)
