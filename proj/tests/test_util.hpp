#pragma once

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>

#include "emgesture/error.hpp"

// Asserts that `expr` throws emg::Error with the given code.
#define EXPECT_ERROR_CODE(expr, expected_code)                                       \
  do {                                                                               \
    try {                                                                            \
      (void)(expr);                                                                  \
      ADD_FAILURE() << "expected emg::Error(" << (expected_code) << ") from " #expr; \
    } catch (const emg::Error& e_) {                                                 \
      EXPECT_EQ(e_.code(), std::string(expected_code)) << e_.what();                 \
    }                                                                                \
  } while (0)

inline std::filesystem::path make_temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("emgesture_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

inline double rel_l2(std::span<const double> a, std::span<const double> ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ref[i]) * (a[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double l2(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}
