#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "lrcs/phantom.hpp"
#include "lrcs/types.hpp"

namespace lrcs::test {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  auto dir = std::filesystem::temp_directory_path() / "lrcs_tests" / (std::string(info->test_suite_name()) + "." + info->name()) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = {n(rng), n(rng)};
  return m;
}

// 32x32x2 phantom used wherever the default grid would make a test slow.
inline phantom::PhantomConfig small_phantom() {
  phantom::PhantomConfig c;
  c.grid = {32, 32, 2};
  c.r_endo = 6.0;
  c.r_epi = 12.0;
  return c;
}

}  // namespace lrcs::test
