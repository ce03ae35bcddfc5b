#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hintseg/config.hpp"
#include "hintseg/core_types.hpp"
#include "hintseg/rng.hpp"

namespace hintseg::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = tag;
    if (info) name += std::string("_") + info->test_suite_name() + "_" + info->name();
    path_ = std::filesystem::temp_directory_path() / ("hintseg_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline PredictionMap random_prediction(int h, int w, Rng& rng) {
  Grid<double> g(h, w);
  for (auto& v : g.data) v = rng.uniform();
  return PredictionMap(std::move(g));
}

inline PointAnnotation one_point(Point fg, Point bg) {
  PointAnnotation a;
  a.foreground_points = {fg};
  a.background_point = bg;
  a.n_objects = 1;
  return a;
}

/// Small, fast configuration for pipeline tests.
inline RunConfig quick_config(int epochs = 4, int w = 2) {
  RunConfig cfg;
  cfg.hint.w = w;
  cfg.epochs = epochs;
  cfg.batch_size = 2;
  cfg.encoder.stage_channels = {4, 4, 6, 8};
  cfg.encoder.reduced_channels = 3;
  cfg.encoder.base_width = 4;
  return cfg;
}

}  // namespace hintseg::test
