#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlab/mt_params.hpp"

namespace mtlab::config {

/// A quadratic parameter given directly (`value`) or found by bisection on
/// `bracket` for the given preperiod and period.
struct ParamSpec {
  std::optional<double> value;
  int preperiod = 0;
  int period = 0;
  std::pair<double, double> bracket{1.0, 2.0};

  mt::MTCertificate resolve() const;
};

struct SystemConfig {
  ParamSpec a{2.0, 2, 1, {1.9, 2.0}};
  ParamSpec b{std::nullopt, 3, 1, {1.5, 1.6}};
  int m1 = 0;  // 0: m0
  double alpha = 1e-3;
  std::vector<double> phi{0.0, 1.0};
};

struct SigmaConfig {
  double sigma = 0.0;   // 0: estimate
  double radius = 0.0;  // 0: sqrt(alpha)
  int trials = 200;
  int segment = 40;
};

struct CoordsConfig {
  int levels = 8;
  int distortion_level = 4;
  int distortion_samples = 1000;
};

struct LyapunovConfig {
  std::size_t orbits = 100;
  long steps = 1000000;
  long burn_in = 1000;
};

struct CurvesConfig {
  std::size_t count = 50;
  int depth_min = 5;
  int depth_max = 20;
  int l_max = 8;
  int grid = 256;
  int linear_depth = 8;
  int separation_depth = 2;
  int m_search = 3;
  double threshold = 1e-4;
  std::vector<double> epsilon{0.1, 0.01, 0.001};
};

struct MeasureConfig {
  int n_theta = 512;
  int n_y = 256;
  int samples = 64;
  int starts = 4;
  std::vector<int> attractor_n{2, 3};
};

struct RecurrenceConfig {
  std::size_t orbits = 10000;
  std::vector<long> n{1000, 10000, 100000};
  double epsilon = 3e-3;
  double delta_tilde = 0.45;  // 0.1 leaves n = 1e3 in the Poisson regime
  long burn_in = 1000;
  double r_span = 5.0;
  double r_step = 0.5;
  std::size_t samples = 100000;
  int curve_depth = 2;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out = "out";
};

struct ExperimentConfig {
  SystemConfig system;
  SigmaConfig sigma;
  CoordsConfig coords;
  LyapunovConfig lyapunov;
  CurvesConfig curves;
  MeasureConfig measure;
  RecurrenceConfig recurrence;
  RunConfig run;
};

/// Built-in presets; only "default" exists.
ExperimentConfig preset(const std::string& name);

/// Applies `key = value` lines grouped in `[section]`s on top of `base`.
/// Unknown sections or keys and out-of-range values throw ConfigError
/// naming the key and its admissible range.
ExperimentConfig parse(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load(const std::filesystem::path& path, ExperimentConfig base = {});

/// The resolved config in the same section/key layout the parser accepts.
nlohmann::json to_json(const ExperimentConfig& c);
std::string to_text(const ExperimentConfig& c);

}  // namespace mtlab::config
