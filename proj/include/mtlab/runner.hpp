#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtlab/config.hpp"
#include "mtlab/expanding_coords.hpp"
#include "mtlab/skew_product.hpp"

namespace mtlab::runner {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything the experiments share: certified parameters, the base model,
/// the skew system and the recurrence constants (absent when alpha = 0).
struct Setup {
  mt::MTCertificate a;
  mt::MTCertificate b;
  std::shared_ptr<const coords::ExpandingModel> model;
  std::shared_ptr<const skew::SkewSystem> system;
  std::optional<skew::SigmaFit> sigma_fit;
  std::optional<skew::BEConstants> constants;
};

Setup build(const config::ExperimentConfig& cfg);
nlohmann::json derived_constants(const Setup& s);

/// Experiment subcommands, in the order `all` runs them.
const std::vector<std::string>& commands();

/// Runs one subcommand (or "all"), writing its outputs and manifest.json
/// into cfg.run.out. Returns the manifest.
nlohmann::json run(const std::string& command, const config::ExperimentConfig& cfg);

struct VerifyResult {
  std::size_t checked = 0;
  std::vector<std::string> mismatched;
  std::vector<std::string> missing;
  bool ok() const noexcept { return mismatched.empty() && missing.empty(); }
};

/// Re-hashes every output listed in dir/manifest.json.
VerifyResult verify(const std::filesystem::path& dir);

std::string sha256_file(const std::filesystem::path& path);

/// Manifest with the run-dependent fields (wall clock) removed, for
/// comparing two runs.
nlohmann::json comparable(nlohmann::json manifest);

}  // namespace mtlab::runner
