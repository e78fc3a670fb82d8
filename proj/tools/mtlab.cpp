#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "mtlab/config.hpp"
#include "mtlab/error.hpp"
#include "mtlab/runner.hpp"

using namespace mtlab;

namespace {

struct Flags {
  std::string config;
  std::string preset = "default";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
};

int report(const std::string& kind, const std::string& message, const std::string& command,
           const std::optional<std::filesystem::path>& out) {
  const nlohmann::json err{{"error", {{"kind", kind}, {"message", message}, {"command", command}}}};
  std::cerr << err.dump() << "\n";
  if (out) {
    std::error_code ec;
    std::filesystem::create_directories(*out, ec);
    if (!ec) std::ofstream(*out / "error.json") << err.dump(2) << "\n";
  }
  return kind == "ConfigError" ? 1 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skew-product experiments over Misiurewicz-Thurston quadratic maps"};
  app.require_subcommand(1);
  app.set_version_flag("--version", runner::kToolVersion);

  Flags f;
  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "INI file applied on top of the preset")->check(CLI::ExistingFile);
    sub->add_option("--preset", f.preset, "Built-in preset")->check(CLI::IsMember({"default"}));
    sub->add_option("--seed", f.seed, "Master seed");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  };

  std::vector<std::string> names = runner::commands();
  names.push_back("all");
  for (const auto& name : names) common(app.add_subcommand(name));
  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "Re-hash the outputs listed in a manifest");
  verify->add_option("dir", verify_dir, "Run directory")->required();
  auto* show = app.add_subcommand("show-config", "Print the resolved configuration");
  common(show);

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  if (command == "verify") {
    try {
      const auto r = runner::verify(verify_dir);
      nlohmann::json j{{"checked", r.checked}, {"mismatched", r.mismatched}, {"missing", r.missing}, {"ok", r.ok()}};
      std::cout << j.dump(2) << "\n";
      return r.ok() ? 0 : 2;
    } catch (const Error& e) {
      return report(e.kind(), e.what(), command, std::nullopt);
    }
  }

  std::optional<std::filesystem::path> out_dir = f.out;
  try {
    auto cfg = config::preset(f.preset);
    if (!f.config.empty()) cfg = config::load(f.config, cfg);
    if (f.seed) cfg.run.seed = *f.seed;
    if (f.out) cfg.run.out = *f.out;
    if (f.workers) cfg.run.workers = *f.workers;
    out_dir = cfg.run.out;
    if (command == "show-config") {
      std::cout << config::to_text(cfg);
      return 0;
    }
    const auto manifest = runner::run(command, cfg);
    std::cout << "wrote " << manifest["outputs"].size() << " files to " << cfg.run.out << " in "
              << manifest["wall_clock_seconds"].get<double>() << " s\n";
    return 0;
  } catch (const Error& e) {
    return report(e.kind(), e.what(), command, out_dir);
  } catch (const std::exception& e) {
    return report("InternalError", e.what(), command, out_dir);
  }
}
