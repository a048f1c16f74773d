// SPDX-License-Identifier: Apache-2.0
// Command-line runner: hslab run|validate <config.json>, hslab version.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hslab/experiment.hpp"
#include "hslab/version.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

int report_issues(const std::vector<hslab::ConfigIssue>& issues) {
  std::cerr << hslab::issues_to_json(issues).dump(2) << '\n';
  return kExitValidation;
}

// Loads and validates the config, then applies HSLAB_SEED.
hslab::ValidationResult load(const std::string& path) {
  hslab::ValidationResult bad;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    bad.issues.push_back({"", "io", "cannot read config file " + path});
    return bad;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  hslab::Json doc;
  try {
    doc = hslab::Json::parse(buf.str());
  } catch (const hslab::Json::parse_error& e) {
    bad.issues.push_back({"", "json-syntax", e.what()});
    return bad;
  }
  hslab::ValidationResult res = hslab::validate_config(doc);
  if (const char* env = std::getenv("HSLAB_SEED")) {
    const std::string s(env);
    std::uint64_t seed = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
      res.issues.push_back({"env.HSLAB_SEED", "type", "HSLAB_SEED must be a nonnegative integer"});
      res.config.reset();
    } else if (res.config) {
      res.config->settings.seed = seed;
    }
  }
  return res;
}

int run(const std::string& path, unsigned threads, const std::string& out_dir) {
  auto res = load(path);
  if (!res.ok()) return report_issues(res.issues);
  hslab::ExperimentConfig& cfg = *res.config;
  cfg.settings.threads = threads;
  std::filesystem::path prefix(cfg.output);
  if (!out_dir.empty() && prefix.is_relative()) prefix = std::filesystem::path(out_dir) / prefix;
  try {
    const hslab::Report rep = hslab::run_experiment(cfg);
    for (const auto& f : hslab::write_report(rep, prefix.string())) std::cout << f << '\n';
    return 0;
  } catch (const hslab::Error& e) {
    const bool numeric = e.kind() == hslab::ErrorKind::numeric || e.kind() == hslab::ErrorKind::quadrature ||
                         e.kind() == hslab::ErrorKind::estimator || e.kind() == hslab::ErrorKind::invariant;
    hslab::Json j = {{"error", {{"kind", hslab::to_string(e.kind())}, {"code", e.code()}, {"message", e.what()}}}};
    std::cerr << j.dump(2) << '\n';
    return numeric ? kExitNumeric : kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << hslab::Json{{"error", {{"kind", "io"}, {"code", "io"}, {"message", e.what()}}}}.dump(2) << '\n';
    return 1;
  }
}

int validate(const std::string& path) {
  const auto res = load(path);
  if (!res.ok()) return report_issues(res.issues);
  std::cout << "valid: " << res.config->experiment;
  if (res.config->model) std::cout << " on " << hslab::describe(*res.config->model);
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-term sensitivity experiments for diffusion pricing problems"};
  app.require_subcommand(1);
  std::string config;
  unsigned threads = 0;
  std::string out_dir;

  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run_cmd->add_option("config", config, "Path to the JSON config")->required();
  run_cmd->add_option("--threads", threads, "Worker threads (results do not depend on it)");
  run_cmd->add_option("--out", out_dir, "Directory for relative output prefixes");

  auto* val_cmd = app.add_subcommand("validate", "Validate a JSON config without running it");
  val_cmd->add_option("config", config, "Path to the JSON config")->required();

  app.add_subcommand("version", "Print the version");

  CLI11_PARSE(app, argc, argv);
  if (*run_cmd) return run(config, threads, out_dir);
  if (*val_cmd) return validate(config);
  std::cout << "hslab " << hslab::kVersion << '\n';
  return 0;
}
