#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <boost/version.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include "icadyn/cli.hpp"
#include "icadyn/errors.hpp"

namespace icadyn::cli {

using nlohmann::json;

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

json write_outputs(const RunConfig& cfg, const RunResult& result, const std::filesystem::path& out_dir,
                   double wall_seconds, unsigned threads) {
  std::filesystem::create_directories(out_dir);
  json outputs = json::array();
  for (const auto& f : result.files) {
    std::ofstream out(out_dir / f.name, std::ios::binary);
    out << f.content;
    if (!out) throw std::runtime_error("cannot write " + (out_dir / f.name).string());
    outputs.push_back({{"file", f.name}, {"sha256", sha256_hex(f.content)}, {"bytes", f.content.size()}});
  }
  json checks = json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"limit", c.limit}, {"detail", c.detail}});
  }
  json manifest = {
      {"tool", "icadyn"},
      {"experiment", experiment_name(cfg.experiment)},
      {"config", cfg.raw},
      {"seeds", result.seeds},
      {"g_sign", result.g_sign},
      {"versions",
       {{"icadyn", kVersion},
        {"compiler", __VERSION__},
        {"boost", BOOST_LIB_VERSION},
        {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                      NLOHMANN_JSON_VERSION_PATCH)},
        {"fmt", FMT_VERSION},
        {"openssl", OPENSSL_VERSION_TEXT}}},
      {"threads", threads},
      {"wall_clock_seconds", wall_seconds},
      {"status", result.passed() ? "pass" : "tolerance_failure"},
      {"checks", checks},
      {"info", result.info},
      {"outputs", outputs},
  };
  std::ofstream out(out_dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  return manifest;
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& err) {
    throw ConfigError("config " + path.string() + ": " + err.what());
  }
}

int execute(nlohmann::json config, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed,
            unsigned threads) {
  RunConfig cfg;
  try {
    if (seed) {
      if (!config.is_object()) throw ConfigError("config: expected an object");
      config["seed"] = *seed;
    }
    cfg = parse_config(config);
  } catch (const std::invalid_argument& e) {  // ConfigError
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  try {
    result = run(cfg, threads);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure (domain): " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::runtime_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(cfg, result, out_dir, wall, threads);
  for (const auto& c : result.checks) {
    std::cerr << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << fmt::format("{:.4g}", c.value)
              << " (limit " << fmt::format("{:.4g}", c.limit) << ")" << (c.detail.empty() ? "" : "; " + c.detail)
              << "\n";
  }
  std::cerr << experiment_name(cfg.experiment) << ": " << result.files.size() << " files in " << out_dir.string()
            << " (" << fmt::format("{:.2f}", wall) << " s)\n";
  return result.passed() ? kExitPass : kExitTolerance;
}

}  // namespace icadyn::cli
