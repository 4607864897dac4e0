#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icadyn/cli.hpp"
#include "icadyn/errors.hpp"

using namespace icadyn;
using namespace icadyn::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("icadyn_test_" + name);
  fs::remove_all(dir);
  return dir;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

json ode_config(double q0) {
  return {{"experiment", "ode"},
          {"seed", 5},
          {"model", {{"prior", "point"}, {"source", "rademacher"}, {"q0", q0}}},
          {"algorithm", {{"f", "neg_cube"}, {"phi", "none"}, {"tau", 0.1}, {"T", 2}}},
          {"g_sign", 1}};
}

json small_compare_config() {
  return {{"experiment", "compare"},
          {"seed", 11},
          {"model", {{"n", 200}, {"prior", "point"}, {"source", "rademacher"}, {"q0", 0.6}}},
          {"algorithm", {{"f", "neg_cube"}, {"phi", "none"}, {"tau", 0.1}, {"T", 0.5}}},
          {"numerics", {{"trials", 3}, {"record_dt", 0.1}}},
          {"g_sign", "auto"},
          {"calibration", {{"n", 100}, {"samples", 2000}}}};
}

}  // namespace

TEST_CASE("sha256 of a known string", "[cli]") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config validation happens before any compute", "[cli]") {
  const auto out = scratch_dir("bad");
  SECTION("|Q0| > 1") {
    auto cfg = ode_config(1.5);
    CHECK(execute(cfg, out, std::nullopt, 1) == kExitConfig);
  }
  SECTION("unknown key") {
    auto cfg = ode_config(0.5);
    cfg["algorithm"]["learning_rate"] = 0.1;
    CHECK(execute(cfg, out, std::nullopt, 1) == kExitConfig);
  }
  SECTION("ode with a regularizer") {
    auto cfg = ode_config(0.5);
    cfg["algorithm"]["phi"] = "l1";
    cfg["algorithm"]["beta"] = 1.0;
    CHECK(execute(cfg, out, std::nullopt, 1) == kExitConfig);
  }
  SECTION("pde grid that cannot hold the initial density") {
    json cfg = {{"experiment", "pde"},
                {"model", {{"prior", "point"}, {"q0", 0.5}}},
                {"algorithm", {{"tau", 0.1}, {"T", 1}}},
                {"numerics", {{"grid", {{"x_min", -2}, {"x_max", 2}, {"n_cells", 128}}}}},
                {"g_sign", 1}};
    CHECK(execute(cfg, out, std::nullopt, 1) == kExitConfig);
  }
  SECTION("unknown experiment") {
    auto cfg = ode_config(0.5);
    cfg["experiment"] = "plot";
    CHECK(execute(cfg, out, std::nullopt, 1) == kExitConfig);
  }
  CHECK_FALSE(fs::exists(out));
  CHECK_THROWS_AS(parse_config(json{{"experiment", "roc"}, {"model", {{"prior", "point"}}}, {"roc", {{"times", {1}}}},
                                    {"algorithm", {{"T", 2}}}}),
                  ConfigError);
}

TEST_CASE("ode with q0 = 0 writes a flat zero column", "[cli]") {
  const auto out = scratch_dir("ode0");
  REQUIRE(execute(ode_config(0.0), out, std::nullopt, 1) == kExitPass);
  const auto rows = read_csv(out / "ode.csv");
  REQUIRE(rows.size() > 2);
  CHECK(rows[0] == std::vector<std::string>{"t", "q", "Q"});
  for (std::size_t r = 1; r < rows.size(); ++r) CHECK(rows[r][1] == "0");
  const auto manifest = read_json(out / "manifest.json");
  CHECK(manifest["status"] == "pass");
  CHECK(manifest["g_sign"]["source"] == "config");
  CHECK(manifest["experiment"] == "ode");
  fs::remove_all(out);
}

TEST_CASE("same config and seed give identical bytes", "[cli]") {
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  REQUIRE(execute(small_compare_config(), a, std::nullopt, 1) == kExitPass);
  REQUIRE(execute(small_compare_config(), b, std::nullopt, 4) == kExitPass);
  const auto ma = read_json(a / "manifest.json"), mb = read_json(b / "manifest.json");
  CHECK(ma["outputs"] == mb["outputs"]);
  CHECK(ma["seeds"] == mb["seeds"]);
  CHECK(ma["g_sign"] == mb["g_sign"]);
  for (const auto& f : ma["outputs"]) {
    std::ifstream in(a / f["file"].get<std::string>(), std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(sha256_hex(bytes) == f["sha256"]);
  }
  // g_sign resolution and evidence are recorded
  CHECK(ma["g_sign"]["source"] == "calibration");
  CHECK(ma["g_sign"].contains("evidence"));

  const auto c = scratch_dir("det_c");
  REQUIRE(execute(small_compare_config(), c, std::uint64_t{12}, 1) == kExitPass);
  const auto mc = read_json(c / "manifest.json");
  CHECK(mc["config"]["seed"] == 12);
  CHECK(mc["outputs"] != ma["outputs"]);
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("compare over T = 0 passes trivially", "[cli]") {
  const auto out = scratch_dir("t0");
  auto cfg = small_compare_config();
  cfg["algorithm"]["T"] = 0;
  CHECK(execute(cfg, out, std::nullopt, 1) == kExitPass);
  const auto rows = read_csv(out / "compare_ode.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"t", "q_sim_mean", "q_sim_std", "q_ode", "band", "pass"});
  CHECK(rows[1].back() == "1");
  fs::remove_all(out);
}

TEST_CASE("a violated band gives exit code 2", "[cli]") {
  const auto out = scratch_dir("band");
  auto cfg = small_compare_config();
  cfg["g_sign"] = 1;
  cfg["compare"] = {{"band_abs", 0.0}, {"band_sigma", 0.0}};
  CHECK(execute(cfg, out, std::nullopt, 1) == kExitTolerance);
  CHECK(read_json(out / "manifest.json")["status"] == "tolerance_failure");
  fs::remove_all(out);
}

TEST_CASE("a leaking pde domain gives exit code 4", "[cli]") {
  const auto out = scratch_dir("leak");
  json cfg = {{"experiment", "pde"},
              {"model", {{"prior", "point"}, {"q0", 0.96}}},
              {"algorithm", {{"tau", 0.5}, {"T", 20}}},
              {"numerics", {{"grid", {{"x_min", -2}, {"x_max", 2}, {"n_cells", 256}}}}},
              {"g_sign", 1}};
  CHECK(execute(cfg, out, std::nullopt, 1) == kExitNumeric);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("bifurcation tables", "[cli]") {
  SECTION("Rademacher source") {
    const auto out = scratch_dir("bif");
    json cfg = {{"experiment", "bifurcation"},
                {"model", {{"source", "rademacher"}}},
                {"algorithm", {{"f", "neg_cube"}}},
                {"g_sign", 1}};
    REQUIRE(execute(cfg, out, std::nullopt, 1) == kExitPass);
    const auto fp = read_csv(out / "fixed_points.csv");
    REQUIRE(fp.size() == 5);
    for (std::size_t r = 1; r < fp.size(); ++r) {
      CHECK(std::stod(fp[r][1]) < std::stod(fp[r][2]));
    }
    const auto tc = read_csv(out / "tau_c.csv");
    CHECK(std::abs(std::stod(tc[1][0]) - 0.1621792641) < 1e-8);
    const auto manifest = read_json(out / "manifest.json");
    CHECK(manifest.contains("seeds"));
    fs::remove_all(out);
  }
  SECTION("Gaussian-matching source: no fixed points, curves below zero") {
    const auto out = scratch_dir("bif_gauss");
    json cfg = {{"experiment", "bifurcation"},
                {"model", {{"source", "gaussian"}}},
                {"algorithm", {{"f", "neg_cube"}}},
                {"g_sign", 1}};
    REQUIRE(execute(cfg, out, std::nullopt, 1) == kExitPass);
    const auto fp = read_csv(out / "fixed_points.csv");
    REQUIRE(fp.size() == 5);
    for (std::size_t r = 1; r < fp.size(); ++r) {
      CHECK(fp[r][1].empty());
      CHECK(fp[r][2].empty());
    }
    const auto curves = read_csv(out / "bifurcation_curves.csv");
    REQUIRE(curves.size() == 4 * 200 + 1);
    for (std::size_t r = 1; r < curves.size(); ++r) CHECK(std::stod(curves[r][2]) < 0.0);
    CHECK(read_csv(out / "tau_c.csv")[1].size() <= 1);
    fs::remove_all(out);
  }
}

TEST_CASE("config files in the repository parse", "[cli]") {
  for (const auto& entry : fs::directory_iterator(fs::path(ICADYN_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json") continue;
    INFO(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()));
  }
}
