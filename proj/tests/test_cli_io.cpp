#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "fractal_kp/experiment.hpp"

using namespace fkp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  static const std::string stamp = std::to_string(std::random_device{}());
  fs::path p = fs::temp_directory_path() / ("fkp_test_" + stamp) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json minimal() {
  return json::parse(R"({
    "fractal": {"kind": "cantor", "eps": "1/3", "level": 2, "embedding": {"scale": 1.0, "shift": 0.5}},
    "amplitudes": {"r1": {"family": "constant", "value": 0.5},
                   "r2": {"family": "constant", "value": -0.25}}
  })");
}

json kdv_document() {
  return json::parse(R"({
    "fractal": {"kind": "cantor", "eps": "1/3", "level": 2, "embedding": {"scale": 1.0, "shift": 0.5}},
    "isometry": {"alpha": -1, "beta": 0},
    "kdv": true,
    "amplitudes": {"r1": {"family": "constant", "value": 1.0, "sign": "nonnegative"},
                   "r2": {"family": "constant", "value": -0.5, "sign": "nonpositive"}},
    "grid": {"x": {"min": -2, "step": 0.1, "count": 41}, "y": {"min": 0, "step": 0.1, "count": 1},
             "t": {"min": 0, "step": 0.1, "count": 3}}
  })");
}

std::vector<std::string> violations_of(const json& doc) {
  try {
    parse_config_document(doc);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

int run_cli(const std::string& args) {
  const std::string cmd = fmt::format("\"{}\" {} > /dev/null 2>&1", FKP_CLI_PATH, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

}  // namespace

TEST_CASE("minimal config fills the documented defaults") {
  auto cfg = parse_config(minimal().dump());
  CHECK(cfg.mode == ComponentMode::TwoComponent);
  CHECK(cfg.backend == FieldBackend::Rational);
  CHECK_FALSE(cfg.kdv);
  CHECK(cfg.isometry.alpha == Complex{-1.0, 0.0});
  CHECK(cfg.isometry.beta == Complex{0.0, 0.0});
  CHECK(cfg.fractal.eps == Rational{1, 3});
  CHECK(cfg.jobs == 1);
  CHECK(cfg.rebalance);
  CHECK(cfg.study.kind == StudyKind::Single);
  CHECK(cfg.output == "out");
  CHECK(cfg.r1.value == Complex{0.5, 0.0});
}

TEST_CASE("config values: complex numbers, eps forms and axes") {
  json doc = minimal();
  doc["fractal"]["eps"] = 0.5;
  doc["fractal"]["embedding"]["scale"] = json::array({0.8, 0.6});
  doc["grid"] = json::parse(R"({"x": {"min": -1, "max": 1, "count": 5}, "t": {"min": 0, "step": 0.25, "count": 2}})");
  auto cfg = parse_config_document(doc);
  CHECK(cfg.fractal.eps == Rational{1, 2});
  CHECK(cfg.fractal.embedding.scale == Complex{0.8, 0.6});
  CHECK(cfg.grid.x.step == 0.5);
  CHECK(cfg.grid.x.count == 5);
  CHECK(cfg.grid.t.step == 0.25);

  doc["grid"]["x"]["step"] = 0.5;
  CHECK(mentions(violations_of(doc), "grid.x: give either max or step, not both"));
}

TEST_CASE("invalid configs are rejected with every violation") {
  json eps = minimal();
  eps["fractal"]["eps"] = 1.5;
  CHECK(mentions(violations_of(eps), "fractal.eps: eps outside (0,1)"));
  eps["fractal"]["eps"] = "0/3";
  CHECK(mentions(violations_of(eps), "eps outside (0,1)"));
  eps["fractal"]["eps"] = "x/3";
  CHECK(mentions(violations_of(eps), "as a fraction"));

  json kdv = kdv_document();
  kdv["isometry"] = json::parse(R"({"alpha": 1, "beta": 1})");
  auto v = violations_of(kdv);
  CHECK(mentions(v, "phi(lambda) = -lambda"));

  json unknown = minimal();
  unknown["fractl"] = 1;
  unknown["amplitudes"]["r1"]["valu"] = 2;
  v = violations_of(unknown);
  CHECK(mentions(v, "$.fractl: unknown field"));
  CHECK(mentions(v, "amplitudes.r1.valu: unknown field"));

  json many = minimal();
  many["fractal"]["level"] = 40;
  many["isometry"] = json::parse(R"({"alpha": 2})");
  many["jobs"] = 0;
  many["mode"] = "three_component";
  v = violations_of(many);
  CHECK(v.size() >= 4);
  CHECK(mentions(v, "fractal.level"));
  CHECK(mentions(v, "|alpha| must equal 1"));
  CHECK(mentions(v, "jobs: must be at least 1"));
  CHECK(mentions(v, "mode:"));

  json budget = minimal();
  budget["fractal"]["level"] = 20;
  CHECK(mentions(violations_of(budget), "node budget"));

  json one = minimal();
  one["mode"] = "one_component";
  CHECK(mentions(violations_of(one), "one_component mode takes a single amplitude"));
  json two = minimal();
  two["amplitudes"].erase("r2");
  CHECK(mentions(violations_of(two), "required in two_component mode"));

  json kdv_sign = kdv_document();
  kdv_sign["amplitudes"]["r2"]["sign"] = "none";
  CHECK(mentions(violations_of(kdv_sign), "r2 to be declared nonpositive"));
  json kdv_sier = kdv_document();
  kdv_sier["fractal"] = json::parse(R"({"kind": "sierpinski", "level": 1})");
  CHECK(mentions(violations_of(kdv_sier), "Cantor"));

  json study = minimal();
  study["study"] = json::parse(R"({"kind": "converge_n", "levels": [3, 2]})");
  CHECK(mentions(violations_of(study), "levels must ascend"));

  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
}

TEST_CASE("amplitude families and sign constraints") {
  json doc = minimal();
  doc["amplitudes"]["r1"] = json::parse(R"({"family": "polynomial", "coefficients": [1, [0, 2]]})");
  doc["amplitudes"]["r2"] = json::parse(R"({"family": "gaussian", "amplitude": 2, "center": 0.5, "width": 0.25})");
  auto cfg = parse_config_document(doc);
  CHECK(evaluate(cfg.r1, 2.0) == Complex{1.0, 4.0});
  CHECK(std::abs(evaluate(cfg.r2, 0.75) - 2.0 * std::exp(-0.5)) < 1e-15);

  doc["amplitudes"]["r1"] = json::parse(R"({"family": "table", "points": [{"at": 0, "value": 1}, {"at": 1, "value": [0, 3]}]})");
  cfg = parse_config_document(doc);
  CHECK(evaluate(cfg.r1, 0.9) == Complex{0.0, 3.0});
  CHECK(evaluate(cfg.r1, 0.2) == Complex{1.0, 0.0});

  doc["amplitudes"]["r1"] = json::parse(R"({"family": "constant", "value": 1, "width": 2})");
  CHECK(mentions(violations_of(doc), "not a parameter of the constant family"));

  const VectorXc nodes{{0.2, 0.8}};
  CHECK(sample(AmplitudeSpec::constant(1.0, SignConstraint::NonNegative), nodes).size() == 2);
  CHECK_THROWS_AS(sample(AmplitudeSpec::constant(-1.0, SignConstraint::NonNegative), nodes), DomainError);
  CHECK_THROWS_AS(sample(AmplitudeSpec::constant(Complex{1.0, 0.1}, SignConstraint::NonNegative), nodes),
                  DomainError);
  CHECK_THROWS_AS(sample(AmplitudeSpec::constant(0.5, SignConstraint::NonPositive), nodes), DomainError);
}

TEST_CASE("canonical form round-trips and the hash ignores run-only keys") {
  json doc = kdv_document();
  doc["study"] = json::parse(R"({"kind": "converge_n", "levels": [2, 3, 4]})");
  const auto cfg = parse_config_document(doc);
  const json canonical = to_json(cfg);
  const auto again = parse_config_document(canonical);
  CHECK(to_json(again) == canonical);
  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(config_hash(cfg).size() == 16);

  auto moved = cfg;
  moved.output = "elsewhere";
  moved.jobs = 4;
  CHECK(config_hash(moved) == config_hash(cfg));
  auto changed = cfg;
  changed.fractal.level = 3;
  CHECK(config_hash(changed) != config_hash(cfg));
}

TEST_CASE("zero amplitudes give a zero field end to end") {
  json doc = minimal();
  doc["amplitudes"]["r1"]["value"] = 0;
  doc["amplitudes"]["r2"]["value"] = 0;
  doc["grid"] = json::parse(R"({"x": {"min": -1, "step": 0.1, "count": 9}, "y": {"min": 0, "step": 0.1, "count": 3},
                                "t": {"min": 0, "step": 0.1, "count": 3}})");
  const auto cfg = parse_config_document(doc);
  const fs::path out = scratch("zero");
  run_residual(cfg, out);
  std::istringstream csv(slurp(out / "field.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "x,y,t,re_u,im_u,cond,flag");
  int rows = 0;
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 7);
    CHECK(std::stod(cells[3]) == 0.0);
    CHECK(std::stod(cells[4]) == 0.0);
    CHECK(cells[6] == "0");
    ++rows;
  }
  CHECK(rows == 81);
  const json res = json::parse(slurp(out / "residual.json"));
  CHECK(res["max_norm"].get<double>() == 0.0);
  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(cfg));
  CHECK(manifest["command"] == "residual");
  CHECK(manifest.contains("versions"));
}

TEST_CASE("repeat runs are byte-identical") {
  json doc = kdv_document();
  const auto cfg = parse_config_document(doc);
  const fs::path a = scratch("repeat_a"), b = scratch("repeat_b");
  run_kp_field(cfg, a);
  run_kp_field(cfg, b);
  for (const char* name : {"field.csv", "field.json", "manifest.json"}) {
    CHECK(slurp(a / name) == slurp(b / name));
  }
  run_gen_set(cfg, a);
  std::string points = slurp(a / "points.csv");
  CHECK(points.rfind("re,im,weight\n", 0) == 0);
}

TEST_CASE("converge study") {
  json zero = minimal();
  zero["amplitudes"]["r1"]["value"] = 0;
  zero["amplitudes"]["r2"]["value"] = 0;
  zero["grid"] = json::parse(R"({"x": {"min": -1, "step": 0.5, "count": 5}})");
  auto rows = converge_study(parse_config_document(zero), {1, 2, 3});
  REQUIRE(rows.size() == 3);
  CHECK_FALSE(rows[0].diff_inf.has_value());
  CHECK(*rows[1].diff_inf == 0.0);
  CHECK(*rows[2].diff_inf == 0.0);
  CHECK(rows[2].nodes == 16);  // endpoints of 8 intervals

  // One family on Cantor and the staggered pair on Sierpinski settle geometrically.
  auto check_decreasing = [](const std::vector<ConvergeRow>& r, const char* label) {
    std::string table;
    for (const auto& row : r) {
      table += fmt::format(" n={}:{}", row.level, row.diff_inf ? fmt::format("{:.3e}", *row.diff_inf) : "-");
      CHECK(row.failures == 0);
    }
    const std::string line = label + table;
    MESSAGE(line);
    for (std::size_t i = 2; i < r.size(); ++i) CHECK(*r[i].diff_inf < *r[i - 1].diff_inf);
  };
  json one = json::parse(R"({"fractal": {"kind": "cantor", "level": 2, "embedding": {"scale": [0.8, 0.3], "shift": [0.5, 0.4]}},
    "mode": "one_component", "amplitudes": {"r1": {"family": "constant", "value": [0.6, -0.2]}},
    "grid": {"x": {"min": -1, "step": 0.1, "count": 21}, "t": {"min": 0, "step": 0.1, "count": 3}}})");
  auto one_rows = converge_study(parse_config_document(one), {2, 3, 4, 5, 6});
  check_decreasing(one_rows, "cantor single family");
  CHECK(*one_rows.back().diff_inf < 1e-3);
  json pair = one;
  pair["mode"] = "two_component";
  pair["fractal"] = json::parse(R"({"kind": "sierpinski", "level": 1, "embedding": {"scale": [0.8, 0.3], "shift": [0.5, 0.4]}})");
  pair["amplitudes"]["r2"] = json::parse(R"({"family": "constant", "value": [0.25, 0.15]})");
  check_decreasing(converge_study(parse_config_document(pair), {1, 2, 3, 4}), "sierpinski pair");

  // Real-line Cantor pair: reported only. Node and companion separations shrink
  // like 3^-n against weights 2^-n, and the level differences grow at small n.
  auto kdv = parse_config_document(kdv_document());
  rows = converge_study(kdv, {2, 3, 4, 5});
  std::string table;
  for (const auto& r : rows) {
    table += fmt::format(" n={}:{}", r.level, r.diff_inf ? fmt::format("{:.3e}", *r.diff_inf) : "-");
    CHECK(r.failures == 0);
  }
  MESSAGE("KdV cantor pair level differences (not asserted)" << table);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(*rows[i].m2_oracle_error < *rows[i - 1].m2_oracle_error);

  const fs::path out = scratch("converge");
  kdv.study.kind = StudyKind::ConvergeN;
  kdv.study.levels = {2, 3};
  run_experiment(kdv, out);
  CHECK(slurp(out / "converge.csv").rfind("level,nodes,diff_inf,max_coefficient,m1_re,m1_im,m2_re,m2_im,m2_oracle_error,failures\n", 0) == 0);
}

TEST_CASE("command line: exit codes, dry run and overrides") {
  const fs::path dir = scratch("cli");
  const fs::path cfg = write_config(dir, kdv_document());
  CHECK(run_cli(fmt::format("kp-field --config {} --dry-run", cfg.string())) == 0);
  CHECK_FALSE(fs::exists(dir / "dry"));
  CHECK(run_cli(fmt::format("kp-field --config {} --out {} --jobs 2 --level 1", cfg.string(), (dir / "run").string())) == 0);
  CHECK(fs::exists(dir / "run" / "field.csv"));
  const json manifest = json::parse(slurp(dir / "run" / "manifest.json"));
  CHECK(manifest["config"]["fractal"]["level"] == 1);

  json bad = kdv_document();
  bad["fractal"]["eps"] = 1.5;
  const fs::path bad_cfg = scratch("cli_bad") / "config.json";
  std::ofstream(bad_cfg) << bad.dump();
  CHECK(run_cli(fmt::format("kp-field --config {} --dry-run", bad_cfg.string())) == 2);
  CHECK(run_cli(fmt::format("kp-field --config {} --level 40 --dry-run", cfg.string())) == 2);
  CHECK(run_cli("kp-field") != 0);
  CHECK(run_cli("no-such-command") != 0);

  for (const char* name : {"kdv_cantor.json", "cantor_complex.json", "sierpinski.json"}) {
    const fs::path p = fs::path(FKP_CONFIG_DIR) / name;
    CHECK_NOTHROW(parse_config(slurp(p)));
  }
}
