#include "fractal_kp/config.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>

#include <fmt/format.h>

namespace fkp {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += "\n  " + s;
  return out;
}

// Collects violations while walking the document.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& message) {
    errors.push_back(path + ": " + message);
  }

  bool object(const json& j, const std::string& path, std::set<std::string> allowed) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [key, value] : j.items()) {
      if (!allowed.contains(key)) fail(path + "." + key, "unknown field");
    }
    return true;
  }

  std::optional<double> number(const json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      fail(path, "must be finite");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::int64_t> integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
      fail(path, "expected an integer");
      return std::nullopt;
    }
    return j.get<std::int64_t>();
  }

  std::optional<bool> boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) {
      fail(path, "expected true or false");
      return std::nullopt;
    }
    return j.get<bool>();
  }

  std::optional<std::string> string(const json& j, const std::string& path) {
    if (!j.is_string()) {
      fail(path, "expected a string");
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  // A number or [re, im].
  std::optional<Complex> complex(const json& j, const std::string& path) {
    if (j.is_number()) {
      if (auto v = number(j, path)) return Complex{*v, 0.0};
      return std::nullopt;
    }
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
      const Complex z{j[0].get<double>(), j[1].get<double>()};
      if (std::isfinite(z.real()) && std::isfinite(z.imag())) return z;
    }
    fail(path, "expected a number or [re, im]");
    return std::nullopt;
  }

  template <typename Enum>
  std::optional<Enum> choice(const json& j, const std::string& path,
                             const std::vector<std::pair<std::string, Enum>>& options) {
    auto s = string(j, path);
    if (!s) return std::nullopt;
    std::string names;
    for (const auto& [name, value] : options) {
      if (name == *s) return value;
      names += (names.empty() ? "" : ", ") + name;
    }
    fail(path, fmt::format("'{}' is not one of {}", *s, names));
    return std::nullopt;
  }
};

template <typename T>
void assign(T& target, const std::optional<T>& value) {
  if (value) target = *value;
}

std::optional<Rational> parse_eps(Reader& rd, const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return Rational{std::stoll(s)};
      return Rational{std::stoll(s.substr(0, slash))} / Rational{std::stoll(s.substr(slash + 1))};
    } catch (const std::exception&) {
      rd.fail(path, fmt::format("cannot read '{}' as a fraction p/q", s));
      return std::nullopt;
    }
  }
  if (auto v = rd.number(j, path)) {
    int exponent = 0;
    const double mantissa = std::frexp(*v, &exponent);
    Rational r{static_cast<std::int64_t>(std::ldexp(mantissa, 53))};
    for (int i = 0; i < 53 - exponent; ++i) r /= 2;
    for (int i = 0; i < exponent - 53; ++i) r *= 2;
    return r;
  }
  return std::nullopt;
}

void parse_fractal(Reader& rd, const json& j, FractalSpec& f) {
  const std::string p = "fractal";
  if (!rd.object(j, p, {"kind", "eps", "level", "embedding", "triangle", "node_budget"})) return;
  if (j.contains("kind")) {
    assign(f.kind, rd.choice<FractalKind>(j["kind"], p + ".kind",
                                          {{"cantor", FractalKind::CantorMiddleEps},
                                           {"sierpinski", FractalKind::SierpinskiGasket}}));
  } else {
    rd.fail(p + ".kind", "required");
  }
  if (j.contains("eps")) {
    if (auto eps = parse_eps(rd, j["eps"], p + ".eps")) {
      if (*eps <= 0 || *eps >= 1) {
        rd.fail(p + ".eps", "eps outside (0,1)");
      } else {
        f.eps = *eps;
      }
    }
  }
  if (j.contains("level")) {
    if (auto level = rd.integer(j["level"], p + ".level")) {
      if (*level < 0 || *level > 30) {
        rd.fail(p + ".level", "level must lie in [0, 30]");
      } else {
        f.level = static_cast<int>(*level);
      }
    }
  } else {
    rd.fail(p + ".level", "required");
  }
  if (j.contains("node_budget")) {
    if (auto budget = rd.integer(j["node_budget"], p + ".node_budget")) {
      if (*budget < 1) {
        rd.fail(p + ".node_budget", "must be positive");
      } else {
        f.node_budget = static_cast<std::size_t>(*budget);
      }
    }
  }
  if (j.contains("embedding")) {
    const auto& e = j["embedding"];
    if (rd.object(e, p + ".embedding", {"scale", "shift"})) {
      if (e.contains("scale")) assign(f.embedding.scale, rd.complex(e["scale"], p + ".embedding.scale"));
      if (e.contains("shift")) assign(f.embedding.shift, rd.complex(e["shift"], p + ".embedding.shift"));
      if (f.embedding.scale == Complex{0.0, 0.0}) rd.fail(p + ".embedding.scale", "must be nonzero");
    }
  }
  if (j.contains("triangle")) {
    const auto& t = j["triangle"];
    if (!t.is_array() || t.size() != 3) {
      rd.fail(p + ".triangle", "expected three vertices");
    } else {
      for (std::size_t i = 0; i < 3; ++i) {
        assign(f.triangle[i], rd.complex(t[i], fmt::format("{}.triangle[{}]", p, i)));
      }
    }
  }
}

AmplitudeSpec parse_amplitude(Reader& rd, const json& j, const std::string& p) {
  AmplitudeSpec a;
  if (!rd.object(j, p, {"family", "value", "coefficients", "amplitude", "center", "width",
                        "points", "sign"})) {
    return a;
  }
  if (!j.contains("family")) {
    rd.fail(p + ".family", "required");
    return a;
  }
  assign(a.family, rd.choice<AmplitudeFamily>(j["family"], p + ".family",
                                              {{"constant", AmplitudeFamily::Constant},
                                               {"polynomial", AmplitudeFamily::Polynomial},
                                               {"gaussian", AmplitudeFamily::GaussianBump},
                                               {"table", AmplitudeFamily::TableLookup}}));
  if (j.contains("sign")) {
    assign(a.sign, rd.choice<SignConstraint>(j["sign"], p + ".sign",
                                             {{"none", SignConstraint::None},
                                              {"nonnegative", SignConstraint::NonNegative},
                                              {"nonpositive", SignConstraint::NonPositive}}));
  }
  const std::map<AmplitudeFamily, std::set<std::string>> used{
      {AmplitudeFamily::Constant, {"value"}},
      {AmplitudeFamily::Polynomial, {"coefficients"}},
      {AmplitudeFamily::GaussianBump, {"amplitude", "center", "width"}},
      {AmplitudeFamily::TableLookup, {"points"}}};
  for (const auto& key : {"value", "coefficients", "amplitude", "center", "width", "points"}) {
    if (j.contains(key) && !used.at(a.family).contains(key)) {
      rd.fail(p + "." + key, fmt::format("not a parameter of the {} family", to_string(a.family)));
    }
  }
  switch (a.family) {
    case AmplitudeFamily::Constant:
      if (j.contains("value")) {
        assign(a.value, rd.complex(j["value"], p + ".value"));
      } else {
        rd.fail(p + ".value", "required");
      }
      break;
    case AmplitudeFamily::Polynomial:
      if (!j.contains("coefficients") || !j["coefficients"].is_array() ||
          j["coefficients"].empty()) {
        rd.fail(p + ".coefficients", "expected a nonempty array");
      } else {
        for (std::size_t i = 0; i < j["coefficients"].size(); ++i) {
          if (auto c = rd.complex(j["coefficients"][i], fmt::format("{}.coefficients[{}]", p, i))) {
            a.coefficients.push_back(*c);
          }
        }
      }
      break;
    case AmplitudeFamily::GaussianBump:
      if (j.contains("amplitude")) assign(a.amplitude, rd.complex(j["amplitude"], p + ".amplitude"));
      if (j.contains("center")) assign(a.center, rd.complex(j["center"], p + ".center"));
      if (j.contains("width")) {
        if (auto w = rd.number(j["width"], p + ".width")) {
          if (*w <= 0.0) {
            rd.fail(p + ".width", "must be positive");
          } else {
            a.width = *w;
          }
        }
      }
      break;
    case AmplitudeFamily::TableLookup:
      if (!j.contains("points") || !j["points"].is_array() || j["points"].empty()) {
        rd.fail(p + ".points", "expected a nonempty array");
      } else {
        for (std::size_t i = 0; i < j["points"].size(); ++i) {
          const auto& e = j["points"][i];
          const std::string ep = fmt::format("{}.points[{}]", p, i);
          if (!rd.object(e, ep, {"at", "value"})) continue;
          if (!e.contains("at") || !e.contains("value")) {
            rd.fail(ep, "needs 'at' and 'value'");
            continue;
          }
          auto at = rd.complex(e["at"], ep + ".at");
          auto v = rd.complex(e["value"], ep + ".value");
          if (at && v) a.table.emplace_back(*at, *v);
        }
      }
      break;
  }
  return a;
}

void parse_axis(Reader& rd, const json& j, const std::string& p, Axis& axis) {
  if (!rd.object(j, p, {"min", "max", "step", "count"})) return;
  if (j.contains("min")) assign(axis.min, rd.number(j["min"], p + ".min"));
  if (j.contains("count")) {
    if (auto c = rd.integer(j["count"], p + ".count")) {
      if (*c < 1) {
        rd.fail(p + ".count", "must be at least 1");
      } else {
        axis.count = static_cast<Index>(*c);
      }
    }
  }
  if (j.contains("max") && j.contains("step")) {
    rd.fail(p, "give either max or step, not both");
  } else if (j.contains("step")) {
    if (auto h = rd.number(j["step"], p + ".step")) {
      if (*h <= 0.0) {
        rd.fail(p + ".step", "must be positive");
      } else {
        axis.step = *h;
      }
    }
  } else if (j.contains("max")) {
    if (auto hi = rd.number(j["max"], p + ".max")) {
      if (axis.count > 1) {
        if (*hi <= axis.min) {
          rd.fail(p + ".max", "must exceed min");
        } else {
          axis.step = (*hi - axis.min) / static_cast<double>(axis.count - 1);
        }
      }
    }
  }
}

void check_invariants(const ExperimentConfig& cfg, Reader& rd) {
  const auto& f = cfg.fractal;
  try {
    const std::size_t count =
        f.kind == FractalKind::CantorMiddleEps
            ? (f.level < 62 ? (std::size_t{2} << f.level) : std::numeric_limits<std::size_t>::max())
            : sierpinski_vertex_count(f.level);
    if (count > f.node_budget) {
      rd.fail("fractal.level", fmt::format("level {} needs {} nodes, exceeding the node budget {}",
                                           f.level, count, f.node_budget));
    }
  } catch (const Error& e) {
    rd.fail("fractal.level", e.what());
  }
  if (f.kind == FractalKind::SierpinskiGasket) {
    const Complex e1 = f.triangle[1] - f.triangle[0];
    const Complex e2 = f.triangle[2] - f.triangle[0];
    if (!(std::abs((std::conj(e1) * e2).imag()) > 1e-14 * std::max(std::norm(e1), std::norm(e2)))) {
      rd.fail("fractal.triangle", "degenerate (collinear) base triangle");
    }
  }
  if (!(std::abs(std::abs(cfg.isometry.alpha) - 1.0) <= 1e-14)) {
    rd.fail("isometry.alpha", "|alpha| must equal 1");
  }
  if (cfg.mode == ComponentMode::OneComponent && cfg.backend == FieldBackend::Nystrom) {
    // The single-family equation has no principal-value part; both routes coincide.
  }
  if (cfg.kdv) {
    if (f.kind != FractalKind::CantorMiddleEps) {
      rd.fail("kdv", "KdV mode needs a Cantor node set");
    }
    const auto& m = f.embedding;
    if (m.scale.imag() != 0.0 || m.shift.imag() != 0.0 ||
        !(std::min(m.shift.real(), m.shift.real() + m.scale.real()) > 0.0)) {
      rd.fail("fractal.embedding", "KdV mode needs an embedding into the positive real axis");
    }
    if (cfg.isometry.alpha != Complex{-1.0, 0.0} || cfg.isometry.beta != Complex{0.0, 0.0}) {
      rd.fail("isometry", "KdV mode requires phi(lambda) = -lambda (alpha = -1, beta = 0)");
    }
    if (cfg.r1.sign != SignConstraint::NonNegative) {
      rd.fail("amplitudes.r1.sign", "KdV mode requires r1 to be declared nonnegative");
    }
    if (cfg.mode == ComponentMode::TwoComponent && cfg.r2.sign != SignConstraint::NonPositive) {
      rd.fail("amplitudes.r2.sign", "KdV mode requires r2 to be declared nonpositive");
    }
  }
  if (cfg.study.kind == StudyKind::ConvergeN) {
    if (cfg.study.levels.size() < 2) rd.fail("study.levels", "need at least two levels");
    for (std::size_t i = 1; i < cfg.study.levels.size(); ++i) {
      if (cfg.study.levels[i] <= cfg.study.levels[i - 1]) {
        rd.fail("study.levels", "levels must ascend");
        break;
      }
    }
  }
  if (cfg.study.refinements < 0 || cfg.study.refinements > 6) {
    rd.fail("study.refinements", "must lie in [0, 6]");
  }
  if (cfg.jobs < 1) rd.fail("jobs", "must be at least 1");
  if (!(cfg.spectrum.h > 0.0)) rd.fail("spectrum.h", "must be positive");
  if (!(cfg.spectrum.x_max > cfg.spectrum.x_min)) rd.fail("spectrum.x_max", "must exceed x_min");
  if (cfg.spectrum.n_eigs < 1) rd.fail("spectrum.n_eigs", "must be positive");
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

json axis_json(const Axis& a) { return {{"min", a.min}, {"step", a.step}, {"count", a.count}}; }

json amplitude_json(const AmplitudeSpec& a) {
  json j{{"family", to_string(a.family)}, {"sign", to_string(a.sign)}};
  switch (a.family) {
    case AmplitudeFamily::Constant:
      j["value"] = complex_json(a.value);
      break;
    case AmplitudeFamily::Polynomial: {
      json c = json::array();
      for (const Complex z : a.coefficients) c.push_back(complex_json(z));
      j["coefficients"] = c;
      break;
    }
    case AmplitudeFamily::GaussianBump:
      j["amplitude"] = complex_json(a.amplitude);
      j["center"] = complex_json(a.center);
      j["width"] = a.width;
      break;
    case AmplitudeFamily::TableLookup: {
      json pts = json::array();
      for (const auto& [at, v] : a.table) pts.push_back({{"at", complex_json(at)}, {"value", complex_json(v)}});
      j["points"] = pts;
      break;
    }
  }
  return j;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error("invalid configuration:" + join(violations)), violations_(std::move(violations)) {}

ExperimentConfig parse_config(std::string_view text) {
  json document;
  try {
    document = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("$: ") + e.what()});
  }
  return parse_config_document(document);
}

ExperimentConfig parse_config_document(const json& j) {
  Reader rd;
  ExperimentConfig cfg;
  if (!rd.object(j, "$", {"fractal", "isometry", "mode", "backend", "kdv", "amplitudes", "grid",
                          "point", "study", "spectrum", "output", "jobs", "rebalance"})) {
    throw ConfigError(rd.errors);
  }
  if (j.contains("fractal")) {
    parse_fractal(rd, j["fractal"], cfg.fractal);
  } else {
    rd.fail("fractal", "required");
  }
  if (j.contains("isometry")) {
    const auto& i = j["isometry"];
    if (rd.object(i, "isometry", {"alpha", "beta"})) {
      if (i.contains("alpha")) assign(cfg.isometry.alpha, rd.complex(i["alpha"], "isometry.alpha"));
      if (i.contains("beta")) assign(cfg.isometry.beta, rd.complex(i["beta"], "isometry.beta"));
    }
  }
  if (j.contains("mode")) {
    assign(cfg.mode, rd.choice<ComponentMode>(j["mode"], "mode",
                                              {{"one_component", ComponentMode::OneComponent},
                                               {"two_component", ComponentMode::TwoComponent}}));
  }
  if (j.contains("backend")) {
    assign(cfg.backend, rd.choice<FieldBackend>(j["backend"], "backend",
                                                {{"rational", FieldBackend::Rational},
                                                 {"nystrom", FieldBackend::Nystrom}}));
  }
  if (j.contains("kdv")) assign(cfg.kdv, rd.boolean(j["kdv"], "kdv"));
  if (j.contains("amplitudes")) {
    const auto& a = j["amplitudes"];
    if (rd.object(a, "amplitudes", {"r1", "r2"})) {
      if (a.contains("r1")) {
        cfg.r1 = parse_amplitude(rd, a["r1"], "amplitudes.r1");
      } else {
        rd.fail("amplitudes.r1", "required");
      }
      if (a.contains("r2")) {
        if (cfg.mode == ComponentMode::OneComponent) {
          rd.fail("amplitudes.r2", "one_component mode takes a single amplitude");
        } else {
          cfg.r2 = parse_amplitude(rd, a["r2"], "amplitudes.r2");
        }
      } else if (cfg.mode == ComponentMode::TwoComponent) {
        rd.fail("amplitudes.r2", "required in two_component mode");
      }
    }
  } else {
    rd.fail("amplitudes", "required");
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (rd.object(g, "grid", {"x", "y", "t", "imaginary_y"})) {
      if (g.contains("x")) parse_axis(rd, g["x"], "grid.x", cfg.grid.x);
      if (g.contains("y")) parse_axis(rd, g["y"], "grid.y", cfg.grid.y);
      if (g.contains("t")) parse_axis(rd, g["t"], "grid.t", cfg.grid.t);
      if (g.contains("imaginary_y")) assign(cfg.grid.imaginary_y, rd.boolean(g["imaginary_y"], "grid.imaginary_y"));
    }
  }
  if (j.contains("point")) {
    const auto& p = j["point"];
    if (rd.object(p, "point", {"x", "y", "t"})) {
      if (p.contains("x")) assign(cfg.point.x, rd.number(p["x"], "point.x"));
      if (p.contains("y")) assign(cfg.point.y, rd.number(p["y"], "point.y"));
      if (p.contains("t")) assign(cfg.point.t, rd.number(p["t"], "point.t"));
    }
  }
  if (j.contains("study")) {
    const auto& s = j["study"];
    if (rd.object(s, "study", {"kind", "levels", "refinements"})) {
      if (s.contains("kind")) {
        assign(cfg.study.kind, rd.choice<StudyKind>(s["kind"], "study.kind",
                                                    {{"single", StudyKind::Single},
                                                     {"converge_n", StudyKind::ConvergeN},
                                                     {"refine_h", StudyKind::RefineH}}));
      }
      if (s.contains("levels")) {
        if (!s["levels"].is_array()) {
          rd.fail("study.levels", "expected an array of integers");
        } else {
          for (std::size_t i = 0; i < s["levels"].size(); ++i) {
            if (auto v = rd.integer(s["levels"][i], fmt::format("study.levels[{}]", i))) {
              cfg.study.levels.push_back(static_cast<int>(*v));
            }
          }
        }
      }
      if (s.contains("refinements")) {
        if (auto v = rd.integer(s["refinements"], "study.refinements")) cfg.study.refinements = static_cast<int>(*v);
      }
    }
  }
  if (j.contains("spectrum")) {
    const auto& s = j["spectrum"];
    if (rd.object(s, "spectrum", {"x_min", "x_max", "h", "t", "n_eigs"})) {
      if (s.contains("x_min")) assign(cfg.spectrum.x_min, rd.number(s["x_min"], "spectrum.x_min"));
      if (s.contains("x_max")) assign(cfg.spectrum.x_max, rd.number(s["x_max"], "spectrum.x_max"));
      if (s.contains("h")) assign(cfg.spectrum.h, rd.number(s["h"], "spectrum.h"));
      if (s.contains("t")) assign(cfg.spectrum.t, rd.number(s["t"], "spectrum.t"));
      if (s.contains("n_eigs")) {
        if (auto v = rd.integer(s["n_eigs"], "spectrum.n_eigs")) cfg.spectrum.n_eigs = static_cast<Index>(*v);
      }
    }
  }
  if (j.contains("output")) assign(cfg.output, rd.string(j["output"], "output"));
  if (j.contains("jobs")) {
    if (auto v = rd.integer(j["jobs"], "jobs")) cfg.jobs = static_cast<int>(*v);
  }
  if (j.contains("rebalance")) assign(cfg.rebalance, rd.boolean(j["rebalance"], "rebalance"));

  check_invariants(cfg, rd);
  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  Reader rd;
  check_invariants(cfg, rd);
  if (cfg.fractal.level < 0) rd.fail("fractal.level", "must be nonnegative");
  if (!rd.errors.empty()) throw ConfigError(rd.errors);
}

json to_json(const ExperimentConfig& cfg) {
  const auto& f = cfg.fractal;
  json fractal{{"kind", f.kind == FractalKind::CantorMiddleEps ? "cantor" : "sierpinski"},
               {"eps", f.eps.str()},
               {"level", f.level},
               {"embedding", {{"scale", complex_json(f.embedding.scale)},
                              {"shift", complex_json(f.embedding.shift)}}},
               {"triangle", json::array({complex_json(f.triangle[0]), complex_json(f.triangle[1]),
                                         complex_json(f.triangle[2])})},
               {"node_budget", f.node_budget}};
  json amplitudes{{"r1", amplitude_json(cfg.r1)}};
  if (cfg.mode == ComponentMode::TwoComponent) amplitudes["r2"] = amplitude_json(cfg.r2);
  const char* study = cfg.study.kind == StudyKind::Single      ? "single"
                      : cfg.study.kind == StudyKind::ConvergeN ? "converge_n"
                                                               : "refine_h";
  return {
      {"fractal", fractal},
      {"isometry", {{"alpha", complex_json(cfg.isometry.alpha)}, {"beta", complex_json(cfg.isometry.beta)}}},
      {"mode", cfg.mode == ComponentMode::OneComponent ? "one_component" : "two_component"},
      {"backend", cfg.backend == FieldBackend::Rational ? "rational" : "nystrom"},
      {"kdv", cfg.kdv},
      {"amplitudes", amplitudes},
      {"grid", {{"x", axis_json(cfg.grid.x)}, {"y", axis_json(cfg.grid.y)}, {"t", axis_json(cfg.grid.t)},
                {"imaginary_y", cfg.grid.imaginary_y}}},
      {"point", {{"x", cfg.point.x}, {"y", cfg.point.y}, {"t", cfg.point.t}}},
      {"study", {{"kind", study}, {"levels", cfg.study.levels}, {"refinements", cfg.study.refinements}}},
      {"spectrum", {{"x_min", cfg.spectrum.x_min}, {"x_max", cfg.spectrum.x_max}, {"h", cfg.spectrum.h},
                    {"t", cfg.spectrum.t}, {"n_eigs", cfg.spectrum.n_eigs}}},
      {"output", cfg.output},
      {"jobs", cfg.jobs},
      {"rebalance", cfg.rebalance},
  };
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output");
  j.erase("jobs");
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace fkp
