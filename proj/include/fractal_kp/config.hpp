#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fractal_kp/amplitude.hpp"
#include "fractal_kp/finite_dbar.hpp"
#include "fractal_kp/fractal_geometry.hpp"
#include "fractal_kp/kp_engine.hpp"

namespace fkp {

enum class ComponentMode { OneComponent, TwoComponent };
enum class FieldBackend { Rational, Nystrom };
enum class StudyKind { Single, ConvergeN, RefineH };

struct StudySpec {
  StudyKind kind = StudyKind::Single;
  std::vector<int> levels;  // ConvergeN
  int refinements = 2;      // RefineH: number of spacing halvings
};

struct SpectrumSpec {
  double x_min = -20.0;
  double x_max = 20.0;
  double h = 0.01;
  double t = 0.0;
  Index n_eigs = 10;
};

struct ExperimentConfig {
  FractalSpec fractal;
  Isometry isometry;
  ComponentMode mode = ComponentMode::TwoComponent;
  FieldBackend backend = FieldBackend::Rational;
  bool kdv = false;
  AmplitudeSpec r1;
  AmplitudeSpec r2;
  GridAxes grid;
  PhasePoint point;
  StudySpec study;
  SpectrumSpec spectrum;
  std::string output = "out";
  int jobs = 1;
  bool rebalance = true;
};

/// Every violation found while parsing, each prefixed by its JSON path.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Strict JSON schema (see README). Unknown keys are rejected; all violations
/// are collected before throwing ConfigError.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig parse_config_document(const nlohmann::json& document);

/// Re-check the cross-field invariants after overrides (e.g. --level).
void validate_config(const ExperimentConfig& cfg);

/// Canonical form with every default filled in; parse_config(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// FNV-1a 64 of the canonical form without the run-only keys (output, jobs).
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace fkp
