#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fractal_kp/config.hpp"
#include "fractal_kp/finite_dbar.hpp"
#include "fractal_kp/kp_engine.hpp"
#include "fractal_kp/singular_ieq.hpp"

namespace fkp {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Nodes, sampled amplitudes and the assembled dressed system for one config.
struct Problem {
  PointSet q;
  std::optional<PointSet> partner;  // R = phi(companion nodes), rational two-component only
  std::optional<PointSet> r2_sites;  // where r~2 is sampled
  DressingSpec dressing;
  DressedSystem system;
};

Problem build_problem(const ExperimentConfig& cfg);

/// Fresh artifact directory handle; files are recorded for the manifest.
class ArtifactDir {
 public:
  ArtifactDir(std::filesystem::path root, std::string command);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path file(const std::string& name);
  void write_json(const std::string& name, const nlohmann::json& value);
  /// manifest.json: command, canonical config, hash, versions, files, summary.
  void write_manifest(const ExperimentConfig& cfg, const nlohmann::json& summary);

 private:
  std::filesystem::path root_;
  std::string command_;
  std::vector<std::string> files_;
};

/// CSV long format "x,y,t,re_u,im_u,cond,flag" (y is the imaginary part on an
/// imaginary-y grid).
void write_field_csv(std::ostream& out, const FieldGrid& field);
nlohmann::json field_metadata(const ExperimentConfig& cfg, const Problem& problem,
                              const FieldGrid& field);
nlohmann::json residual_json(const ResidualReport& report);

struct ConvergeRow {
  int level = 0;
  Index nodes = 0;
  std::optional<double> diff_inf;  // ||u_n - u_prev||_inf over jointly successful points
  double max_coefficient = 0.0;    // at the config's point
  Complex m1{0.0, 0.0};
  Complex m2{0.0, 0.0};
  std::optional<double> m2_oracle_error;  // Cantor only
  Index failures = 0;
};

std::vector<ConvergeRow> converge_study(const ExperimentConfig& cfg, const std::vector<int>& levels);

struct RefineRow {
  Index refinement = 0;
  double hx = 0.0, hy = 0.0, ht = 0.0;
  double max_norm = 0.0;
  double rms_norm = 0.0;
  Index evaluated = 0;
  std::optional<double> ratio;  // previous max_norm / this max_norm
};

/// Halves every spacing `cfg.study.refinements` times; residual norms are
/// taken over the coarse grid's interior box so every level sees one region.
std::vector<RefineRow> refine_study(const ExperimentConfig& cfg);

// Subcommands. Each writes its artifacts plus manifest.json into `out` and
// returns a short human-readable summary line.
std::string run_gen_set(const ExperimentConfig& cfg, const std::filesystem::path& out);
std::string run_solve_chi(const ExperimentConfig& cfg, const std::filesystem::path& out);
std::string run_solve_ieq(const ExperimentConfig& cfg, const std::filesystem::path& out);
std::string run_kp_field(const ExperimentConfig& cfg, const std::filesystem::path& out);
std::string run_residual(const ExperimentConfig& cfg, const std::filesystem::path& out);
std::string run_kdv_probe(const ExperimentConfig& cfg, const std::filesystem::path& out);
std::string run_spectrum_probe(const ExperimentConfig& cfg, const std::filesystem::path& out);
std::string run_converge(const ExperimentConfig& cfg, const std::filesystem::path& out);

/// Dispatch by study kind: single -> kp-field + residual, converge_n ->
/// converge, refine_h -> residual with refinement table.
std::string run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out);

}  // namespace fkp
