#include "fractal_kp/experiment.hpp"

#include <Eigen/Core>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "fractal_kp/amplitude.hpp"

namespace fkp {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

// JSON has no NaN; missing values become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json optional_json(const std::optional<double>& v) {
  return v ? number_or_null(*v) : json(nullptr);
}

std::ofstream open_file(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  return out;
}

PointSet q_nodes(const ExperimentConfig& cfg) { return fractal_nodes(cfg.fractal); }

std::string fractal_label(const FractalSpec& f) {
  return f.kind == FractalKind::CantorMiddleEps ? "cantor" : "sierpinski";
}

json fractal_json(const FractalSpec& f) {
  return {{"kind", fractal_label(f)},
          {"eps", f.eps.str()},
          {"level", f.level},
          {"embedding", {{"scale", complex_json(f.embedding.scale)},
                         {"shift", complex_json(f.embedding.shift)}}}};
}

json axes_json(const GridAxes& a) {
  auto axis = [](const Axis& ax) {
    return json{{"min", ax.min}, {"step", ax.step}, {"count", ax.count}, {"max", ax.max()}};
  };
  return {{"x", axis(a.x)}, {"y", axis(a.y)}, {"t", axis(a.t)}, {"imaginary_y", a.imaginary_y}};
}

FieldGrid field_for(const ExperimentConfig& cfg, const Problem& problem, const GridAxes& axes) {
  return compute_field(problem.system, axes, FieldOptions{cfg.jobs, cfg.rebalance});
}

// The config's interior residual box on its own (coarse) grid.
Region interior_region(const GridAxes& a) {
  return Region{a.x.at(3), a.x.at(a.x.count - 4), a.y.at(1), a.y.at(a.y.count - 2),
                a.t.at(1), a.t.at(a.t.count - 2)};
}

Axis refine_axis(const Axis& a, Index k) {
  const Index factor = Index{1} << k;
  return Axis{a.min, a.step / static_cast<double>(factor), (a.count - 1) * factor + 1};
}

json failure_summary(const FieldGrid& field) {
  return {{"points", field.u.size()}, {"failures", field.failures()}};
}

}  // namespace

Problem build_problem(const ExperimentConfig& cfg) {
  PointSet q = q_nodes(cfg);
  DressingSpec dressing;
  dressing.phi = cfg.isometry;
  dressing.rebalance = cfg.rebalance;
  dressing.r1_base = sample(cfg.r1, q);
  std::optional<PointSet> partner;
  std::optional<PointSet> sites;
  if (cfg.mode == ComponentMode::TwoComponent) {
    if (cfg.backend == FieldBackend::Rational) {
      sites = fractal_companion_nodes(cfg.fractal);
      partner = cfg.isometry.apply(*sites);
      dressing.partner = partner;
    } else {
      sites = q;
    }
    dressing.r2_base = sample(cfg.r2, *sites);
  }
  DressedSystem system = DressedSystem::from_spec(q, dressing);
  return Problem{std::move(q), std::move(partner), std::move(sites), std::move(dressing),
                 std::move(system)};
}

ArtifactDir::ArtifactDir(fs::path root, std::string command)
    : root_(std::move(root)), command_(std::move(command)) {
  fs::create_directories(root_);
}

fs::path ArtifactDir::file(const std::string& name) {
  files_.push_back(name);
  return root_ / name;
}

void ArtifactDir::write_json(const std::string& name, const json& value) {
  auto out = open_file(file(name));
  out << value.dump(2) << '\n';
}

void ArtifactDir::write_manifest(const ExperimentConfig& cfg, const json& summary) {
  json manifest{
      {"command", command_},
      {"config", to_json(cfg)},
      {"config_hash", config_hash(cfg)},
      {"versions",
       {{"fractal_kp", kLibraryVersion},
        {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
        {"compiler", __VERSION__}}},
      {"files", files_},
      {"summary", summary},
  };
  auto out = open_file(root_ / "manifest.json");
  out << manifest.dump(2) << '\n';
}

void write_field_csv(std::ostream& out, const FieldGrid& field) {
  out << "x,y,t,re_u,im_u,cond,flag\n";
  for (Index it = 0; it < field.nt(); ++it) {
    for (Index iy = 0; iy < field.ny(); ++iy) {
      for (Index ix = 0; ix < field.nx(); ++ix) {
        const auto i = static_cast<std::size_t>(field.index(ix, iy, it));
        out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.6e},{}\n",
                           field.axes.x.at(ix), field.axes.y.at(iy), field.axes.t.at(it),
                           field.u[i].real(), field.u[i].imag(), field.condition[i],
                           static_cast<int>(field.status[i]));
      }
    }
  }
}

json field_metadata(const ExperimentConfig& cfg, const Problem& problem, const FieldGrid& field) {
  json dressing{{"system", problem.system.kind()},
                {"poles", problem.system.size()},
                {"isometry", {{"alpha", complex_json(cfg.isometry.alpha)},
                              {"beta", complex_json(cfg.isometry.beta)}}},
                {"r1", {{"family", to_string(cfg.r1.family)}, {"sign", to_string(cfg.r1.sign)}}},
                {"rebalance", cfg.rebalance}};
  if (cfg.mode == ComponentMode::TwoComponent) {
    dressing["r2"] = {{"family", to_string(cfg.r2.family)}, {"sign", to_string(cfg.r2.sign)}};
  }
  return {{"config_hash", config_hash(cfg)},
          {"fractal", fractal_json(cfg.fractal)},
          {"dressing", dressing},
          {"reconstruction_sign", kReconstructionSign},
          {"axes", axes_json(field.axes)},
          {"flags", {{"0", "ok"}, {"1", "solve failed"}, {"2", "exponent overflow"}}},
          {"summary", failure_summary(field)}};
}

json residual_json(const ResidualReport& r) {
  return {{"max_norm", number_or_null(r.max_norm)},
          {"rms_norm", number_or_null(r.rms_norm)},
          {"evaluated", r.evaluated},
          {"skipped", r.skipped},
          {"interior", {{"offset", {r.offset_x, r.offset_y, r.offset_t}}, {"extent", {r.nx, r.ny, r.nt}}}}};
}

std::vector<ConvergeRow> converge_study(const ExperimentConfig& cfg, const std::vector<int>& levels) {
  if (levels.empty()) throw DomainError("converge study needs at least one level");
  std::vector<ConvergeRow> rows;
  std::optional<FieldGrid> previous;
  int last = -1;
  for (const int level : levels) {
    if (level <= last) throw DomainError("converge study levels must ascend");
    last = level;
    ExperimentConfig at = cfg;
    at.fractal.level = level;
    validate_config(at);
    const Problem problem = build_problem(at);
    FieldGrid field = field_for(at, problem, at.grid);

    ConvergeRow row;
    row.level = level;
    row.nodes = problem.q.size();
    row.failures = field.failures();
    if (previous) {
      double diff = 0.0;
      for (std::size_t i = 0; i < field.u.size(); ++i) {
        if (field.status[i] != PointStatus::Ok || previous->status[i] != PointStatus::Ok) continue;
        diff = std::max(diff, std::abs(field.u[i] - previous->u[i]));
      }
      row.diff_inf = diff;
    }
    // Largest pole coefficient of the finite system at the config's point.
    const PhasePoint& p = at.point;
    const DressedAmplitudes d1 =
        dressed_amplitudes(problem.q, problem.dressing.r1_base, VectorXc(), at.isometry, p);
    try {
      if (at.mode == ComponentMode::OneComponent) {
        row.max_coefficient = solve_one_component(problem.q, d1.r1, at.isometry).a.cwiseAbs().maxCoeff();
      } else if (problem.partner) {
        const VectorXc zeros = VectorXc::Zero(problem.r2_sites->size());
        const DressedAmplitudes d2 = dressed_amplitudes(*problem.r2_sites, zeros,
                                                        problem.dressing.r2_base, at.isometry, p);
        const auto sol = solve_two_component(problem.q, *problem.partner, d1.r1, d2.r2, at.isometry);
        row.max_coefficient = std::max(sol.a.cwiseAbs().maxCoeff(), sol.b.cwiseAbs().maxCoeff());
      } else {
        const DressedAmplitudes d = dressed_amplitudes(problem.q, problem.dressing.r1_base,
                                                       problem.dressing.r2_base, at.isometry, p);
        const auto sol = solve_ieq23(problem.q, d.r1, d.r2, at.isometry);
        row.max_coefficient = std::max(sol.f1.cwiseAbs().maxCoeff(), sol.f2.cwiseAbs().maxCoeff());
      }
    } catch (const SingularSystemError&) {
      row.max_coefficient = kNaN;
    }
    // Moments of the unembedded construction, where the self-similar oracle applies.
    FractalSpec raw = at.fractal;
    raw.embedding = AffineMap{};
    const PointSet unit = fractal_nodes(raw);
    row.m1 = empirical_moment(unit, 1);
    row.m2 = empirical_moment(unit, 2);
    if (at.fractal.kind == FractalKind::CantorMiddleEps) {
      row.m2_oracle_error = std::abs(row.m2 - cantor_moment_oracle(at.fractal.eps, 2));
    }
    rows.push_back(row);
    previous = std::move(field);
  }
  return rows;
}

std::vector<RefineRow> refine_study(const ExperimentConfig& cfg) {
  validate_axes(cfg.grid);
  const Problem problem = build_problem(cfg);
  const Region region = interior_region(cfg.grid);
  std::vector<RefineRow> rows;
  for (Index k = 0; k <= cfg.study.refinements; ++k) {
    GridAxes axes = cfg.grid;
    axes.x = refine_axis(cfg.grid.x, k);
    axes.y = refine_axis(cfg.grid.y, k);
    axes.t = refine_axis(cfg.grid.t, k);
    const FieldGrid field = field_for(cfg, problem, axes);
    const ResidualReport report = kp_residual(field, region);
    RefineRow row{k, axes.x.step, axes.y.step, axes.t.step, report.max_norm, report.rms_norm,
                  report.evaluated, std::nullopt};
    if (!rows.empty() && report.max_norm > 0.0) row.ratio = rows.back().max_norm / report.max_norm;
    rows.push_back(row);
  }
  return rows;
}

std::string run_gen_set(const ExperimentConfig& cfg, const fs::path& out) {
  ArtifactDir dir(out, "gen-set");
  const PointSet q = q_nodes(cfg);
  {
    auto f = open_file(dir.file("points.csv"));
    write_point_set_csv(f, q);
  }
  json summary{{"nodes", q.size()}, {"diameter", q.diameter()}};
  if (cfg.mode == ComponentMode::TwoComponent && cfg.backend == FieldBackend::Rational) {
    const PointSet r = cfg.isometry.apply(fractal_companion_nodes(cfg.fractal));
    auto f = open_file(dir.file("partner.csv"));
    write_point_set_csv(f, r);
    summary["partner_nodes"] = r.size();
  }
  dir.write_manifest(cfg, summary);
  return fmt::format("gen-set: {} nodes -> {}", q.size(), out.string());
}

std::string run_solve_chi(const ExperimentConfig& cfg, const fs::path& out) {
  ArtifactDir dir(out, "solve-chi");
  const Problem problem = build_problem(cfg);
  const PhasePoint& p = cfg.point;
  const DressedAmplitudes d1 =
      dressed_amplitudes(problem.q, problem.dressing.r1_base, VectorXc(), cfg.isometry, p);
  json report{{"point", {{"x", p.x}, {"y", p.y}, {"t", p.t}}}};
  std::string line;
  auto fill = [&](const SolveReport& sr, Complex chi1, double residual) {
    report["chi1"] = complex_json(chi1);
    report["condition_estimate"] = number_or_null(sr.condition_estimate);
    report["solve_residual"] = number_or_null(sr.residual_norm);
    report["nonlocal_residual"] = number_or_null(residual);
    line = fmt::format("solve-chi: N = {}, cond ~ {:.3e}, residual {:.3e}", problem.system.size(),
                       sr.condition_estimate, residual);
  };
  if (cfg.mode == ComponentMode::OneComponent) {
    const auto sol = solve_one_component(problem.q, d1.r1, cfg.isometry);
    auto f = open_file(dir.file("solution.csv"));
    write_solution_csv(f, sol);
    fill(sol.report, chi_first_moment(sol), nonlocal_residual(sol));
  } else {
    // The finite system always pairs Q with the staggered family R.
    const PointSet sites = fractal_companion_nodes(cfg.fractal);
    const PointSet r = cfg.isometry.apply(sites);
    const DressedAmplitudes d2 = dressed_amplitudes(sites, VectorXc::Zero(sites.size()),
                                                    sample(cfg.r2, sites), cfg.isometry, p);
    const auto sol = solve_two_component(problem.q, r, d1.r1, d2.r2, cfg.isometry);
    auto f = open_file(dir.file("solution.csv"));
    write_solution_csv(f, sol);
    fill(sol.report, chi_first_moment(sol), nonlocal_residual(sol));
    report["warnings"] = sol.warnings;
  }
  dir.write_json("solve_chi.json", report);
  dir.write_manifest(cfg, report);
  return line;
}

std::string run_solve_ieq(const ExperimentConfig& cfg, const fs::path& out) {
  ArtifactDir dir(out, "solve-ieq");
  const PointSet q = q_nodes(cfg);
  const VectorXc r1 = sample(cfg.r1, q);
  const VectorXc r2 = cfg.mode == ComponentMode::TwoComponent ? sample(cfg.r2, q) : VectorXc();
  const DressedAmplitudes d = dressed_amplitudes(q, r1, r2, cfg.isometry, cfg.point);
  const IEQSolution sol = cfg.mode == ComponentMode::OneComponent
                              ? solve_ieq1(q, d.r1, cfg.isometry)
                              : solve_ieq23(q, d.r1, d.r2, cfg.isometry);
  {
    auto f = open_file(dir.file("ieq.csv"));
    write_ieq_csv(f, sol);
  }
  const double residual = ieq_residual(sol);
  json report{{"point", {{"x", cfg.point.x}, {"y", cfg.point.y}, {"t", cfg.point.t}}},
              {"nodes", q.size()},
              {"chi1", complex_json(sol.chi1)},
              {"condition_estimate", number_or_null(sol.report.condition_estimate)},
              {"solve_residual", number_or_null(sol.report.residual_norm)},
              {"equation_residual", number_or_null(residual)},
              {"omitted_entries", sol.omitted.size()},
              {"warnings", sol.warnings}};
  dir.write_json("solve_ieq.json", report);
  dir.write_manifest(cfg, report);
  return fmt::format("solve-ieq: N = {}, cond ~ {:.3e}, residual {:.3e}", q.size(),
                     sol.report.condition_estimate, residual);
}

std::string run_kp_field(const ExperimentConfig& cfg, const fs::path& out) {
  validate_axes(cfg.grid);
  ArtifactDir dir(out, "kp-field");
  const Problem problem = build_problem(cfg);
  const FieldGrid field = field_for(cfg, problem, cfg.grid);
  {
    auto f = open_file(dir.file("field.csv"));
    write_field_csv(f, field);
  }
  dir.write_json("field.json", field_metadata(cfg, problem, field));
  dir.write_manifest(cfg, failure_summary(field));
  return fmt::format("kp-field: {} points, {} failed", field.u.size(), field.failures());
}

std::string run_residual(const ExperimentConfig& cfg, const fs::path& out) {
  validate_axes(cfg.grid);
  ArtifactDir dir(out, "residual");
  const Problem problem = build_problem(cfg);
  const FieldGrid field = field_for(cfg, problem, cfg.grid);
  {
    auto f = open_file(dir.file("field.csv"));
    write_field_csv(f, field);
  }
  dir.write_json("field.json", field_metadata(cfg, problem, field));
  const ResidualReport report = kp_residual(field);
  json residual = residual_json(report);
  std::string line = fmt::format("residual: max {:.3e}, rms {:.3e} over {} points", report.max_norm,
                                 report.rms_norm, report.evaluated);
  if (cfg.study.kind == StudyKind::RefineH) {
    const auto rows = refine_study(cfg);
    json table = json::array();
    auto f = open_file(dir.file("refine.csv"));
    f << "refinement,hx,hy,ht,max_norm,rms_norm,evaluated,ratio\n";
    for (const auto& r : rows) {
      f << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", r.refinement, r.hx, r.hy,
                       r.ht, r.max_norm, r.rms_norm, r.evaluated,
                       r.ratio ? fmt::format("{:.17g}", *r.ratio) : std::string{});
      table.push_back({{"refinement", r.refinement}, {"max_norm", number_or_null(r.max_norm)},
                       {"rms_norm", number_or_null(r.rms_norm)}, {"evaluated", r.evaluated},
                       {"ratio", optional_json(r.ratio)}});
      if (r.ratio) line += fmt::format(", ratio {:.3f}", *r.ratio);
    }
    residual["refinement"] = table;
  }
  dir.write_json("residual.json", residual);
  dir.write_manifest(cfg, {{"field", failure_summary(field)}, {"residual", residual}});
  return line;
}

std::string run_kdv_probe(const ExperimentConfig& cfg, const fs::path& out) {
  validate_axes(cfg.grid);
  ArtifactDir dir(out, "kdv-probe");
  const Problem problem = build_problem(cfg);
  const FieldGrid field = field_for(cfg, problem, cfg.grid);
  {
    auto f = open_file(dir.file("field.csv"));
    write_field_csv(f, field);
  }
  dir.write_json("field.json", field_metadata(cfg, problem, field));
  const KdvReport k = kdv_probe(field);
  json report{{"max_im_u", number_or_null(k.max_im_u)},
              {"max_u_y", optional_json(k.max_u_y)},
              {"g_x_variation", optional_json(k.g_x_variation)},
              {"g_max_abs", optional_json(k.g_max_abs)},
              {"failures", field.failures()}};
  dir.write_json("kdv.json", report);
  dir.write_manifest(cfg, report);
  return fmt::format("kdv-probe: max|Im u| = {:.3e}", k.max_im_u);
}

std::string run_spectrum_probe(const ExperimentConfig& cfg, const fs::path& out) {
  ArtifactDir dir(out, "spectrum-probe");
  const auto& s = cfg.spectrum;
  const auto cells = static_cast<Index>(std::llround((s.x_max - s.x_min) / s.h));
  if (cells < 3) throw DomainError("spectrum window holds fewer than two interior nodes");
  GridAxes axes;
  axes.x = Axis{s.x_min + s.h, s.h, cells - 1};
  axes.y = Axis{0.0, 1.0, 1};
  axes.t = Axis{s.t, 1.0, 1};
  const Problem problem = build_problem(cfg);
  const FieldGrid field = field_for(cfg, problem, axes);
  if (field.failures() > 0) {
    throw Error(fmt::format("spectrum probe: {} slice points failed", field.failures()));
  }
  VectorXc u(axes.x.count);
  for (Index i = 0; i < axes.x.count; ++i) u[i] = field.u_at(i, 0, 0);

  IntervalList bands;
  if (cfg.fractal.kind == FractalKind::CantorMiddleEps) {
    const auto& m = cfg.fractal.embedding;
    for (const auto& [l, r] : cantor_intervals(cfg.fractal.eps, cfg.fractal.level, cfg.fractal.node_budget)) {
      const Complex a = m(Complex{l, 0.0});
      const Complex b = m(Complex{r, 0.0});
      if (a.imag() == 0.0 && b.imag() == 0.0) {
        bands.push_back({std::min(a.real(), b.real()), std::max(a.real(), b.real())});
      }
    }
  }
  const SpectrumReport report = schrodinger_spectrum_probe(u, s.h, s.n_eigs, bands);
  {
    auto f = open_file(dir.file("spectrum.csv"));
    f << "index,eigenvalue\n";
    for (std::size_t i = 0; i < report.eigenvalues.size(); ++i) {
      f << fmt::format("{},{:.17g}\n", i, report.eigenvalues[i]);
    }
  }
  json table = json::array();
  for (const auto& row : report.table) {
    table.push_back({{"eigenvalue", row.eigenvalue},
                     {"nearest_band", row.nearest_band},
                     {"band", {row.band_lo, row.band_hi}},
                     {"distance", number_or_null(row.distance)}});
  }
  json summary{{"convention", "bands are {-c^2 : c in a level-n interval}"},
               {"eigenvalues", report.eigenvalues},
               {"negative_eigenvalue_table", table}};
  dir.write_json("spectrum.json", summary);
  dir.write_manifest(cfg, {{"eigenvalues", report.eigenvalues.size()}});
  return fmt::format("spectrum-probe: {} eigenvalues, {} negative", report.eigenvalues.size(),
                     report.table.size());
}

std::string run_converge(const ExperimentConfig& cfg, const fs::path& out) {
  validate_axes(cfg.grid);
  ArtifactDir dir(out, "converge");
  std::vector<int> levels = cfg.study.levels;
  if (levels.empty()) levels = {cfg.fractal.level};
  const auto rows = converge_study(cfg, levels);
  json table = json::array();
  auto f = open_file(dir.file("converge.csv"));
  f << "level,nodes,diff_inf,max_coefficient,m1_re,m1_im,m2_re,m2_im,m2_oracle_error,failures\n";
  for (const auto& r : rows) {
    auto opt = [](const std::optional<double>& v) {
      return v ? fmt::format("{:.17g}", *v) : std::string{};
    };
    f << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", r.level, r.nodes,
                     opt(r.diff_inf), r.max_coefficient, r.m1.real(), r.m1.imag(), r.m2.real(),
                     r.m2.imag(), opt(r.m2_oracle_error), r.failures);
    table.push_back({{"level", r.level},
                     {"nodes", r.nodes},
                     {"diff_inf", optional_json(r.diff_inf)},
                     {"max_coefficient", number_or_null(r.max_coefficient)},
                     {"m1", complex_json(r.m1)},
                     {"m2", complex_json(r.m2)},
                     {"m2_oracle_error", optional_json(r.m2_oracle_error)},
                     {"failures", r.failures}});
  }
  f.close();
  dir.write_json("converge.json", table);
  dir.write_manifest(cfg, {{"levels", levels}});
  return fmt::format("converge: {} levels", rows.size());
}

std::string run_experiment(const ExperimentConfig& cfg, const fs::path& out) {
  switch (cfg.study.kind) {
    case StudyKind::ConvergeN:
      return run_converge(cfg, out);
    case StudyKind::RefineH:
      return run_residual(cfg, out);
    case StudyKind::Single:
      break;
  }
  return run_residual(cfg, out);
}

}  // namespace fkp
