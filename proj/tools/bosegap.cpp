// Command-line driver: validate, spectrum, thresholds, fsmap, ims-check,
// scan, h2-demo. Exit codes: 0 success, 1 validation error, 2 solver failure.
#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "bosegap/clusters.hpp"
#include "bosegap/error.hpp"
#include "bosegap/experiments.hpp"
#include "bosegap/fsmap.hpp"
#include "bosegap/ims.hpp"
#include "bosegap/kernels.hpp"
#include "bosegap/spectra.hpp"
#include "bosegap/symmetry.hpp"

using namespace bosegap;
using json = nlohmann::json;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  bool dense_oracle = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory (overrides output.directory)");
  sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", f.seed, "random seed for iterative solvers");
  sub->add_flag("--dense-oracle", f.dense_oracle, "force dense solves where tractable");
}

ExperimentConfig load(const CommonFlags& f) {
  ExperimentConfig cfg = load_config(f.config);
  if (f.out) cfg.output.directory = *f.out;
  if (f.workers) cfg.solver.workers = *f.workers;
  if (f.seed) cfg.solver.seed = *f.seed;
  if (f.dense_oracle) cfg.solver.dense_oracle = true;
  return cfg;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int cmd_validate(const CommonFlags& f) {
  // parse_config already rejects hard errors; report the soft findings.
  const auto cfg = load(f);
  const auto r = validate_config(cfg);
  for (const auto& e : r.errors) std::cout << "error: " << e << "\n";
  for (const auto& w : r.warnings) std::cout << "warning: " << w << "\n";
  for (const auto& n : r.notes) std::cout << "note: " << n << "\n";
  std::cout << "config " << config_hash(cfg) << (r.ok() ? " valid" : " invalid") << "\n";
  return r.ok() ? 0 : 1;
}

int cmd_spectrum(const CommonFlags& f) {
  const auto cfg = load(f);
  const auto h = assemble_full(cfg, cfg.nuclei);
  const auto space = projector_for(cfg.particles.statistics, TensorShape{cfg.model.grid_points, cfg.particles.electron_count});
  const auto rep = lowest_eigenpairs(h, SolveOptions::from(cfg), space.get(), cfg.particles.statistics);
  json j = to_json(rep);
  j["config_hash"] = config_hash(cfg);
  const auto g = gap(rep, degeneracy_tolerance(rep.eigenvalues.at(0), cfg.tolerances.degeneracy));
  j["gap"] = to_json(g);
  j["ionization_threshold"] = ionization_threshold(cfg, cfg.nuclei);
  j["localization"] = to_json(localization_rate(rep.eigenvectors.at(0), Grid::from(cfg.model),
                                                cfg.particles.electron_count, cfg.nuclei.positions));
  j["kernels"] = std::string(kernels::active().name);
  write_text(cfg.output.directory, "spectrum.json", dump(j));
  write_eigenvector(cfg.output.directory + "/ground.bin", rep.eigenvectors.at(0));
  std::cout.precision(12);
  for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i) std::cout << "E" << i << " = " << rep.eigenvalues[i] << "\n";
  std::cout << "gap = " << g.gap << " (" << rep.method << ")\n";
  return 0;
}

int cmd_thresholds(const CommonFlags& f) {
  const auto cfg = load(f);
  const auto det = detect_partition({cfg.nuclei}, cfg.tolerances.partition_distance);
  ThresholdOptions o;
  o.workers = cfg.solver.workers;
  const auto t = build_threshold_table(cfg, cfg.nuclei, det.partition, o);
  const auto ln = check_local_neutrality(t);
  json j;
  j["config_hash"] = config_hash(cfg);
  j["partition"] = to_json(det);
  j["table"] = to_json(t);
  j["local_neutrality"] = {{"holds", ln.holds},
                           {"margin", ln.margin ? json(*ln.margin) : json()},
                           {"violating", ln.violating},
                           {"message", ln.message}};
  write_text(cfg.output.directory, "thresholds.json", dump(j));
  std::cout << summary_text(t);
  if (!ln.holds) std::cout << ln.message << "\n";
  return 0;
}

int cmd_fsmap(const CommonFlags& f) {
  const auto cfg = load(f);
  const auto det = detect_partition({cfg.nuclei}, cfg.tolerances.partition_distance);
  ThresholdOptions o;
  o.workers = cfg.solver.workers;
  const auto t = build_threshold_table(cfg, cfg.nuclei, det.partition, o);
  const auto family = build_candidate_family(t, cfg.model.grid_points);
  auto projection = gram_and_inverse(family, cfg.tolerances.gram_floor);
  const auto h = assemble_full(cfg, cfg.nuclei);
  const TensorShape shape{cfg.model.grid_points, cfg.particles.electron_count};
  const auto space = projector_for(cfg.particles.statistics, shape);
  std::unique_ptr<SeparablePreconditioner> pre;
  if (!h.axis_potentials().empty() && h.dimension() > 600) pre = std::make_unique<SeparablePreconditioner>(h);
  FsOptions fo;
  fo.inner_tolerance = cfg.tolerances.inner_solve;
  fo.fixed_point_tolerance = cfg.tolerances.fixed_point;
  fo.seed = cfg.solver.seed;
  fo.dense = cfg.solver.dense_oracle && h.dimension() <= ManyBodyOperator::kDenseLimit;
  const FsProblem fs(h, std::move(projection), space.get(), pre.get(), fo);
  const double g = t.g.value_or(t.e_inf1 - t.e_inf0);
  std::vector<FixedPoint> points{fs.solve_fixed_point(0, t.e_inf0 - 5.0 * g, 0.5 * (t.e_inf0 + t.e_inf1))};
  if (fs.rank() >= 2) points.push_back(fs.solve_fixed_point(1, t.e_inf1 - 5.0 * g, t.e_inf1 + g));

  SolveOptions so = SolveOptions::from(cfg);
  so.count = std::max(so.count, 3);
  const auto direct = lowest_eigenpairs(h, so, space.get(), cfg.particles.statistics);

  json j;
  j["config_hash"] = config_hash(cfg);
  j["family"] = to_json(family);
  j["projection"] = to_json(fs.projection());
  j["complement"] = {{"bottom", std::isfinite(fs.complement().bottom) ? json(fs.complement().bottom) : json()},
                     {"method", fs.complement().method}};
  json fps = json::array();
  std::cout.precision(12);
  for (const auto& p : points) {
    json q = to_json(p);
    q["direct"] = direct.eigenvalues.at(static_cast<std::size_t>(p.index));
    q["deviation"] = std::abs(p.lambda - direct.eigenvalues.at(static_cast<std::size_t>(p.index)));
    q["operator"] = to_json(fs.evaluate(p.lambda));
    fps.push_back(q);
    std::cout << "lambda" << p.index << " = " << p.lambda << "  direct " << direct.eigenvalues[p.index] << "\n";
  }
  j["fixed_points"] = fps;
  j["diagnostics"] = to_json(fs_diagnostics(fs, family.energies(), points.front().lambda));
  if (fs.rank() >= 2) j["two_dimensional_bound"] = two_dimensional_bound(fs);
  write_text(cfg.output.directory, "fsmap_report.json", dump(j));
  write_text(cfg.output.directory, "fs_trace.csv", trace_csv(points));
  return 0;
}

int cmd_ims(const CommonFlags& f) {
  const auto cfg = load(f);
  const auto det = detect_partition({cfg.nuclei}, cfg.tolerances.partition_distance);
  const double rmax = max_cutoff_scale(det.partition);
  const std::vector<double> scales = std::isfinite(rmax) ? std::vector<double>{0.5 * rmax, rmax} : std::vector<double>{1.0, 2.0};
  const int n = cfg.particles.electron_count;
  const auto h = assemble_full(cfg, cfg.nuclei);
  ExperimentConfig fine = cfg;
  fine.model.grid_points = 2 * cfg.model.grid_points - 1;
  const auto hf = assemble_full(fine, cfg.nuclei);
  const auto space = projector_for(cfg.particles.statistics, TensorShape{cfg.model.grid_points, n});

  json rows = json::array();
  std::cout.precision(6);
  for (std::size_t s = 0; s < scales.size(); ++s) {
    const auto fam = build_cutoffs(det.partition, Grid::from(cfg.model), n, scales[s], cfg.model.stencil_order);
    const auto famf = build_cutoffs(det.partition, Grid::from(fine.model), n, scales[s], cfg.model.stencil_order);
    const auto coarse = ims_defect(h, fam, 50, cfg.solver.seed, cfg.solver.workers);
    const auto refined = ims_defect(hf, famf, 50, cfg.solver.seed, cfg.solver.workers);
    json r = to_json(fam);
    r["partition_defect"] = fam.partition_defect();
    r["symmetry_defect"] = cutoff_symmetry_defect(fam, 5, cfg.solver.seed);
    r["defect"] = to_json(coarse);
    r["defect_refined"] = to_json(refined);
    r["defect_ratio"] = refined.max_defect > 0.0 ? json(coarse.max_defect / refined.max_defect) : json();
    r["lower_bound"] = to_json(localized_lower_bound(h, fam, space.get(), cfg.solver.seed));
    write_text(cfg.output.directory, "cutoffs_" + std::to_string(s) + ".csv", cutoff_csv(fam));
    std::cout << "R = " << scales[s] << "  d = " << fam.d << "  sum J^2 - 1 = " << fam.partition_defect()
              << "  defect ratio (h -> h/2) = " << r["defect_ratio"] << "\n";
    rows.push_back(r);
  }
  json j;
  j["config_hash"] = config_hash(cfg);
  j["max_scale"] = std::isfinite(rmax) ? json(rmax) : json();
  j["families"] = rows;
  write_text(cfg.output.directory, "ims_report.json", dump(j));
  return 0;
}

int cmd_scan(const CommonFlags& f) {
  const auto cfg = load(f);
  const auto report = run_scan(cfg);
  const auto files = emit_report(report, cfg, cfg.output.directory, cfg.output.formats);
  std::cout.precision(10);
  for (const auto& p : report.points) {
    std::cout << "r = " << p.separation << "  " << p.status;
    if (p.gap) std::cout << "  gap " << *p.gap;
    if (p.lambda0 && p.e0) std::cout << "  |lambda0 - E0| " << std::abs(*p.lambda0 - *p.e0);
    if (!p.ok()) std::cout << "  (" << p.error << ")";
    std::cout << "\n";
  }
  for (const auto& path : files.paths) std::cout << "wrote " << path << "\n";
  return report.failed_points == 0 ? 0 : 2;
}

int cmd_h2(const CommonFlags& f) {
  const auto cfg = load(f);
  const auto r = run_h2_demo(cfg);
  json j = to_json(r);
  j["config_hash"] = config_hash(cfg);
  write_text(cfg.output.directory, "h2_demo.json", dump(j));
  std::cout.precision(6);
  std::cout << "atomic gap " << r.atomic_gap << "\n";
  for (const auto& p : r.points) {
    std::cout << "r = " << p.separation << "  " << p.status;
    if (p.splitting) std::cout << "  distinguishable splitting " << *p.splitting;
    if (p.bosonic_gap) std::cout << "  bosonic gap " << *p.bosonic_gap;
    std::cout << "\n";
  }
  for (const auto& p : r.points)
    if (p.status != "ok") return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral-gap experiments for few-electron soft-Coulomb molecules"};
  app.require_subcommand(1);
  CommonFlags flags;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const CommonFlags&);
  };
  const Entry entries[] = {
      {"validate", "check a configuration", cmd_validate},
      {"spectrum", "lowest eigenpairs at the configured geometry", cmd_spectrum},
      {"thresholds", "cluster partition and threshold energies", cmd_thresholds},
      {"fsmap", "Feshbach-Schur fixed points and diagnostics", cmd_fsmap},
      {"ims-check", "partition-of-unity cutoffs and the IMS identity", cmd_ims},
      {"scan", "gap scan over the configured separations", cmd_scan},
      {"h2-demo", "distinguishable vs bosonic splitting of a diatomic", cmd_h2},
  };
  std::vector<std::pair<CLI::App*, int (*)(const CommonFlags&)>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, flags);
    subs.emplace_back(sub, e.run);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    for (const auto& [sub, run] : subs)
      if (sub->parsed()) return run(flags);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
