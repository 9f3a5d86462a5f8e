#include "bosegap/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "bosegap/clusters.hpp"
#include "bosegap/error.hpp"
#include "bosegap/fsmap.hpp"
#include "bosegap/operators.hpp"
#include "bosegap/parallel.hpp"
#include "bosegap/spectra.hpp"
#include "bosegap/symmetry.hpp"

namespace bosegap {

namespace {

using json = nlohmann::json;

json opt(const std::optional<double>& v) { return v ? json(*v) : json(); }

std::optional<double> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string csv_value(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

std::unique_ptr<SeparablePreconditioner> preconditioner_for(const ManyBodyOperator& h) {
  if (h.axis_potentials().empty() || h.dimension() <= 600) return nullptr;
  return std::make_unique<SeparablePreconditioner>(h);
}

}  // namespace

NuclearConfiguration scaled_geometry(const NuclearConfiguration& base, double factor, double cluster_threshold) {
  if (!(factor > 0.0)) throw ValidationError("scan factors must be positive");
  if (base.size() == 0) throw ValidationError("empty nuclear configuration");
  const auto rigid = detect_partition({base}, cluster_threshold).partition;
  const int first = rigid.block_of(0);
  const double anchor = rigid.centers[first];
  NuclearConfiguration y = base;
  for (int j = 0; j < rigid.size(); ++j) {
    const double center = anchor + factor * (rigid.centers[j] - anchor);
    for (std::size_t m = 0; m < rigid.blocks[j].size(); ++m) y.positions[rigid.blocks[j][m]] = center + rigid.offsets[j][m];
  }
  double centroid = 0.0;
  for (double p : y.positions) centroid += p / static_cast<double>(y.size());
  for (double& p : y.positions) p -= centroid;
  return y;
}

ScanPoint run_scan_point(const ExperimentConfig& cfg, double factor) {
  ScanPoint pt;
  pt.factor = factor;
  std::string stage = "geometry";
  try {
    const double rigid = cfg.scan ? cfg.scan->cluster_threshold : 0.5;
    const auto y = scaled_geometry(cfg.nuclei, factor, rigid);
    pt.positions = y.positions;
    pt.separation = y.min_distance().value_or(0.0);

    stage = "direct";
    const auto h = assemble_full(cfg, y);
    const TensorShape shape{cfg.model.grid_points, cfg.particles.electron_count};
    const auto space = projector_for(cfg.particles.statistics, shape);
    SolveOptions so = SolveOptions::from(cfg);
    so.count = std::max(so.count, 3);
    const auto direct = lowest_eigenpairs(h, so, space.get(), cfg.particles.statistics);
    pt.direct_method = direct.method;
    pt.e0 = direct.eigenvalues.at(0);
    pt.e1 = direct.eigenvalues.at(1);
    pt.gap = *pt.e1 - *pt.e0;

    stage = "partition";
    const auto detected = detect_partition({y}, cfg.tolerances.partition_distance);
    pt.clusters = detected.partition.size();

    stage = "thresholds";
    const auto table = build_threshold_table(cfg, y, detected.partition);
    pt.e_inf0 = table.e_inf0;
    pt.e_inf1 = table.e_inf1;
    pt.threshold_gap = table.e_inf1 - table.e_inf0;

    stage = "family";
    const auto family = build_candidate_family(table, cfg.model.grid_points);
    pt.family_size = family.size();

    stage = "gram";
    auto projection = gram_and_inverse(family, cfg.tolerances.gram_floor);

    stage = "fixed_point";
    FsOptions fo;
    fo.inner_tolerance = cfg.tolerances.inner_solve;
    fo.fixed_point_tolerance = cfg.tolerances.fixed_point;
    fo.complement_tolerance = std::min(cfg.tolerances.eigen_residual, 1e-9);
    fo.seed = cfg.solver.seed;
    fo.dense = cfg.solver.dense_oracle && h.dimension() <= ManyBodyOperator::kDenseLimit;
    const auto pre = preconditioner_for(h);
    const FsProblem fs(h, std::move(projection), space.get(), pre.get(), fo);
    const double g = table.g.value_or(table.e_inf1 - table.e_inf0);
    const auto f0 = fs.solve_fixed_point(0, table.e_inf0 - 5.0 * g, 0.5 * (table.e_inf0 + table.e_inf1));
    pt.lambda0 = f0.lambda;
    double probe = f0.lambda;
    if (fs.rank() >= 2) {
      const auto f1 = fs.solve_fixed_point(1, table.e_inf1 - 5.0 * g, table.e_inf1 + g);
      pt.lambda1 = f1.lambda;
      probe = f1.lambda;
    }
    pt.complement_gap = fs.complement_gap(probe);

    stage = "diagnostics";
    const auto diag = fs_diagnostics(fs, family.energies(), f0.lambda);
    pt.gram_offdiagonal = diag.gram_offdiagonal;
    pt.hamiltonian_deviation = diag.hamiltonian_deviation;
    pt.schur_magnitude = diag.schur_magnitude;
    if (fs.rank() >= 2) pt.two_dim_bound = two_dimensional_bound(fs);

    stage = "localization";
    const Grid grid = Grid::from(cfg.model);
    auto fit_cluster = [&](int j, int n, const std::vector<Vector>& vectors) {
      std::vector<double> centers;
      for (int i : detected.partition.blocks[j]) centers.push_back(y.positions[i]);
      for (const auto& v : vectors) {
        const auto fit = localization_rate(v, grid, n, centers);
        pt.min_localization_rate = std::min(pt.min_localization_rate.value_or(fit.alpha), fit.alpha);
        pt.min_localization_r2 = std::min(pt.min_localization_r2.value_or(fit.r_squared), fit.r_squared);
      }
    };
    for (const auto& m : family.members) {
      for (int j = 0; j < detected.partition.size(); ++j) {
        const int n = m.occupation[j];
        if (n == 0) continue;
        const auto& lv = table.at(j, n);
        if (m.kind == FamilyMember::Kind::excited && m.excited_cluster == j)
          fit_cluster(j, n, {lv.excited.at(m.excited_index)});
        else
          fit_cluster(j, n, {lv.ground.front()});
      }
    }
  } catch (const std::exception& e) {
    pt.status = "failed:" + stage;
    pt.error = e.what();
  }
  return pt;
}

GapScanReport run_scan(const ExperimentConfig& cfg) {
  if (!cfg.scan || cfg.scan->factors.empty()) throw ValidationError("configuration has no scan schedule");
  const auto v = validate_config(cfg);
  if (!v.ok()) throw ValidationError(v.errors.front());
  GapScanReport r;
  r.config_hash = config_hash(cfg);
  const auto& factors = cfg.scan->factors;
  r.points.resize(factors.size());
  parallel_for(factors.size(), cfg.solver.workers, [&](std::size_t i) { r.points[i] = run_scan_point(cfg, factors[i]); });
  for (std::size_t i = 1; i < r.points.size(); ++i)
    if (!(r.points[i].separation > r.points[i - 1].separation)) r.separations_increasing = false;
  for (const auto& p : r.points) {
    if (!p.ok()) ++r.failed_points;
    if (p.gap) r.min_gap = std::min(r.min_gap.value_or(*p.gap), *p.gap);
  }
  const auto& last = r.points.back();
  if (last.e0 && last.e_inf0) r.limit_deviation0 = std::abs(*last.e0 - *last.e_inf0);
  if (last.e1 && last.e_inf1) r.limit_deviation1 = std::abs(*last.e1 - *last.e_inf1);
  return r;
}

H2DemoReport run_h2_demo(const ExperimentConfig& cfg) {
  if (cfg.nuclei.size() != 2 || cfg.particles.electron_count != 2 || !cfg.neutral())
    throw ValidationError("the degeneracy demo needs a neutral diatomic with two electrons");
  H2DemoReport r;
  {
    const NuclearConfiguration atom{{0.0}, {cfg.nuclei.charges[0]}, false};
    SolveOptions so = SolveOptions::from(cfg);
    so.count = 2;
    const auto a = lowest_eigenpairs(assemble_molecule(cfg.model, atom, 1), so);
    r.atomic_gap = a.eigenvalues.at(1) - a.eigenvalues.at(0);
  }
  std::vector<double> factors = cfg.scan ? cfg.scan->factors : std::vector<double>{1.0};
  const double rigid = cfg.scan ? cfg.scan->cluster_threshold : 0.5;
  r.points.resize(factors.size());
  const TensorShape shape{cfg.model.grid_points, 2};
  const auto sym = StatisticsProjector::symmetric(shape);
  parallel_for(factors.size(), cfg.solver.workers, [&](std::size_t i) {
    H2DemoPoint& p = r.points[i];
    try {
      const auto y = scaled_geometry(cfg.nuclei, factors[i], rigid);
      p.separation = y.min_distance().value_or(0.0);
      const auto h = assemble_full(cfg, y);
      SolveOptions so = SolveOptions::from(cfg);
      so.count = std::max(so.count, 3);
      const auto d = lowest_eigenpairs(h, so, nullptr, Statistics::distinguishable);
      p.e0_distinguishable = d.eigenvalues.at(0);
      p.e1_distinguishable = d.eigenvalues.at(1);
      p.splitting = *p.e1_distinguishable - *p.e0_distinguishable;
      const auto b = lowest_eigenpairs(h, so, &sym, Statistics::bosonic);
      p.e0_bosonic = b.eigenvalues.at(0);
      p.e1_bosonic = b.eigenvalues.at(1);
      p.bosonic_gap = *p.e1_bosonic - *p.e0_bosonic;
    } catch (const std::exception& e) {
      p.status = "failed:direct";
      p.error = e.what();
    }
  });
  const auto& last = r.points.back();
  const auto& first = r.points.front();
  r.splitting = last.splitting;
  r.bosonic_gap = last.bosonic_gap;
  if (last.bosonic_gap) r.gap_ratio = *last.bosonic_gap / r.atomic_gap;
  if (r.points.size() >= 2 && first.splitting && last.splitting && *last.splitting > 0.0)
    r.splitting_decay = *first.splitting / *last.splitting;
  return r;
}

json to_json(const ScanPoint& p) {
  return {{"factor", p.factor},
          {"separation", p.separation},
          {"positions", p.positions},
          {"status", p.status},
          {"error", p.error},
          {"e0", opt(p.e0)},
          {"e1", opt(p.e1)},
          {"lambda0", opt(p.lambda0)},
          {"lambda1", opt(p.lambda1)},
          {"e_inf0", opt(p.e_inf0)},
          {"e_inf1", opt(p.e_inf1)},
          {"gap", opt(p.gap)},
          {"threshold_gap", opt(p.threshold_gap)},
          {"complement_gap", opt(p.complement_gap)},
          {"gram_offdiagonal", opt(p.gram_offdiagonal)},
          {"hamiltonian_deviation", opt(p.hamiltonian_deviation)},
          {"schur_magnitude", opt(p.schur_magnitude)},
          {"two_dim_bound", opt(p.two_dim_bound)},
          {"min_localization_rate", opt(p.min_localization_rate)},
          {"min_localization_r2", opt(p.min_localization_r2)},
          {"clusters", p.clusters},
          {"family_size", p.family_size},
          {"direct_method", p.direct_method}};
}

json to_json(const GapScanReport& r) {
  json pts = json::array();
  for (const auto& p : r.points) pts.push_back(to_json(p));
  return {{"config_hash", r.config_hash},
          {"points", pts},
          {"summary",
           {{"separations_increasing", r.separations_increasing},
            {"min_gap", opt(r.min_gap)},
            {"limit_deviation0", opt(r.limit_deviation0)},
            {"limit_deviation1", opt(r.limit_deviation1)},
            {"failed_points", r.failed_points}}}};
}

GapScanReport scan_report_from_json(const json& j) {
  GapScanReport r;
  r.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& q : j.at("points")) {
    ScanPoint p;
    p.factor = q.at("factor").get<double>();
    p.separation = q.at("separation").get<double>();
    p.positions = q.at("positions").get<std::vector<double>>();
    p.status = q.at("status").get<std::string>();
    p.error = q.at("error").get<std::string>();
    p.e0 = opt_from(q, "e0");
    p.e1 = opt_from(q, "e1");
    p.lambda0 = opt_from(q, "lambda0");
    p.lambda1 = opt_from(q, "lambda1");
    p.e_inf0 = opt_from(q, "e_inf0");
    p.e_inf1 = opt_from(q, "e_inf1");
    p.gap = opt_from(q, "gap");
    p.threshold_gap = opt_from(q, "threshold_gap");
    p.complement_gap = opt_from(q, "complement_gap");
    p.gram_offdiagonal = opt_from(q, "gram_offdiagonal");
    p.hamiltonian_deviation = opt_from(q, "hamiltonian_deviation");
    p.schur_magnitude = opt_from(q, "schur_magnitude");
    p.two_dim_bound = opt_from(q, "two_dim_bound");
    p.min_localization_rate = opt_from(q, "min_localization_rate");
    p.min_localization_r2 = opt_from(q, "min_localization_r2");
    p.clusters = q.at("clusters").get<int>();
    p.family_size = q.at("family_size").get<int>();
    p.direct_method = q.at("direct_method").get<std::string>();
    r.points.push_back(std::move(p));
  }
  const auto& s = j.at("summary");
  r.separations_increasing = s.at("separations_increasing").get<bool>();
  r.min_gap = opt_from(s, "min_gap");
  r.limit_deviation0 = opt_from(s, "limit_deviation0");
  r.limit_deviation1 = opt_from(s, "limit_deviation1");
  r.failed_points = s.at("failed_points").get<int>();
  return r;
}

json to_json(const H2DemoReport& r) {
  json pts = json::array();
  for (const auto& p : r.points)
    pts.push_back({{"separation", p.separation},
                   {"status", p.status},
                   {"error", p.error},
                   {"e0_distinguishable", opt(p.e0_distinguishable)},
                   {"e1_distinguishable", opt(p.e1_distinguishable)},
                   {"splitting", opt(p.splitting)},
                   {"e0_bosonic", opt(p.e0_bosonic)},
                   {"e1_bosonic", opt(p.e1_bosonic)},
                   {"bosonic_gap", opt(p.bosonic_gap)}});
  return {{"atomic_gap", r.atomic_gap},
          {"points", pts},
          {"splitting", opt(r.splitting)},
          {"bosonic_gap", opt(r.bosonic_gap)},
          {"gap_ratio", opt(r.gap_ratio)},
          {"splitting_decay", opt(r.splitting_decay)}};
}

std::string scan_csv(const GapScanReport& r) {
  std::ostringstream os;
  os << "factor,separation,status,e0,e1,lambda0,lambda1,e_inf0,e_inf1,gap,threshold_gap,complement_gap,"
        "gram_offdiagonal,hamiltonian_deviation,schur_magnitude,two_dim_bound,config_hash\n";
  for (const auto& p : r.points) {
    os << csv_value(p.factor) << "," << csv_value(p.separation) << "," << p.status;
    for (const auto& v : {p.e0, p.e1, p.lambda0, p.lambda1, p.e_inf0, p.e_inf1, p.gap, p.threshold_gap,
                          p.complement_gap, p.gram_offdiagonal, p.hamiltonian_deviation, p.schur_magnitude,
                          p.two_dim_bound})
      os << "," << csv_value(v);
    os << "," << r.config_hash << "\n";
  }
  return os.str();
}

std::string write_text(const std::string& directory, const std::string& name, const std::string& text) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error("cannot create output directory " + directory + ": " + ec.message());
  const std::string path = (fs::path(directory) / name).string();
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw Error("cannot write " + path);
  return path;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string plot_script(const std::string& hash) {
  std::ostringstream os;
  os << "#!/usr/bin/env python3\n"
     << "# Gap scan plots; config " << hash << "\n"
     << "import csv\nimport sys\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n"
     << "path = sys.argv[1] if len(sys.argv) > 1 else \"scan_points.csv\"\n"
     << "rows = [r for r in csv.DictReader(open(path)) if r[\"status\"] == \"ok\"]\n"
     << "r = [float(x[\"separation\"]) for x in rows]\n"
     << "col = lambda k: [float(x[k]) for x in rows]\n\n"
     << "fig, ax = plt.subplots(1, 2, figsize=(10, 4))\n"
     << "ax[0].plot(r, col(\"gap\"), \"o-\", label=\"E1 - E0\")\n"
     << "ax[0].plot(r, col(\"threshold_gap\"), \"s--\", label=\"E_inf,1 - E_inf,0\")\n"
     << "ax[0].set_xlabel(\"separation\")\nax[0].set_ylabel(\"gap\")\nax[0].legend()\n"
     << "for key, style in ((\"e0\", \"o-\"), (\"e1\", \"o-\"), (\"e_inf0\", \"k--\"), (\"e_inf1\", \"k:\")):\n"
     << "    ax[1].plot(r, col(key), style, label=key)\n"
     << "ax[1].set_xlabel(\"separation\")\nax[1].set_ylabel(\"energy\")\nax[1].legend()\n"
     << "fig.suptitle(\"config " << hash << "\")\n"
     << "fig.tight_layout()\nfig.savefig(\"scan.png\", dpi=150)\n";
  return os.str();
}

}  // namespace

EmittedFiles emit_report(const GapScanReport& report, const ExperimentConfig& cfg, const std::string& directory,
                         const std::vector<std::string>& formats) {
  auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  EmittedFiles out;
  if (wants("json")) {
    json j = to_json(report);
    j["timestamp"] = utc_timestamp();
    j["config"] = json::parse(emit_config(cfg));
    out.paths.push_back(write_text(directory, "scan_report.json", j.dump(2) + "\n"));
  }
  if (wants("csv")) out.paths.push_back(write_text(directory, "scan_points.csv", scan_csv(report)));
  if (wants("plot")) out.paths.push_back(write_text(directory, "plot_scan.py", plot_script(report.config_hash)));
  return out;
}

}  // namespace bosegap
