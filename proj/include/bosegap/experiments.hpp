#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bosegap/model.hpp"

namespace bosegap {

// Nuclei of the base layout closer than `cluster_threshold` move rigidly;
// cluster centers are scaled by `factor` about the first cluster's center
// and the result is translated so the nuclear centroid sits at the origin.
NuclearConfiguration scaled_geometry(const NuclearConfiguration& base, double factor, double cluster_threshold);

struct ScanPoint {
  double factor = 0.0;
  double separation = 0.0;  // R(y)
  std::vector<double> positions;
  std::string status = "ok";  // or failed:<stage>
  std::string error;

  std::optional<double> e0, e1;            // direct solve
  std::optional<double> lambda0, lambda1;  // FS fixed points
  std::optional<double> e_inf0, e_inf1;
  std::optional<double> gap;            // e1 - e0
  std::optional<double> threshold_gap;  // e_inf1 - e_inf0
  std::optional<double> complement_gap; // at lambda1
  std::optional<double> gram_offdiagonal, hamiltonian_deviation, schur_magnitude;
  std::optional<double> two_dim_bound;
  std::optional<double> min_localization_rate, min_localization_r2;
  int clusters = 0;
  int family_size = 0;
  std::string direct_method;

  bool ok() const { return status == "ok"; }
  bool operator==(const ScanPoint&) const = default;
};

struct GapScanReport {
  std::string config_hash;
  std::vector<ScanPoint> points;
  bool separations_increasing = true;
  std::optional<double> min_gap;
  // |E0 - E_inf,0| and |E1 - E_inf,1| at the largest separation.
  std::optional<double> limit_deviation0, limit_deviation1;
  int failed_points = 0;

  bool operator==(const GapScanReport&) const = default;
};

// One scan point; every stage failure is caught and recorded.
ScanPoint run_scan_point(const ExperimentConfig& cfg, double factor);
// Requires cfg.scan. Points run on cfg.solver.workers threads.
GapScanReport run_scan(const ExperimentConfig& cfg);

struct H2DemoPoint {
  double separation = 0.0;
  std::string status = "ok";
  std::string error;
  std::optional<double> e0_distinguishable, e1_distinguishable, splitting;
  std::optional<double> e0_bosonic, e1_bosonic, bosonic_gap;
};

struct H2DemoReport {
  double atomic_gap = 0.0;  // single-atom E1 - E0 on the same grid
  std::vector<H2DemoPoint> points;
  // At the largest separation.
  std::optional<double> splitting, bosonic_gap, gap_ratio;
  // Splitting at the smallest over the largest separation.
  std::optional<double> splitting_decay;
};

// Neutral diatomic with two electrons; separations come from the scan
// schedule when present, else the configured geometry alone.
H2DemoReport run_h2_demo(const ExperimentConfig& cfg);

nlohmann::json to_json(const ScanPoint& p);
nlohmann::json to_json(const GapScanReport& r);
GapScanReport scan_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const H2DemoReport& r);

// CSV header plus one row per point.
std::string scan_csv(const GapScanReport& r);

struct EmittedFiles {
  std::vector<std::string> paths;
};

// Writes scan_report.json (with config, hash and timestamp), scan_points.csv
// and plot_scan.py into `directory`, filtered by `formats`. Throws Error
// naming the path on I/O failure.
EmittedFiles emit_report(const GapScanReport& report, const ExperimentConfig& cfg, const std::string& directory,
                         const std::vector<std::string>& formats);

// Writes `text` to directory/name, creating the directory.
std::string write_text(const std::string& directory, const std::string& name, const std::string& text);
// UTC ISO-8601 timestamp.
std::string utc_timestamp();

}  // namespace bosegap
