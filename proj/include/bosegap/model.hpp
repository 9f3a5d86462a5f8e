#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bosegap {

// Physical and discretization parameters, atomic units by default.
struct ModelParams {
  double electron_mass = 1.0;
  double charge_unit = 1.0;
  double softening = 1.0;    // a in q1 q2 / sqrt(r^2 + a^2)
  double grid_extent = 20.0; // L, the grid spans [-L, L]
  int grid_points = 201;     // n nodes per axis
  int stencil_order = 2;     // 2 or 4

  double spacing() const { return 2.0 * grid_extent / (grid_points - 1); }
  double kinetic_coefficient() const { return 1.0 / (2.0 * electron_mass); }
};

// Uniform one-dimensional grid. Nodes x_i = -L + i h, i = 0..n-1; the
// Dirichlet condition is imposed through zero ghost values at i = -1 and i = n.
struct Grid {
  int points = 0;
  double extent = 0.0;
  double spacing = 0.0;

  static Grid from(const ModelParams& model) {
    return Grid{model.grid_points, model.grid_extent, model.spacing()};
  }
  double coordinate(int i) const { return -extent + i * spacing; }
  // Index of the node closest to x, clamped to the grid.
  int nearest(double x) const;
};

struct NuclearConfiguration {
  std::vector<double> positions;
  std::vector<int> charges;
  bool include_nuclear_repulsion = false;

  std::size_t size() const { return positions.size(); }
  int total_charge() const;
  // R(y): least distance between nuclei; empty for a single nucleus.
  std::optional<double> min_distance() const;
  // Softened V_n(y) = sum_{i<j} e^2 Z_i Z_j / sqrt(|y_i - y_j|^2 + a^2).
  double nuclear_repulsion(const ModelParams& model) const;
};

enum class Statistics { bosonic, distinguishable, fermionic };

std::string_view to_string(Statistics s);
Statistics statistics_from_string(std::string_view s);

struct ParticleSystem {
  int electron_count = 1;
  Statistics statistics = Statistics::bosonic;
};

struct ScanSchedule {
  std::vector<double> factors;
  // Nuclei of the base layout closer than this form one rigid cluster; the
  // scan moves cluster centers apart and keeps internal offsets fixed.
  double cluster_threshold = 0.5;
};

struct Tolerances {
  double eigen_residual = 1e-8;
  double degeneracy = 1e-8;       // relative to |E0|
  double inner_solve = 1e-10;     // CG relative residual for the Schur term
  double fixed_point = 1e-12;     // relative tolerance on lambda
  double gram_floor = 1e-8;       // smallest admissible Gram eigenvalue
  double bound_margin = 1e-6;     // E must sit this far below its threshold
  double partition_distance = 5.0;
};

struct SolverSettings {
  int eigen_count = 4;
  std::uint64_t seed = 20240611;
  std::size_t max_dimension = 4'000'000;
  int max_restarts = 400;
  int workers = 1;
  bool dense_oracle = false;
};

struct OutputSpec {
  std::string directory = "out";
  std::vector<std::string> formats{"json", "csv", "plot"};
};

struct ExperimentConfig {
  ModelParams model;
  NuclearConfiguration nuclei;
  ParticleSystem particles;
  std::optional<ScanSchedule> scan;
  Tolerances tolerances;
  SolverSettings solver;
  OutputSpec output;

  bool neutral() const { return particles.electron_count == nuclei.total_charge(); }
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;

  bool ok() const { return errors.empty(); }
};

// Parses the JSON configuration document. Throws ValidationError on syntax
// errors (with byte offset), unknown keys, missing required fields and any
// hard invariant violation reported by validate_config.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

// Canonical JSON rendering; parse_config(emit_config(c)) reproduces c.
std::string emit_config(const ExperimentConfig& cfg);

// Hard errors plus physics warnings (Lieb bound N < 2Z + M, non-neutral runs).
ValidationReport validate_config(const ExperimentConfig& cfg);

// Stable 64-bit FNV-1a hash of the canonical rendering, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace bosegap
