#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bosegap/linalg.hpp"
#include "bosegap/model.hpp"
#include "bosegap/operators.hpp"

namespace bosegap {

class StatisticsProjector;

struct SolveOptions {
  int count = 4;
  double tolerance = 1e-8;        // absolute residual
  double degeneracy = 1e-8;       // relative to |E0|
  std::uint64_t seed = 20240611;
  int max_restarts = 400;
  bool dense_oracle = false;      // dense solve whenever n^N <= 4096

  static SolveOptions from(const ExperimentConfig& cfg);
};

struct SpectralReport {
  std::vector<double> eigenvalues;
  std::vector<Vector> eigenvectors;
  std::vector<double> residuals;
  std::vector<std::vector<int>> degeneracy_groups;
  Statistics subspace = Statistics::distinguishable;
  double spacing = 0.0;
  int stencil_order = 2;
  std::string method;
  bool converged = false;
  long matvecs = 0;
};

// Lowest `count` eigenpairs inside the range of `projector` (whole space
// when null). Tridiagonal LAPACK path for one particle with the order-2
// stencil, dense path for small or oracle-forced problems, block Lanczos
// otherwise. Eigenvectors are unit vectors with nonnegative entry sum.
// Throws SolverError when the iteration does not converge.
SpectralReport lowest_eigenpairs(const ManyBodyOperator& op, const SolveOptions& options,
                                 const StatisticsProjector* projector = nullptr,
                                 Statistics subspace = Statistics::distinguishable);

// Groups consecutive eigenvalues closer than `tolerance` (absolute).
std::vector<std::vector<int>> degeneracy_groups(const std::vector<double>& values, double tolerance);

double degeneracy_tolerance(double e0, double relative);

struct GapResult {
  double gap = 0.0;
  bool ground_degenerate = false;
  double degeneracy_tolerance = 0.0;
  double e0 = 0.0;
  double e1 = 0.0;  // lowest level above the ground group
};

// Throws SolverError when fewer than two levels are available or every
// level lies in the ground group.
GapResult gap(const SpectralReport& report, double degeneracy_tolerance);
GapResult gap(const std::vector<double>& values, double degeneracy_tolerance);

// Sigma(y): ground energy of the same geometry with N - 1 electrons; 0 when
// N = 1.
double ionization_threshold(const ExperimentConfig& cfg, const NuclearConfiguration& y);

struct LocalizationFit {
  double alpha = 0.0;
  double r_squared = 0.0;
  int points = 0;
  double window_start = 0.0;
  double window_end = 0.0;
  bool accepted = false;
  std::string note;
};

// Least-squares slope of -log |psi restricted to shells of the distance
// max_l min_j |x_l - z_j|| over the interior (|x_l| <= 0.8 L). The window
// starts past the peak and stops where the shell norm falls below 1e-7 of
// its maximum.
LocalizationFit localization_rate(std::span<const double> psi, const Grid& grid, int particles,
                                  const std::vector<double>& centers, double shell_width = 0.0);

nlohmann::json to_json(const SpectralReport& r, bool include_vectors = false);
nlohmann::json to_json(const GapResult& g);
nlohmann::json to_json(const LocalizationFit& f);

// Flat little-endian layout: uint64 dimension, then the doubles.
void write_eigenvector(const std::string& path, std::span<const double> v);
Vector read_eigenvector(const std::string& path);

}  // namespace bosegap
