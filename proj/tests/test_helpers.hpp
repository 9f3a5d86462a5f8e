#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "bosegap/linalg.hpp"
#include "bosegap/model.hpp"

namespace testutil {

inline bosegap::Vector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  bosegap::Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

inline double dot(const bosegap::Vector& a, const bosegap::Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const bosegap::Vector& a) { return std::sqrt(dot(a, a)); }

inline double max_abs_diff(const bosegap::Vector& a, const bosegap::Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bosegap::ModelParams small_model(double extent = 8.0, int points = 33) {
  bosegap::ModelParams m;
  m.grid_extent = extent;
  m.grid_points = points;
  return m;
}

}  // namespace testutil
