#include "bosegap/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bosegap/error.hpp"

namespace bosegap {

using nlohmann::json;

int Grid::nearest(double x) const {
  const long i = std::lround((x + extent) / spacing);
  return static_cast<int>(std::clamp<long>(i, 0, points - 1));
}

int NuclearConfiguration::total_charge() const {
  int z = 0;
  for (int c : charges) z += c;
  return z;
}

std::optional<double> NuclearConfiguration::min_distance() const {
  if (positions.size() < 2) return std::nullopt;
  double best = std::abs(positions[0] - positions[1]);
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j)
      best = std::min(best, std::abs(positions[i] - positions[j]));
  return best;
}

double NuclearConfiguration::nuclear_repulsion(const ModelParams& model) const {
  const double e2 = model.charge_unit * model.charge_unit;
  const double a2 = model.softening * model.softening;
  double v = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      const double r = positions[i] - positions[j];
      v += e2 * charges[i] * charges[j] / std::sqrt(r * r + a2);
    }
  return v;
}

std::string_view to_string(Statistics s) {
  switch (s) {
    case Statistics::bosonic: return "bosonic";
    case Statistics::distinguishable: return "distinguishable";
    case Statistics::fermionic: return "fermionic";
  }
  return "bosonic";
}

Statistics statistics_from_string(std::string_view s) {
  if (s == "bosonic") return Statistics::bosonic;
  if (s == "distinguishable") return Statistics::distinguishable;
  if (s == "fermionic") return Statistics::fermionic;
  throw ValidationError("out-of-range value: statistics must be bosonic, distinguishable or fermionic, got '" +
                        std::string(s) + "'");
}

namespace {

// Reads fields out of one JSON object, remembering which keys were consumed
// so leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ValidationError("expected an object at '" + path_ + "'");
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  const json& required(const std::string& key) {
    if (!node_.contains(key)) throw ValidationError("missing required field '" + qualified(key) + "'");
    seen_.insert(key);
    return node_.at(key);
  }

  const json* optional(const std::string& key) {
    if (!node_.contains(key)) return nullptr;
    seen_.insert(key);
    return &node_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (const json* v = optional(key)) out = as<T>(*v, key);
  }

  template <class T>
  T as(const json& v, const std::string& key) const {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ValidationError("wrong type for field '" + qualified(key) + "'");
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) throw ValidationError("unknown key '" + qualified(key) + "'");
    }
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(const json& node, ModelParams& m) {
  ObjectReader r(node, "model");
  r.read("electron_mass", m.electron_mass);
  r.read("charge_unit", m.charge_unit);
  r.read("softening", m.softening);
  r.read("grid_extent", m.grid_extent);
  r.read("grid_points", m.grid_points);
  r.read("stencil_order", m.stencil_order);
  r.reject_unknown();
}

void read_nuclei(const json& node, NuclearConfiguration& n) {
  ObjectReader r(node, "nuclei");
  n.positions = r.as<std::vector<double>>(r.required("positions"), "positions");
  n.charges = r.as<std::vector<int>>(r.required("charges"), "charges");
  r.read("include_nuclear_repulsion", n.include_nuclear_repulsion);
  r.reject_unknown();
}

void read_particles(const json& node, ParticleSystem& p) {
  ObjectReader r(node, "particles");
  p.electron_count = r.as<int>(r.required("electron_count"), "electron_count");
  if (const json* s = r.optional("statistics")) p.statistics = statistics_from_string(r.as<std::string>(*s, "statistics"));
  r.reject_unknown();
}

void read_scan(const json& node, ScanSchedule& s) {
  ObjectReader r(node, "scan");
  s.factors = r.as<std::vector<double>>(r.required("factors"), "factors");
  r.read("cluster_threshold", s.cluster_threshold);
  r.reject_unknown();
}

void read_tolerances(const json& node, Tolerances& t) {
  ObjectReader r(node, "tolerances");
  r.read("eigen_residual", t.eigen_residual);
  r.read("degeneracy", t.degeneracy);
  r.read("inner_solve", t.inner_solve);
  r.read("fixed_point", t.fixed_point);
  r.read("gram_floor", t.gram_floor);
  r.read("bound_margin", t.bound_margin);
  r.read("partition_distance", t.partition_distance);
  r.reject_unknown();
}

void read_solver(const json& node, SolverSettings& s) {
  ObjectReader r(node, "solver");
  r.read("eigen_count", s.eigen_count);
  r.read("seed", s.seed);
  r.read("max_dimension", s.max_dimension);
  r.read("max_restarts", s.max_restarts);
  r.read("workers", s.workers);
  r.read("dense_oracle", s.dense_oracle);
  r.reject_unknown();
}

void read_output(const json& node, OutputSpec& o) {
  ObjectReader r(node, "output");
  r.read("directory", o.directory);
  r.read("formats", o.formats);
  r.reject_unknown();
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = {{"electron_mass", c.model.electron_mass}, {"charge_unit", c.model.charge_unit},
                {"softening", c.model.softening},         {"grid_extent", c.model.grid_extent},
                {"grid_points", c.model.grid_points},     {"stencil_order", c.model.stencil_order}};
  j["nuclei"] = {{"positions", c.nuclei.positions},
                 {"charges", c.nuclei.charges},
                 {"include_nuclear_repulsion", c.nuclei.include_nuclear_repulsion}};
  j["particles"] = {{"electron_count", c.particles.electron_count},
                    {"statistics", std::string(to_string(c.particles.statistics))}};
  if (c.scan) j["scan"] = {{"factors", c.scan->factors}, {"cluster_threshold", c.scan->cluster_threshold}};
  const Tolerances& t = c.tolerances;
  j["tolerances"] = {{"eigen_residual", t.eigen_residual}, {"degeneracy", t.degeneracy},
                     {"inner_solve", t.inner_solve},       {"fixed_point", t.fixed_point},
                     {"gram_floor", t.gram_floor},         {"bound_margin", t.bound_margin},
                     {"partition_distance", t.partition_distance}};
  const SolverSettings& s = c.solver;
  j["solver"] = {{"eigen_count", s.eigen_count},   {"seed", s.seed},
                 {"max_dimension", s.max_dimension}, {"max_restarts", s.max_restarts},
                 {"workers", s.workers},           {"dense_oracle", s.dense_oracle}};
  j["output"] = {{"directory", c.output.directory}, {"formats", c.output.formats}};
  return j;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }

  ExperimentConfig cfg;
  ObjectReader root(doc, "");
  if (const json* m = root.optional("model")) read_model(*m, cfg.model);
  read_nuclei(root.required("nuclei"), cfg.nuclei);
  read_particles(root.required("particles"), cfg.particles);
  if (const json* s = root.optional("scan")) {
    cfg.scan.emplace();
    read_scan(*s, *cfg.scan);
  }
  if (const json* t = root.optional("tolerances")) read_tolerances(*t, cfg.tolerances);
  if (const json* s = root.optional("solver")) read_solver(*s, cfg.solver);
  if (const json* o = root.optional("output")) read_output(*o, cfg.output);
  root.reject_unknown();

  const ValidationReport report = validate_config(cfg);
  if (!report.ok()) throw ValidationError(report.errors.front());
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open configuration file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string emit_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

ValidationReport validate_config(const ExperimentConfig& cfg) {
  ValidationReport rep;
  const ModelParams& m = cfg.model;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) rep.errors.push_back(std::string(name) + " must be > 0");
  };
  positive(m.electron_mass, "electron_mass");
  positive(m.charge_unit, "charge_unit");
  positive(m.softening, "softening");
  positive(m.grid_extent, "grid_extent");
  if (m.grid_points < 16) rep.errors.push_back("grid_points must be >= 16");
  if (m.stencil_order != 2 && m.stencil_order != 4) rep.errors.push_back("stencil_order must be 2 or 4");

  const NuclearConfiguration& nuc = cfg.nuclei;
  if (nuc.positions.empty()) rep.errors.push_back("at least one nucleus required (M >= 1)");
  if (nuc.positions.size() != nuc.charges.size())
    rep.errors.push_back("positions and charges must have the same length");
  for (int z : nuc.charges)
    if (z <= 0) rep.errors.push_back("nuclear charges must be positive integers");
  for (std::size_t i = 0; i < nuc.positions.size(); ++i)
    for (std::size_t j = i + 1; j < nuc.positions.size(); ++j)
      if (nuc.positions[i] == nuc.positions[j]) {
        rep.errors.push_back("positions pairwise distinct: nuclei " + std::to_string(i + 1) + " and " +
                             std::to_string(j + 1) + " coincide");
      }

  const int n_el = cfg.particles.electron_count;
  if (n_el < 1) rep.errors.push_back("electron_count must be >= 1");
  if (n_el > 3) rep.errors.push_back("electron_count must be <= 3 (tensor grid n^N must stay buildable)");

  const Tolerances& t = cfg.tolerances;
  positive(t.eigen_residual, "eigen_residual");
  positive(t.degeneracy, "degeneracy");
  positive(t.inner_solve, "inner_solve");
  positive(t.fixed_point, "fixed_point");
  positive(t.gram_floor, "gram_floor");
  positive(t.bound_margin, "bound_margin");
  positive(t.partition_distance, "partition_distance");
  if (cfg.solver.eigen_count < 2) rep.errors.push_back("eigen_count must be >= 2");
  if (cfg.solver.workers < 1) rep.errors.push_back("workers must be >= 1");

  if (cfg.scan) {
    const auto& f = cfg.scan->factors;
    if (f.empty()) rep.errors.push_back("scan factors must not be empty");
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!(f[i] > 0.0)) rep.errors.push_back("scan factors must be > 0");
      if (i > 0 && !(f[i] > f[i - 1])) rep.errors.push_back("scan factors must be strictly increasing");
    }
    positive(cfg.scan->cluster_threshold, "cluster_threshold");
  }

  if (rep.ok()) {
    const int z = nuc.total_charge();
    const int mcount = static_cast<int>(nuc.size());
    if (n_el >= 2 * z + mcount) rep.warnings.push_back("N >= 2Z+M: binding not expected");
    if (n_el < z) rep.warnings.push_back("non-neutral (cation): N < Z");
    else if (n_el > z) rep.warnings.push_back("non-neutral (anion): N > Z");
    if (!nuc.min_distance()) rep.notes.push_back("R(y) undefined for M=1");
    if (n_el == z) rep.notes.push_back("neutral: N = Z");
  }
  return rep;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string canon = to_json(cfg).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace bosegap
