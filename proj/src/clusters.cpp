#include "bosegap/clusters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bosegap/error.hpp"
#include "bosegap/operators.hpp"
#include "bosegap/parallel.hpp"
#include "bosegap/spectra.hpp"
#include "bosegap/symmetry.hpp"

namespace bosegap {

namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::vector<double> block_centers(const NuclearConfiguration& y, const std::vector<std::vector<int>>& blocks) {
  std::vector<double> c;
  for (const auto& b : blocks) {
    double s = 0.0;
    for (int i : b) s += y.positions[i];
    c.push_back(s / static_cast<double>(b.size()));
  }
  return c;
}

void compositions(int remaining, int parts, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = remaining; first >= 0; --first) {
    prefix.push_back(first);
    compositions(remaining - first, parts - 1, prefix, out);
    prefix.pop_back();
  }
}

std::vector<std::vector<int>> all_compositions(int total, int parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> prefix;
  if (parts >= 1) compositions(total, parts, prefix, out);
  return out;
}

std::string occupation_string(const std::vector<int>& occ) {
  std::string s = "(";
  for (std::size_t i = 0; i < occ.size(); ++i) s += (i ? "," : "") + std::to_string(occ[i]);
  return s + ")";
}

void keep_min(std::optional<double>& slot, double v) {
  if (!slot || v < *slot) slot = v;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

PartitionDetection detect_partition(const std::vector<NuclearConfiguration>& configs, double threshold) {
  if (configs.empty()) throw ValidationError("detect_partition needs at least one configuration");
  if (!(threshold > 0.0)) throw ValidationError("partition distance must be positive");
  const auto& last = configs.back();
  const int m = static_cast<int>(last.size());
  if (m < 1) throw ValidationError("configuration without nuclei");
  for (const auto& c : configs)
    if (static_cast<int>(c.size()) != m) throw ValidationError("configurations in a sequence must have equal size");

  DisjointSets sets(m);
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if (std::abs(last.positions[a] - last.positions[b]) <= threshold) sets.unite(a, b);
  std::vector<std::vector<int>> blocks;
  std::vector<int> slot(m, -1);
  for (int a = 0; a < m; ++a) {
    const int r = sets.find(a);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[slot[r]].push_back(a);
  }

  PartitionDetection d;
  d.threshold = threshold;
  d.partition = make_partition(last, blocks);
  d.no_breakup = m >= 2 && d.partition.size() == 1;
  if (configs.size() < 2) return d;

  const auto& part = d.partition;
  const int k = part.size();
  std::vector<double> previous;
  std::vector<std::vector<double>> first_offsets;
  for (std::size_t t = 0; t < configs.size(); ++t) {
    const auto& y = configs[t];
    for (int j = 0; j < k; ++j) {
      const auto& b = part.blocks[j];
      for (std::size_t u = 0; u < b.size(); ++u)
        for (std::size_t v = u + 1; v < b.size(); ++v) {
          const double dist = std::abs(y.positions[b[u]] - y.positions[b[v]]);
          if (dist > threshold) {
            d.intra_bounded = false;
            d.violations.push_back("configuration " + std::to_string(t) + ": nuclei " + std::to_string(b[u]) +
                                   " and " + std::to_string(b[v]) + " of block " + std::to_string(j) + " are " +
                                   std::to_string(dist) + " apart");
          }
        }
    }
    const auto centers = block_centers(y, part.blocks);
    std::vector<double> seps;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) seps.push_back(std::abs(centers[i] - centers[j]));
    if (t > 0) {
      for (std::size_t q = 0; q < seps.size(); ++q)
        if (!(seps[q] > previous[q])) {
          d.inter_increasing = false;
          d.violations.push_back("configuration " + std::to_string(t) + ": inter-block distance " +
                                 std::to_string(q) + " does not increase (" + std::to_string(previous[q]) + " -> " +
                                 std::to_string(seps[q]) + ")");
        }
    }
    previous = seps;
    std::vector<std::vector<double>> offsets;
    for (int j = 0; j < k; ++j) {
      std::vector<double> off;
      for (int i : part.blocks[j]) off.push_back(y.positions[i] - centers[j]);
      offsets.push_back(std::move(off));
    }
    if (t == 0) {
      first_offsets = offsets;
    } else {
      for (int j = 0; j < k; ++j)
        for (std::size_t i = 0; i < offsets[j].size(); ++i)
          if (std::abs(offsets[j][i] - first_offsets[j][i]) > 1e-9) d.fixed_geometry = false;
    }
  }
  return d;
}

int lieb_limit(const NuclearPartition& partition, const NuclearConfiguration& nuclei, int j) {
  return 2 * partition.charges(nuclei).at(j) + static_cast<int>(partition.blocks.at(j).size());
}

std::vector<ElectronAssignment> enumerate_assignments(int electrons, const NuclearPartition& partition,
                                                      const NuclearConfiguration& nuclei, bool allow_free_slot) {
  if (electrons < 0) throw ValidationError("electron count must be nonnegative");
  const int k = partition.size();
  std::vector<ElectronAssignment> out;
  for (auto& occ : all_compositions(electrons, k + (allow_free_slot ? 1 : 0))) {
    ElectronAssignment a;
    a.free_slot = allow_free_slot;
    for (int j = 0; j < k; ++j)
      if (occ[j] >= lieb_limit(partition, nuclei, j)) a.lieb_excluded.push_back(j);
    a.occupation = std::move(occ);
    out.push_back(std::move(a));
  }
  return out;
}

bool IonCharges::neutral() const {
  return std::all_of(delta.begin(), delta.end(), [](int d) { return d == 0; });
}

int IonCharges::total() const { return std::accumulate(delta.begin(), delta.end(), 0); }

IonCharges ion_charges(const std::vector<int>& occupation, const NuclearPartition& partition,
                       const NuclearConfiguration& nuclei) {
  const int k = partition.size();
  if (static_cast<int>(occupation.size()) != k && static_cast<int>(occupation.size()) != k + 1)
    throw ValidationError("occupation does not match the partition");
  IonCharges c;
  c.cluster_charges = partition.charges(nuclei);
  for (int j = 0; j < k; ++j) c.delta.push_back(occupation[j] - c.cluster_charges[j]);
  return c;
}

std::optional<double> ClusterLevels::e1() const {
  return distinct.size() > 1 ? std::optional<double>(distinct[1]) : std::nullopt;
}

std::optional<double> ClusterLevels::e2() const {
  return distinct.size() > 2 ? std::optional<double>(distinct[2]) : std::nullopt;
}

const ClusterLevels& ThresholdTable::at(int cluster, int count) const {
  if (cluster < 0 || cluster >= static_cast<int>(levels.size()) || count < 0 ||
      count >= static_cast<int>(levels[cluster].size()))
    throw ValidationError("no table entry for cluster " + std::to_string(cluster) + " with " +
                          std::to_string(count) + " electrons");
  return levels[cluster][count];
}

std::optional<double> ThresholdTable::occupation_energy(const std::vector<int>& occupation) const {
  double e = 0.0;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const auto& l = at(static_cast<int>(j), occupation.at(j));
    if (!l.solved || !l.bound) return std::nullopt;
    e += l.e0();
  }
  return e;
}

void assemble_thresholds(ThresholdTable& t) {
  const int k = static_cast<int>(t.levels.size());
  const auto& neutral = t.cluster_charges;
  t.e_inf0 = 0.0;
  for (int j = 0; j < k; ++j) {
    const auto& l = t.at(j, neutral[j]);
    if (!l.solved) throw SolverError("neutral cluster " + std::to_string(j) + " was not solved: " + l.note);
    t.e_inf0 += l.e0();
  }
  t.excited_thresholds.assign(k, 0.0);
  t.candidates.clear();
  for (int l = 0; l < k; ++l) {
    const auto& lv = t.at(l, neutral[l]);
    if (!lv.e1()) throw SolverError("cluster " + std::to_string(l) + " has no excited level; raise eigen_count");
    double e = 0.0;
    for (int j = 0; j < k; ++j) e += j == l ? *lv.e1() : t.at(j, neutral[j]).e0();
    t.excited_thresholds[l] = e;
    ThresholdCandidate c;
    c.kind = ThresholdCandidate::Kind::excited;
    c.occupation = neutral;
    c.excited_cluster = l;
    c.energy = t.excited_thresholds[l];
    t.candidates.push_back(c);
  }
  for (const auto& occ : all_compositions(t.electrons, k)) {
    if (occ == neutral) continue;
    ThresholdCandidate c;
    c.kind = ThresholdCandidate::Kind::ionic;
    c.occupation = occ;
    for (int j = 0; j < k; ++j)
      if (t.at(j, occ[j]).lieb_excluded) c.lieb_excluded = true;
    if (c.lieb_excluded) {
      c.feasible = false;
      c.note = "excluded by the Lieb bound";
    } else if (auto e = t.occupation_energy(occ)) {
      c.energy = *e;
    } else {
      c.feasible = false;
      for (int j = 0; j < k; ++j) {
        const auto& l = t.at(j, occ[j]);
        if (!l.solved || !l.bound) {
          c.note = "cluster " + std::to_string(j) + " has no bound state with " + std::to_string(occ[j]) +
                   " electrons";
          break;
        }
      }
    }
    t.candidates.push_back(c);
  }

  t.e_inf1 = std::numeric_limits<double>::infinity();
  double lowest_ionic = std::numeric_limits<double>::infinity();
  for (const auto& c : t.candidates) {
    if (!c.feasible) continue;
    t.e_inf1 = std::min(t.e_inf1, c.energy);
    if (c.kind == ThresholdCandidate::Kind::ionic) lowest_ionic = std::min(lowest_ionic, c.energy);
  }
  t.degeneracy_tolerance = std::max(t.degeneracy_tolerance, 1e-14);
  const double tol = t.degeneracy_tolerance;
  t.ionic_minimizers.clear();
  t.lowest_ionic.clear();
  for (int i = 0; i < static_cast<int>(t.candidates.size()); ++i) {
    const auto& c = t.candidates[i];
    if (!c.feasible || c.kind != ThresholdCandidate::Kind::ionic) continue;
    if (c.energy <= t.e_inf1 + tol) t.ionic_minimizers.push_back(i);
    if (c.energy <= lowest_ionic + tol) t.lowest_ionic.push_back(i);
  }

  t.g1.reset();
  t.g2.reset();
  t.g3.reset();
  t.g4.reset();
  for (int j = 0; j < k; ++j) {
    const auto& l = t.at(j, neutral[j]);
    if (l.e1()) keep_min(t.g1, *l.e1() - l.e0());
    if (l.e2()) keep_min(t.g1, *l.e2() - *l.e1());
  }
  for (int i : t.ionic_minimizers) {
    const auto& occ = t.candidates[i].occupation;
    for (int j = 0; j < k; ++j) {
      const auto& l = t.at(j, occ[j]);
      if (occ[j] >= 1 && l.e1()) keep_min(t.g2, *l.e1() - l.e0());
      // Cations against the same cluster holding one more electron.
      if (occ[j] < neutral[j] && t.at(j, occ[j] + 1).solved) keep_min(t.g3, l.e0() - t.at(j, occ[j] + 1).e0());
    }
  }
  for (int i = 0; i < static_cast<int>(t.candidates.size()); ++i) {
    const auto& c = t.candidates[i];
    if (!c.feasible || c.kind != ThresholdCandidate::Kind::ionic) continue;
    if (std::find(t.ionic_minimizers.begin(), t.ionic_minimizers.end(), i) != t.ionic_minimizers.end()) continue;
    keep_min(t.g4, c.energy - t.e_inf1);
  }
  t.g.reset();
  for (const auto& gi : {t.g1, t.g2, t.g3, t.g4})
    if (gi) keep_min(t.g, *gi);
}

ThresholdTable build_threshold_table(const ExperimentConfig& cfg, const NuclearConfiguration& nuclei,
                                     const NuclearPartition& partition, const ThresholdOptions& options) {
  const int n = cfg.particles.electron_count;
  if (n != nuclei.total_charge()) throw ValidationError("threshold tables need a neutral configuration");
  int covered = 0;
  for (const auto& b : partition.blocks) covered += static_cast<int>(b.size());
  if (covered != static_cast<int>(nuclei.size())) throw ValidationError("partition does not cover the nuclei");

  ThresholdTable t;
  t.partition = partition;
  t.cluster_charges = partition.charges(nuclei);
  t.electrons = n;
  t.statistics = cfg.particles.statistics;
  const int k = partition.size();
  t.levels.assign(k, std::vector<ClusterLevels>(n + 1));

  std::vector<std::pair<int, int>> tasks;
  for (int j = 0; j < k; ++j) {
    const int limit = lieb_limit(partition, nuclei, j);
    for (int c = 0; c <= n; ++c) {
      auto& l = t.levels[j][c];
      l.cluster = j;
      l.electrons = c;
      l.delta = c - t.cluster_charges[j];
      l.lieb_excluded = c >= limit;
      if (l.lieb_excluded) {
        l.note = "not solved: at or above the Lieb limit " + std::to_string(limit);
      } else if (c > 0 && tensor_dimension(cfg.model.grid_points, c) > cfg.solver.max_dimension) {
        l.note = "not solved: dimension exceeds the budget";
      } else {
        tasks.emplace_back(j, c);
      }
    }
  }

  SolveOptions o = SolveOptions::from(cfg);
  o.count = std::max(o.count, 4);
  parallel_for(tasks.size(), options.workers, [&](std::size_t i) {
    const auto [j, c] = tasks[i];
    auto& l = t.levels[j][c];
    const auto op = assemble_cluster_count(cfg.model, nuclei, partition, j, c, options.centered);
    auto proj = projector_for(cfg.particles.statistics, TensorShape{cfg.model.grid_points, c});
    SolveOptions oc = o;
    oc.count = static_cast<int>(std::min<std::size_t>(oc.count, op.dimension()));
    try {
      const auto rep = lowest_eigenpairs(op, oc, c >= 2 ? proj.get() : nullptr, cfg.particles.statistics);
      l.eigenvalues = rep.eigenvalues;
      l.method = rep.method;
      for (std::size_t g = 0; g < rep.degeneracy_groups.size(); ++g) {
        const auto& group = rep.degeneracy_groups[g];
        l.distinct.push_back(rep.eigenvalues[group.front()]);
        if (g == 0)
          for (int idx : group) l.ground.push_back(rep.eigenvectors[idx]);
        if (g == 1) {
          l.excited_multiplicity = static_cast<int>(group.size());
          for (int idx : group) l.excited.push_back(rep.eigenvectors[idx]);
        }
      }
      // The last group may be cut off by the eigenvalue count.
      if (rep.degeneracy_groups.size() == 2 && static_cast<int>(rep.eigenvalues.size()) == oc.count &&
          oc.count < static_cast<int>(op.dimension()))
        l.note = "excited multiplicity may be truncated";
      l.solved = true;
    } catch (const SolverError& e) {
      l.note = std::string("solve failed: ") + e.what();
    }
  });

  for (int j = 0; j < k; ++j) {
    for (int c = 0; c <= n; ++c) {
      auto& l = t.levels[j][c];
      if (!l.solved) continue;
      if (c == 0) {
        l.bound = true;
        l.threshold = l.e0();
        continue;
      }
      const auto& below = t.levels[j][c - 1];
      if (!below.solved) {
        l.note = "ionization threshold unavailable";
        continue;
      }
      l.threshold = below.e0();
      l.bound = l.e0() < l.threshold - cfg.tolerances.bound_margin;
      if (!l.bound) l.note = "no bound state below the ionization threshold";
    }
  }

  double e0 = 0.0;
  for (int j = 0; j < k; ++j)
    if (t.levels[j][t.cluster_charges[j]].solved) e0 += t.levels[j][t.cluster_charges[j]].e0();
  t.degeneracy_tolerance = degeneracy_tolerance(e0, cfg.tolerances.degeneracy);
  assemble_thresholds(t);
  return t;
}

ThresholdTable build_threshold_table(const ExperimentConfig& cfg, const NuclearPartition& partition) {
  ThresholdOptions o;
  o.workers = cfg.solver.workers;
  return build_threshold_table(cfg, cfg.nuclei, partition, o);
}

EigenstateCheck minimizer_has_eigenstate(const ThresholdTable& table, const std::vector<int>& occupation) {
  if (occupation.size() != table.levels.size()) throw ValidationError("occupation does not match the table");
  EigenstateCheck r;
  r.margin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(occupation.size()); ++j) {
    const int c = occupation[j];
    if (c == 0) continue;
    const auto& l = table.at(j, c);
    const auto& below = table.at(j, c - 1);
    if (!l.solved || !below.solved)
      throw ValidationError("missing table entry for cluster " + std::to_string(j) + " at " + std::to_string(c) +
                            " electrons");
    const double m = below.e0() - l.e0();
    if (m < r.margin) r.margin = m;
    if (!(m > table.degeneracy_tolerance) && r.ok) {
      r.ok = false;
      r.failing_cluster = j;
    }
  }
  if (!std::isfinite(r.margin)) r.margin = 0.0;
  return r;
}

NeutralityReport check_local_neutrality(const ThresholdTable& table) {
  NeutralityReport r;
  if (table.levels.size() < 2) {
    r.message = "single cluster: local neutrality holds vacuously";
    return r;
  }
  for (int i = 0; i < static_cast<int>(table.candidates.size()); ++i) {
    const auto& c = table.candidates[i];
    if (!c.feasible || c.kind != ThresholdCandidate::Kind::ionic) continue;
    keep_min(r.margin, c.energy - table.e_inf0);
    if (c.energy <= table.e_inf0 + table.degeneracy_tolerance) r.violating.push_back(i);
  }
  r.holds = r.violating.empty();
  if (!r.margin) {
    r.message = "no bound ionic configuration; neutral minimizer";
  } else if (r.holds) {
    r.message = "neutral minimizer with margin " + std::to_string(*r.margin);
  } else {
    r.message = "local neutrality violated for this instance";
  }
  return r;
}

nlohmann::json to_json(const NuclearPartition& p) {
  return {{"blocks", p.blocks},   {"centers", p.centers},         {"radii", p.radii},
          {"offsets", p.offsets}, {"separations", p.separations}};
}

nlohmann::json to_json(const PartitionDetection& d) {
  return {{"partition", to_json(d.partition)},
          {"threshold", d.threshold},
          {"no_breakup", d.no_breakup},
          {"intra_bounded", d.intra_bounded},
          {"inter_increasing", d.inter_increasing},
          {"fixed_geometry", d.fixed_geometry},
          {"violations", d.violations}};
}

nlohmann::json to_json(const ThresholdTable& t) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& row : t.levels)
    for (const auto& l : row)
      levels.push_back({{"cluster", l.cluster},
                        {"electrons", l.electrons},
                        {"delta", l.delta},
                        {"lieb_excluded", l.lieb_excluded},
                        {"solved", l.solved},
                        {"bound", l.bound},
                        {"threshold", l.threshold},
                        {"eigenvalues", l.eigenvalues},
                        {"distinct", l.distinct},
                        {"excited_multiplicity", l.excited_multiplicity},
                        {"method", l.method},
                        {"note", l.note}});
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : t.candidates)
    cands.push_back({{"kind", c.kind == ThresholdCandidate::Kind::excited ? "excited" : "ionic"},
                     {"occupation", c.occupation},
                     {"excited_cluster", c.excited_cluster},
                     {"energy", c.feasible ? nlohmann::json(c.energy) : nlohmann::json()},
                     {"feasible", c.feasible},
                     {"lieb_excluded", c.lieb_excluded},
                     {"note", c.note}});
  const auto ln = check_local_neutrality(t);
  return {{"partition", to_json(t.partition)},
          {"cluster_charges", t.cluster_charges},
          {"electrons", t.electrons},
          {"statistics", std::string(to_string(t.statistics))},
          {"degeneracy_tolerance", t.degeneracy_tolerance},
          {"levels", levels},
          {"e_inf0", t.e_inf0},
          {"excited_thresholds", t.excited_thresholds},
          {"candidates", cands},
          {"e_inf1", t.e_inf1},
          {"ionic_minimizers", t.ionic_minimizers},
          {"lowest_ionic", t.lowest_ionic},
          {"G1", optional_json(t.g1)},
          {"G2", optional_json(t.g2)},
          {"G3", optional_json(t.g3)},
          {"G4", optional_json(t.g4)},
          {"G", optional_json(t.g)},
          {"local_neutrality", {{"holds", ln.holds}, {"margin", optional_json(ln.margin)}, {"message", ln.message}}}};
}

std::string summary_text(const ThresholdTable& t) {
  std::ostringstream os;
  os.precision(10);
  os << "clusters " << t.levels.size() << ", electrons " << t.electrons << ", statistics " << to_string(t.statistics)
     << "\n";
  os << "E_inf,0 = " << t.e_inf0 << "\nE_inf,1 = " << t.e_inf1 << "\n";
  std::vector<int> order(t.candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ca = t.candidates[a];
    const auto& cb = t.candidates[b];
    if (ca.feasible != cb.feasible) return ca.feasible;
    return ca.feasible && ca.energy < cb.energy;
  });
  os << "candidates:\n";
  for (int i : order) {
    const auto& c = t.candidates[i];
    os << "  " << (c.kind == ThresholdCandidate::Kind::excited ? "excited " : "ionic   ")
       << occupation_string(c.occupation);
    if (c.kind == ThresholdCandidate::Kind::excited) os << " cluster " << c.excited_cluster;
    if (c.feasible)
      os << "  " << c.energy;
    else
      os << "  infeasible: " << c.note;
    os << "\n";
  }
  auto g = [&](const char* name, const std::optional<double>& v) {
    os << name << " = ";
    if (v)
      os << *v;
    else
      os << "n/a";
    os << "\n";
  };
  g("G1", t.g1);
  g("G2", t.g2);
  g("G3", t.g3);
  g("G4", t.g4);
  g("G", t.g);
  os << check_local_neutrality(t).message << "\n";
  return os.str();
}

}  // namespace bosegap
