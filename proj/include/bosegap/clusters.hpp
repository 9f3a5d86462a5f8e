#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bosegap/decomposition.hpp"
#include "bosegap/linalg.hpp"
#include "bosegap/model.hpp"

namespace bosegap {

struct PartitionDetection {
  NuclearPartition partition;  // built from the last configuration
  double threshold = 0.0;
  bool no_breakup = false;     // M >= 2 but every nucleus ended in one block
  // Sequence checks; trivially true for a single configuration.
  bool intra_bounded = true;   // intra-block distances stay <= D throughout
  bool inter_increasing = true;
  bool fixed_geometry = true;  // offsets y_i - z_j identical along the sequence
  std::vector<std::string> violations;
};

// Connected components of the graph with an edge between nuclei closer than
// D in the last configuration; earlier configurations only feed the
// sequence checks.
PartitionDetection detect_partition(const std::vector<NuclearConfiguration>& configs, double threshold);

struct ElectronAssignment {
  std::vector<int> occupation;  // k entries, or k + 1 with the free slot last
  bool free_slot = false;
  // Clusters whose count reaches 2 Z~_j + |N_j|, where no bound state exists.
  std::vector<int> lieb_excluded;

  bool lieb_feasible() const { return lieb_excluded.empty(); }
};

// Every composition of N into k (or k + 1) nonnegative parts, in
// descending lexicographic order.
std::vector<ElectronAssignment> enumerate_assignments(int electrons, const NuclearPartition& partition,
                                                      const NuclearConfiguration& nuclei, bool allow_free_slot);

// Smallest cluster electron count with no bound state: 2 Z~_j + |N_j|.
int lieb_limit(const NuclearPartition& partition, const NuclearConfiguration& nuclei, int j);

struct IonCharges {
  std::vector<int> delta;           // |E_j| - Z~_j
  std::vector<int> cluster_charges; // Z~_j

  bool neutral() const;
  int total() const;
};

// The free slot, when present, does not belong to any cluster and is ignored.
IonCharges ion_charges(const std::vector<int>& occupation, const NuclearPartition& partition,
                       const NuclearConfiguration& nuclei);

// Spectrum of one cluster holding a given number of electrons.
struct ClusterLevels {
  int cluster = 0;
  int electrons = 0;
  int delta = 0;
  bool lieb_excluded = false;
  bool solved = false;
  // Below the cluster's own ionization threshold E_j(n - 1) by more than the
  // configured margin. Zero electrons always count as bound.
  bool bound = false;
  double threshold = 0.0;
  std::vector<double> eigenvalues;
  std::vector<double> distinct;  // one value per degeneracy group
  int excited_multiplicity = 0;  // size of the second group
  std::vector<Vector> ground;    // ground group eigenvectors
  std::vector<Vector> excited;   // first excited group eigenvectors
  std::string method;
  std::string note;

  double e0() const { return distinct.at(0); }
  std::optional<double> e1() const;
  std::optional<double> e2() const;
};

struct ThresholdCandidate {
  enum class Kind { excited, ionic };
  Kind kind = Kind::excited;
  std::vector<int> occupation;
  int excited_cluster = -1;  // for Kind::excited
  double energy = 0.0;
  bool feasible = true;
  bool lieb_excluded = false;
  std::string note;
};

struct ThresholdTable {
  NuclearPartition partition;
  std::vector<int> cluster_charges;
  int electrons = 0;
  Statistics statistics = Statistics::bosonic;
  double degeneracy_tolerance = 0.0;
  // levels[j][n] for n = 0..N; unsolved entries keep solved = false.
  std::vector<std::vector<ClusterLevels>> levels;

  double e_inf0 = 0.0;
  std::vector<double> excited_thresholds;  // E_inf,0^l per cluster l
  std::vector<ThresholdCandidate> candidates;
  double e_inf1 = 0.0;
  // Feasible ionic candidates with energy equal to E_inf,1 (within the
  // degeneracy tolerance), as indices into candidates.
  std::vector<int> ionic_minimizers;
  // Feasible ionic candidates of lowest energy among ionic ones.
  std::vector<int> lowest_ionic;

  std::optional<double> g1, g2, g3, g4;
  std::optional<double> g;

  const ClusterLevels& at(int cluster, int electrons) const;
  // Sum of cluster ground energies, or nothing when some cluster has no
  // bound state at its count.
  std::optional<double> occupation_energy(const std::vector<int>& occupation) const;
};

struct ThresholdOptions {
  bool centered = false;
  int workers = 1;
};

// Solves every cluster at every count up to min(N, lieb_limit - 1) and
// assembles the threshold energies and gap constants. Requires a neutral
// configuration.
ThresholdTable build_threshold_table(const ExperimentConfig& cfg, const NuclearConfiguration& nuclei,
                                     const NuclearPartition& partition, const ThresholdOptions& options = {});
ThresholdTable build_threshold_table(const ExperimentConfig& cfg, const NuclearPartition& partition);

// Recomputes E_inf,0, the candidate energies, E_inf,1 and G1..G4 from
// table.levels. build_threshold_table calls it after solving.
void assemble_thresholds(ThresholdTable& table);

struct EigenstateCheck {
  bool ok = true;
  int failing_cluster = -1;
  double margin = 0.0;  // smallest E_j(n_j - 1) - E_j(n_j) over clusters with electrons
};

// True iff every cluster with n_j >= 1 electrons sits strictly below its
// one-electron-fewer energy. Throws ValidationError on missing entries.
EigenstateCheck minimizer_has_eigenstate(const ThresholdTable& table, const std::vector<int>& occupation);

struct NeutralityReport {
  bool holds = true;
  // Lowest feasible ionic energy minus E_inf,0; empty without ionic candidates.
  std::optional<double> margin;
  std::vector<int> violating;  // candidate indices at or below E_inf,0
  std::string message;
};

NeutralityReport check_local_neutrality(const ThresholdTable& table);

nlohmann::json to_json(const ThresholdTable& t);
nlohmann::json to_json(const PartitionDetection& d);
nlohmann::json to_json(const NuclearPartition& p);
std::string summary_text(const ThresholdTable& t);

}  // namespace bosegap
