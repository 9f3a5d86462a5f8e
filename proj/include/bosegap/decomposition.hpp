#pragma once

#include <vector>

#include "bosegap/model.hpp"

namespace bosegap {

// Partition of the nuclei into clusters. Nucleus and cluster indices are
// zero-based; blocks are sorted and ordered by their smallest member.
struct NuclearPartition {
  std::vector<std::vector<int>> blocks;
  std::vector<double> centers;                  // z_j, mean nuclear position
  std::vector<double> radii;                    // C_j
  std::vector<std::vector<double>> offsets;     // Y: y_i - z_j per member
  std::vector<std::vector<double>> separations; // r_ij = |z_i - z_j|

  int size() const { return static_cast<int>(blocks.size()); }
  int block_of(int nucleus) const;
  // Z~_j per block.
  std::vector<int> charges(const NuclearConfiguration& nuclei) const;
  // Smallest r_ij; 0 when k = 1.
  double min_separation() const;
};

// Builds centers, radii, offsets and separations for the given blocks.
// C_j is the block diameter, floored at 1 so single atoms get a finite ball.
NuclearPartition make_partition(const NuclearConfiguration& nuclei, std::vector<std::vector<int>> blocks);

// A labeled electron assignment on top of a nuclear partition: electron l
// belongs to cluster electron_cluster[l] in 0..k-1.
struct ClusterDecomposition {
  NuclearPartition partition;
  std::vector<int> electron_cluster;

  int electron_count() const { return static_cast<int>(electron_cluster.size()); }
  std::vector<int> occupation() const;
  std::vector<int> electrons_of(int cluster) const;
};

// Canonical labeling of an occupation vector: the first n_1 electrons go to
// cluster 0, the next n_2 to cluster 1, and so on.
ClusterDecomposition decomposition_from_occupation(const NuclearPartition& partition, const std::vector<int>& occupation);

}  // namespace bosegap
