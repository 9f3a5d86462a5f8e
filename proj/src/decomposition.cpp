#include "bosegap/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bosegap/error.hpp"

namespace bosegap {

int NuclearPartition::block_of(int nucleus) const {
  for (int j = 0; j < size(); ++j)
    if (std::find(blocks[j].begin(), blocks[j].end(), nucleus) != blocks[j].end()) return j;
  return -1;
}

std::vector<int> NuclearPartition::charges(const NuclearConfiguration& nuclei) const {
  std::vector<int> z(blocks.size(), 0);
  for (std::size_t j = 0; j < blocks.size(); ++j)
    for (int i : blocks[j]) z[j] += nuclei.charges[i];
  return z;
}

double NuclearPartition::min_separation() const {
  if (size() < 2) return 0.0;
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < size(); ++i)
    for (int j = i + 1; j < size(); ++j) m = std::min(m, separations[i][j]);
  return m;
}

NuclearPartition make_partition(const NuclearConfiguration& nuclei, std::vector<std::vector<int>> blocks) {
  for (auto& b : blocks) {
    if (b.empty()) throw ValidationError("cluster without nuclei");
    std::sort(b.begin(), b.end());
  }
  std::sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  NuclearPartition p;
  p.blocks = std::move(blocks);
  const int k = p.size();
  for (const auto& b : p.blocks) {
    double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i : b) {
      const double y = nuclei.positions.at(i);
      sum += y;
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    const double z = sum / static_cast<double>(b.size());
    p.centers.push_back(z);
    p.radii.push_back(std::max(hi - lo, 1.0));
    std::vector<double> off;
    for (int i : b) off.push_back(nuclei.positions[i] - z);
    p.offsets.push_back(std::move(off));
  }
  p.separations.assign(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) p.separations[i][j] = std::abs(p.centers[i] - p.centers[j]);
  return p;
}

std::vector<int> ClusterDecomposition::occupation() const {
  std::vector<int> occ(partition.blocks.size(), 0);
  for (int c : electron_cluster) ++occ.at(c);
  return occ;
}

std::vector<int> ClusterDecomposition::electrons_of(int cluster) const {
  std::vector<int> out;
  for (int l = 0; l < electron_count(); ++l)
    if (electron_cluster[l] == cluster) out.push_back(l);
  return out;
}

ClusterDecomposition decomposition_from_occupation(const NuclearPartition& partition,
                                                   const std::vector<int>& occupation) {
  if (static_cast<int>(occupation.size()) != partition.size())
    throw ValidationError("occupation length must equal the number of clusters");
  ClusterDecomposition d;
  d.partition = partition;
  for (int j = 0; j < partition.size(); ++j) {
    if (occupation[j] < 0) throw ValidationError("negative occupation");
    for (int e = 0; e < occupation[j]; ++e) d.electron_cluster.push_back(j);
  }
  return d;
}

}  // namespace bosegap
