#include "bosegap/symmetry.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "bosegap/error.hpp"
#include "bosegap/kernels.hpp"

namespace bosegap {

Permutation::Permutation(std::vector<int> image) : image_(std::move(image)) {
  std::vector<int> seen(image_.size(), 0);
  for (int v : image_) {
    if (v < 0 || v >= size() || seen[v]++) throw std::invalid_argument("not a permutation");
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return Permutation(std::move(v));
}

Permutation Permutation::transposition(int n, int a, int b) {
  Permutation p = identity(n);
  std::swap(p.image_[a], p.image_[b]);
  return p;
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(image_.size());
  for (int p = 0; p < size(); ++p) inv[image_[p]] = p;
  return Permutation(std::move(inv));
}

int Permutation::sign() const {
  int s = 1;
  std::vector<bool> visited(image_.size(), false);
  for (int start = 0; start < size(); ++start) {
    if (visited[start]) continue;
    int len = 0;
    for (int p = start; !visited[p]; p = image_[p]) {
      visited[p] = true;
      ++len;
    }
    if (len % 2 == 0) s = -s;
  }
  return s;
}

std::vector<Permutation> all_permutations(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  std::vector<Permutation> out;
  do {
    out.emplace_back(v);
  } while (std::next_permutation(v.begin(), v.end()));
  return out;
}

Permutation compose(const Permutation& pi, const Permutation& sigma) {
  if (pi.size() != sigma.size()) throw std::invalid_argument("compose: size mismatch");
  std::vector<int> img(pi.size());
  for (int p = 0; p < pi.size(); ++p) img[p] = sigma(pi(p));
  return Permutation(std::move(img));
}

std::size_t TensorShape::size() const {
  std::size_t d = 1;
  for (int p = 0; p < particles; ++p) d *= static_cast<std::size_t>(points);
  return d;
}

void permute(std::span<const double> v, const Permutation& pi, const TensorShape& shape, std::span<double> out) {
  const std::size_t dim = shape.size();
  if (v.size() != dim || out.size() != dim || pi.size() != shape.particles)
    throw std::invalid_argument("permute: shape mismatch");
  const int N = shape.particles;
  const std::size_t n = static_cast<std::size_t>(shape.points);
  // out[i_1..i_N] = v[j] with j_q = i_{pi^-1(q)}: digit p of the output
  // lands at position pi(p) of the source index.
  std::vector<std::size_t> stride(N);
  for (int q = N - 1, s = 1; q >= 0; --q) {
    stride[q] = static_cast<std::size_t>(s);
    s *= static_cast<int>(n);
  }
  std::vector<std::size_t> src_stride(N);
  for (int p = 0; p < N; ++p) src_stride[p] = stride[pi(p)];
  if (N == 0) {
    out[0] = v[0];
    return;
  }
  // Innermost output axis runs contiguously in `out`.
  std::vector<std::size_t> digit(N, 0);
  const std::size_t inner = src_stride[N - 1];
  std::size_t base = 0;
  for (std::size_t i = 0; i < dim; i += n) {
    const double* src = v.data() + base;
    double* dst = out.data() + i;
    for (std::size_t t = 0; t < n; ++t) dst[t] = src[t * inner];
    for (int p = N - 2; p >= 0; --p) {
      base += src_stride[p];
      if (++digit[p] < n) break;
      base -= n * src_stride[p];
      digit[p] = 0;
    }
  }
}

Vector permute(std::span<const double> v, const Permutation& pi, const TensorShape& shape) {
  Vector out(v.size());
  permute(v, pi, shape, out);
  return out;
}

StatisticsProjector::StatisticsProjector(ProjectorKind kind, TensorShape shape, std::vector<Permutation> elements,
                                         bool signed_character)
    : kind_(kind), shape_(shape), elements_(std::move(elements)) {
  for (const auto& g : elements_) characters_.push_back(signed_character ? g.sign() : 1);
}

StatisticsProjector StatisticsProjector::symmetric(TensorShape shape) {
  return StatisticsProjector(ProjectorKind::symmetric, shape, all_permutations(shape.particles), false);
}

StatisticsProjector StatisticsProjector::antisymmetric(TensorShape shape) {
  return StatisticsProjector(ProjectorKind::antisymmetric, shape, all_permutations(shape.particles), true);
}

namespace {

std::vector<Permutation> group_preserving(int n, const std::vector<std::vector<int>>& groups) {
  std::vector<int> label(n, -1);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int p : groups[g]) {
      if (p < 0 || p >= n || label[p] != -1) throw std::invalid_argument("electron groups must be disjoint");
      label[p] = static_cast<int>(g);
    }
  // Ungrouped electrons stay fixed.
  std::vector<Permutation> out;
  for (const auto& pi : all_permutations(n)) {
    bool keep = true;
    for (int p = 0; p < n && keep; ++p) {
      if (label[p] == -1) keep = pi(p) == p;
      else keep = label[pi(p)] == label[p];
    }
    if (keep) out.push_back(pi);
  }
  return out;
}

}  // namespace

StatisticsProjector StatisticsProjector::cluster(TensorShape shape, const std::vector<std::vector<int>>& groups) {
  return StatisticsProjector(ProjectorKind::cluster, shape, group_preserving(shape.particles, groups), false);
}

StatisticsProjector StatisticsProjector::cluster_factor(TensorShape shape, const std::vector<int>& group) {
  return StatisticsProjector(ProjectorKind::cluster_factor, shape, group_preserving(shape.particles, {group}), false);
}

Vector StatisticsProjector::apply(std::span<const double> v) const {
  const std::size_t dim = shape_.size();
  if (v.size() != dim) throw std::invalid_argument("projector: shape mismatch");
  Vector acc(dim, 0.0), tmp(dim);
  const double w = 1.0 / static_cast<double>(elements_.size());
  for (std::size_t g = 0; g < elements_.size(); ++g) {
    permute(v, elements_[g], shape_, tmp);
    kernels::axpy(w * characters_[g], tmp, acc);
  }
  return acc;
}

void StatisticsProjector::project(std::span<double> v) const {
  const Vector r = apply(v);
  std::copy(r.begin(), r.end(), v.begin());
}

Vector project_statistics(std::span<const double> v, const StatisticsProjector& p) { return p.apply(v); }

Vector normalized_symmetrize(std::span<const double> v, const TensorShape& shape, double tolerance) {
  Vector s = StatisticsProjector::symmetric(shape).apply(v);
  const double ns = kernels::norm2(s);
  const double nv = kernels::norm2(v);
  if (!(ns > tolerance * std::max(nv, 1e-300))) throw SolverError("annihilated by symmetrizer");
  kernels::scale(1.0 / ns, s);
  return s;
}

std::unique_ptr<StatisticsProjector> projector_for(Statistics s, TensorShape shape) {
  if (shape.particles <= 1 && s != Statistics::fermionic) return nullptr;
  switch (s) {
    case Statistics::bosonic:
      return std::make_unique<StatisticsProjector>(StatisticsProjector::symmetric(shape));
    case Statistics::fermionic:
      return std::make_unique<StatisticsProjector>(StatisticsProjector::antisymmetric(shape));
    case Statistics::distinguishable:
      return nullptr;
  }
  return nullptr;
}

}  // namespace bosegap
