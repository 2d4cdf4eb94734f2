#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace disdca {

enum class Variant { naive, practical, orthogonal };

// Sparse feature vector, indices strictly increasing.
struct SparseVector {
  std::vector<std::uint32_t> idx;
  std::vector<double> val;

  std::size_t nnz() const { return idx.size(); }

  double norm_sq() const {
    double s = 0;
    for (double v : val) s += v * v;
    return s;
  }

  double dot(std::span<const double> dense) const {
    double s = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) s += val[k] * dense[idx[k]];
    return s;
  }

  // dense += c * this
  void axpy(double c, std::span<double> dense) const {
    for (std::size_t k = 0; k < idx.size(); ++k) dense[idx[k]] += c * val[k];
  }

  void scale(double c) {
    for (double& v : val) v *= c;
  }
};

inline double sparse_dot(const SparseVector& a, const SparseVector& b) {
  double s = 0;
  std::size_t i = 0, j = 0;
  while (i < a.idx.size() && j < b.idx.size()) {
    if (a.idx[i] == b.idx[j]) {
      s += a.val[i] * b.val[j];
      ++i;
      ++j;
    } else if (a.idx[i] < b.idx[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

inline double dense_norm_sq(std::span<const double> a) {
  double s = 0;
  for (double v : a) s += v * v;
  return s;
}

inline double dense_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace disdca
