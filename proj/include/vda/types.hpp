#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace vda {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// Derives an independent child seed from a base seed and a salt
/// (splitmix64 mixing), so nested phases get decorrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Row-wise L2 normalization. Rows with norm below `floor` are divided
/// by `floor` instead of their norm.
template <typename Scalar>
Matrix<Scalar> l2_normalize_rows(const Matrix<Scalar>& x,
                                 Scalar floor = Scalar(1e-12)) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar n = x.row(i).norm();
    out.row(i) = x.row(i) / std::max(n, floor);
  }
  return out;
}

/// Row-wise log(sum(exp(x))) with max subtraction.
template <typename Scalar>
Vector<Scalar> logsumexp_rows(const Matrix<Scalar>& x) {
  Vector<Scalar> m = x.rowwise().maxCoeff();
  Vector<Scalar> out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    out(i) = m(i) + std::log((x.row(i).array() - m(i)).exp().sum());
  }
  return out;
}

}  // namespace vda
