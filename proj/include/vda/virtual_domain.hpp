#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "vda/errors.hpp"
#include "vda/models.hpp"
#include "vda/types.hpp"

namespace vda {

enum class DistanceMetric { squared_euclidean, cosine_distance };

inline std::string to_string(DistanceMetric m) {
  return m == DistanceMetric::squared_euclidean ? "squared_euclidean" : "cosine_distance";
}

inline DistanceMetric distance_metric_from_string(const std::string& s) {
  if (s == "squared_euclidean") return DistanceMetric::squared_euclidean;
  if (s == "cosine_distance") return DistanceMetric::cosine_distance;
  throw ConfigError("unknown distance metric: " + s);
}

/// Gaussian mixture standing in for the unseen source feature distribution:
/// one component per class, centered on the normalized classifier row,
/// equal weights, shared isotropic variance.
template <typename Scalar>
struct VirtualDomainGMM {
  Matrix<Scalar> prototypes;  // K x d, unit rows
  Scalar sigma_sq = Scalar(0);
  Scalar lambda = Scalar(6);
  Vector<Scalar> mixing;      // uniform 1/K
  DistanceMetric metric = DistanceMetric::squared_euclidean;

  Index num_components() const { return prototypes.rows(); }
  Index dim() const { return prototypes.cols(); }
};

template <typename Scalar>
void validate_gmm(const VirtualDomainGMM<Scalar>& gmm) {
  if (gmm.num_components() < 2) throw ShapeError("mixture needs >= 2 components");
  for (Index k = 0; k < gmm.num_components(); ++k)
    if (std::abs(double(gmm.prototypes.row(k).norm()) - 1.0) > 1e-6)
      throw ValueError("prototype row " + std::to_string(k) + " is not unit length");
  if (!(gmm.sigma_sq > Scalar(0))) throw ValueError("variance must be positive");
  if (gmm.mixing.size() != gmm.num_components())
    throw ShapeError("mixing vector length does not match component count");
  Scalar sum = 0;
  for (Index k = 0; k < gmm.mixing.size(); ++k) {
    if (!(gmm.mixing(k) >= Scalar(0))) throw ValueError("negative mixing weight");
    sum += gmm.mixing(k);
  }
  if (std::abs(double(sum) - 1.0) > 1e-6)
    throw ValueError("mixing weights must sum to 1");
}

/// Row-normalizes the classifier weights into unit-length class prototypes.
template <typename Scalar>
Matrix<Scalar> extract_prototypes(const Matrix<Scalar>& classifier_weights) {
  if (classifier_weights.rows() < 2)
    throw ShapeError("need at least two classifier rows");
  for (Index k = 0; k < classifier_weights.rows(); ++k) {
    if (classifier_weights.row(k).norm() <= Scalar(1e-12))
      throw DegenerateError("classifier row " + std::to_string(k) +
                            " is numerically zero and has no direction");
  }
  return l2_normalize_rows(classifier_weights);
}

template <typename Scalar>
Scalar prototype_distance(const Matrix<Scalar>& prototypes, Index m, Index n,
                          DistanceMetric metric) {
  if (metric == DistanceMetric::squared_euclidean)
    return (prototypes.row(m) - prototypes.row(n)).squaredNorm();
  // Rows are unit length, so cosine distance is 1 - dot.
  return Scalar(1) - prototypes.row(m).dot(prototypes.row(n));
}

/// Shared variance from prototype spacing: the smallest pairwise distance
/// divided by the spread factor lambda.
template <typename Scalar>
Scalar estimate_sigma_sq(const Matrix<Scalar>& prototypes, Scalar lambda,
                         DistanceMetric metric) {
  if (!(lambda > Scalar(0))) throw ParameterError("lambda must be positive");
  if (prototypes.rows() < 2)
    throw ShapeError("need at least two prototypes to measure spacing");
  Scalar min_dist = std::numeric_limits<Scalar>::infinity();
  for (Index m = 0; m < prototypes.rows(); ++m)
    for (Index n = m + 1; n < prototypes.rows(); ++n)
      min_dist = std::min(min_dist, prototype_distance(prototypes, m, n, metric));
  if (min_dist <= Scalar(1e-12))
    throw DegenerateError(
        "two class prototypes coincide; prototype spacing is zero");
  return min_dist / lambda;
}

template <typename Scalar>
VirtualDomainGMM<Scalar> build_virtual_domain(
    const ModelBundle<Scalar>& bundle, Scalar lambda = Scalar(6),
    DistanceMetric metric = DistanceMetric::squared_euclidean) {
  VirtualDomainGMM<Scalar> gmm;
  gmm.prototypes = extract_prototypes(bundle.classifier);
  gmm.lambda = lambda;
  gmm.metric = metric;
  gmm.sigma_sq = estimate_sigma_sq(gmm.prototypes, lambda, metric);
  gmm.mixing = Vector<Scalar>::Constant(gmm.num_components(),
                                        Scalar(1) / Scalar(gmm.num_components()));
  return gmm;
}

/// Draws n feature-space samples with round-robin component labels
/// (sample i comes from component i mod K).
template <typename Scalar>
std::pair<Matrix<Scalar>, Eigen::VectorXi> sample_virtual_batch(
    const VirtualDomainGMM<Scalar>& gmm, Index n, Rng& rng) {
  if (n < 1) throw ParameterError("sample count must be positive");
  if (gmm.sigma_sq < Scalar(0)) throw ParameterError("negative variance");
  const Index k_comps = gmm.num_components();
  Matrix<Scalar> samples(n, gmm.dim());
  Eigen::VectorXi labels(n);
  std::normal_distribution<Scalar> unit(Scalar(0), Scalar(1));
  const Scalar sigma = std::sqrt(gmm.sigma_sq);
  for (Index i = 0; i < n; ++i) {
    const Index k = i % k_comps;
    labels(i) = static_cast<int>(k);
    for (Index j = 0; j < gmm.dim(); ++j)
      samples(i, j) = gmm.prototypes(k, j) + sigma * unit(rng);
  }
  return {std::move(samples), std::move(labels)};
}

/// Log density of the equal-weight isotropic mixture at each row of x.
template <typename Scalar>
Vector<Scalar> gmm_log_density(const VirtualDomainGMM<Scalar>& gmm,
                               const Matrix<Scalar>& x) {
  if (x.cols() != gmm.dim())
    throw ShapeError("query dimension does not match the mixture");
  if (!(gmm.sigma_sq > Scalar(0)))
    throw ParameterError("density needs a positive variance");
  const Index k_comps = gmm.num_components();
  if (gmm.mixing.size() != k_comps)
    throw ShapeError("mixing vector length does not match component count");
  const Scalar d = Scalar(gmm.dim());
  const Scalar log_norm =
      -d / Scalar(2) * std::log(Scalar(2) * Scalar(EIGEN_PI) * gmm.sigma_sq);
  Matrix<Scalar> log_terms(x.rows(), k_comps);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index k = 0; k < k_comps; ++k) {
      Scalar sq = (x.row(i) - gmm.prototypes.row(k)).squaredNorm();
      log_terms(i, k) =
          std::log(gmm.mixing(k)) + log_norm - sq / (Scalar(2) * gmm.sigma_sq);
    }
  return logsumexp_rows(log_terms);
}

/// Plain-text export: a header line, then one prototype per line.
template <typename Scalar>
void write_gmm(const std::filesystem::path& path,
               const VirtualDomainGMM<Scalar>& gmm) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "gmm 1 components " << gmm.num_components() << " dim " << gmm.dim()
      << " sigma_sq " << fmt(double(gmm.sigma_sq)) << " lambda "
      << fmt(double(gmm.lambda)) << " metric " << to_string(gmm.metric) << "\n";
  for (Index k = 0; k < gmm.num_components(); ++k) {
    for (Index j = 0; j < gmm.dim(); ++j) {
      if (j) out << " ";
      out << fmt(double(gmm.prototypes(k, j)));
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename Scalar>
VirtualDomainGMM<Scalar> read_gmm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw ParseError("empty gmm file", 1);
  std::istringstream hs(header);
  std::string tag, kw_comp, kw_dim, kw_sig, kw_lam, kw_met, metric;
  int version = 0;
  long long comps = 0, dim = 0;
  double sigma_sq = 0, lambda = 0;
  hs >> tag >> version >> kw_comp >> comps >> kw_dim >> dim >> kw_sig >>
      sigma_sq >> kw_lam >> lambda >> kw_met >> metric;
  if (!hs || tag != "gmm" || version != 1 || kw_comp != "components" ||
      kw_dim != "dim" || kw_sig != "sigma_sq" || kw_lam != "lambda" ||
      kw_met != "metric")
    throw ParseError("malformed gmm header", 1);
  if (comps < 2 || dim < 1) throw SchemaError("gmm shape out of range");

  VirtualDomainGMM<Scalar> gmm;
  gmm.sigma_sq = Scalar(sigma_sq);
  gmm.lambda = Scalar(lambda);
  gmm.metric = distance_metric_from_string(metric);
  gmm.mixing = Vector<Scalar>::Constant(comps, Scalar(1) / Scalar(comps));
  gmm.prototypes.resize(comps, dim);
  std::string line;
  for (long long k = 0; k < comps; ++k) {
    if (!std::getline(in, line))
      throw ParseError("gmm file ends before prototype " + std::to_string(k),
                       k + 2);
    std::istringstream ls(line);
    for (long long j = 0; j < dim; ++j) {
      double v;
      if (!(ls >> v))
        throw ParseError("bad prototype row " + std::to_string(k), k + 2);
      gmm.prototypes(k, j) = Scalar(v);
    }
    double extra;
    if (ls >> extra)
      throw ParseError("too many values in prototype row " + std::to_string(k),
                       k + 2);
  }
  return gmm;
}

}  // namespace vda
