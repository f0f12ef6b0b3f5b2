#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vda/types.hpp"

namespace vda {

/// A set of input vectors with optional integer labels and a domain tag.
struct DomainDataset {
  Matrix<double> inputs;                        // N x input_dim
  std::optional<Eigen::VectorXi> labels;        // values in [0, K)
  std::string domain_tag;
  std::uint64_t seed = 0;

  Index size() const { return inputs.rows(); }
  Index dim() const { return inputs.cols(); }
};

enum class ShiftFamily { blobs, moons };

/// Parameters of a synthetic source/target pair with a controlled shift.
struct ShiftSpec {
  ShiftFamily family = ShiftFamily::blobs;
  int num_classes = 4;
  Index samples_per_class = 500;
  Index input_dim = 2;
  double rotation_degrees = 0.0;
  Vector<double> translation;  // empty means zero
  double scale = 1.0;
  double noise_std = 0.3;
  std::uint64_t seed = 0;
};

/// Class means for the blobs family: all classes share one in-plane offset
/// in the first two coordinates (the first K-1 on a small ring around it,
/// the last at its center), and each class k additionally gets a bump in
/// coordinate 2+k when that coordinate exists. Means are rescaled so the
/// minimum pairwise separation is at least 6 * noise_std. Rows are classes.
Matrix<double> blob_class_means(const ShiftSpec& spec);

/// Source blobs are isotropic Gaussians at the class means; the target is
/// drawn around the same means after rotating the first two coordinates,
/// scaling, and translating. Both sides carry labels (target labels are
/// for evaluation only).
std::pair<DomainDataset, DomainDataset> make_blobs_pair(const ShiftSpec& spec);

/// Interleaving two-moons source; the target reuses the same curve
/// parameters transformed by rotation/scale/translation, with independent
/// noise. Requires num_classes == 2 and input_dim == 2.
std::pair<DomainDataset, DomainDataset> make_moons_pair(const ShiftSpec& spec);

/// Dispatches on spec.family.
std::pair<DomainDataset, DomainDataset> make_shift_pair(const ShiftSpec& spec);

/// Expected layout of a tabular file. Unset fields are inferred/unchecked.
struct TabularSchema {
  std::optional<Index> feature_dim;
  std::optional<int> num_classes;  // validates label range when set
};

/// Comma-separated text, header row `f0,...,f{d-1}[,label]`, one sample
/// per line. Values are written with 17 significant digits so a
/// write/read round trip reproduces doubles exactly.
DomainDataset load_tabular(const std::filesystem::path& path,
                           const TabularSchema& schema = {});
void save_tabular(const std::filesystem::path& path, const DomainDataset& data);

/// A seeded permutation of [0, n) split into consecutive batches; the
/// final partial batch is kept. Identical seed gives an identical sequence.
std::vector<std::vector<Index>> batch_indices(Index n, Index batch_size,
                                              std::uint64_t shuffle_seed);
std::vector<std::vector<Index>> batch_iterator(const DomainDataset& data,
                                               Index batch_size,
                                               std::uint64_t shuffle_seed);

}  // namespace vda
