#include "vda/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "vda/errors.hpp"

namespace vda {

namespace {

void validate_shift_spec(const ShiftSpec& spec) {
  if (spec.num_classes < 2) throw ParameterError("num_classes must be >= 2");
  if (spec.samples_per_class < 1)
    throw ParameterError("samples_per_class must be >= 1");
  if (spec.noise_std <= 0.0) throw ParameterError("noise_std must be > 0");
  if (spec.scale <= 0.0) throw ParameterError("scale must be > 0");
  if (spec.translation.size() != 0 && spec.translation.size() != spec.input_dim)
    throw ParameterError("translation dimension does not match input_dim");
}

Vector<double> effective_translation(const ShiftSpec& spec) {
  if (spec.translation.size() == spec.input_dim) return spec.translation;
  return Vector<double>::Zero(spec.input_dim);
}

// Rotates the first two coordinates of each row by `degrees`, leaves the
// rest untouched, then applies scale and translation.
Matrix<double> apply_shift(const Matrix<double>& points, const ShiftSpec& spec) {
  const double theta = spec.rotation_degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  Matrix<double> out = points;
  for (Index i = 0; i < out.rows(); ++i) {
    double x = out(i, 0), y = out(i, 1);
    out(i, 0) = c * x - s * y;
    out(i, 1) = s * x + c * y;
  }
  out *= spec.scale;
  out.rowwise() += effective_translation(spec).transpose();
  return out;
}

Matrix<double> gaussian_noise(Index rows, Index cols, double std_dev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std_dev);
  Matrix<double> noise(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) noise(i, j) = dist(rng);
  return noise;
}

Eigen::VectorXi class_major_labels(int num_classes, Index per_class) {
  Eigen::VectorXi labels(num_classes * per_class);
  for (int k = 0; k < num_classes; ++k)
    labels.segment(k * per_class, per_class).setConstant(k);
  return labels;
}

}  // namespace

Matrix<double> blob_class_means(const ShiftSpec& spec) {
  const int k_classes = spec.num_classes;
  Matrix<double> means = Matrix<double>::Zero(k_classes, spec.input_dim);
  // All classes share one in-plane offset from the origin, so a rotation
  // about the origin displaces every class by nearly the same vector and
  // prediction errors spread evenly instead of concentrating on one class.
  // On top of the offset, the first K-1 classes sit on a small ring (gap
  // 2*pi/(K-1), wider than an even K-ring, so moderate rotations leave each
  // mean closest to its own pre-shift position) and the last class sits at
  // the ring's center, which rotation leaves in place. Class identity is
  // additionally encoded as a bump in one coordinate >= 2 per class; those
  // coordinates are untouched by the in-plane rotation, so the correct
  // class correspondence is preserved under any rotation angle.
  const double offset = 5.0;
  const double ring = 1.2;
  const double bump = 2.0;
  const double cx = offset * std::cos(std::numbers::pi / 4.0);
  const double cy = offset * std::sin(std::numbers::pi / 4.0);
  for (int k = 0; k < k_classes; ++k) {
    means(k, 0) = cx;
    means(k, 1) = cy;
    if (k < k_classes - 1) {
      double angle = 2.0 * std::numbers::pi * k / (k_classes - 1);
      means(k, 0) += ring * std::cos(angle);
      means(k, 1) += ring * std::sin(angle);
    }
    if (2 + k < spec.input_dim) means(k, 2 + k) = bump;
  }
  double min_dist = std::numeric_limits<double>::infinity();
  for (int m = 0; m < k_classes; ++m)
    for (int n = m + 1; n < k_classes; ++n)
      min_dist = std::min(min_dist, (means.row(m) - means.row(n)).norm());
  const double required = 6.0 * spec.noise_std;
  if (min_dist < required) means *= required / min_dist;
  return means;
}

std::pair<DomainDataset, DomainDataset> make_blobs_pair(const ShiftSpec& spec) {
  validate_shift_spec(spec);
  if (spec.family != ShiftFamily::blobs)
    throw ParameterError("make_blobs_pair called with a non-blobs spec");
  if (spec.input_dim < 2) throw ParameterError("blobs require input_dim >= 2");

  const Matrix<double> source_means = blob_class_means(spec);
  const Matrix<double> target_means = apply_shift(source_means, spec);

  const Index per_class = spec.samples_per_class;
  const Index n = spec.num_classes * per_class;
  Rng source_rng(derive_seed(spec.seed, 1));
  Rng target_rng(derive_seed(spec.seed, 2));

  DomainDataset source, target;
  source.inputs.resize(n, spec.input_dim);
  target.inputs.resize(n, spec.input_dim);
  for (int k = 0; k < spec.num_classes; ++k) {
    auto src_block = source.inputs.middleRows(k * per_class, per_class);
    src_block = gaussian_noise(per_class, spec.input_dim, spec.noise_std, source_rng);
    src_block.rowwise() += source_means.row(k);
    auto tgt_block = target.inputs.middleRows(k * per_class, per_class);
    tgt_block = gaussian_noise(per_class, spec.input_dim, spec.noise_std, target_rng);
    tgt_block.rowwise() += target_means.row(k);
  }
  source.labels = class_major_labels(spec.num_classes, per_class);
  target.labels = *source.labels;
  source.domain_tag = "blobs/source";
  target.domain_tag = "blobs/target";
  source.seed = spec.seed;
  target.seed = spec.seed;
  return {std::move(source), std::move(target)};
}

std::pair<DomainDataset, DomainDataset> make_moons_pair(const ShiftSpec& spec) {
  validate_shift_spec(spec);
  if (spec.num_classes != 2)
    throw UnsupportedError("moons require exactly 2 classes");
  if (spec.input_dim != 2) throw UnsupportedError("moons require input_dim == 2");

  const Index per_class = spec.samples_per_class;
  const Index n = 2 * per_class;

  // Both domains share the same curve parameters; only the noise draws
  // differ, so the target is the rotated source geometry.
  Rng curve_rng(derive_seed(spec.seed, 0));
  std::uniform_real_distribution<double> arc(0.0, std::numbers::pi);
  Matrix<double> curve(n, 2);
  for (Index i = 0; i < per_class; ++i) {
    double t = arc(curve_rng);
    curve(i, 0) = std::cos(t);
    curve(i, 1) = std::sin(t);
  }
  for (Index i = 0; i < per_class; ++i) {
    double t = arc(curve_rng);
    curve(per_class + i, 0) = 1.0 - std::cos(t);
    curve(per_class + i, 1) = 0.5 - std::sin(t);
  }

  Rng source_rng(derive_seed(spec.seed, 1));
  Rng target_rng(derive_seed(spec.seed, 2));
  DomainDataset source, target;
  source.inputs = curve + gaussian_noise(n, 2, spec.noise_std, source_rng);
  target.inputs =
      apply_shift(curve, spec) + gaussian_noise(n, 2, spec.noise_std, target_rng);
  source.labels = class_major_labels(2, per_class);
  target.labels = *source.labels;
  source.domain_tag = "moons/source";
  target.domain_tag = "moons/target";
  source.seed = spec.seed;
  target.seed = spec.seed;
  return {std::move(source), std::move(target)};
}

std::pair<DomainDataset, DomainDataset> make_shift_pair(const ShiftSpec& spec) {
  return spec.family == ShiftFamily::blobs ? make_blobs_pair(spec)
                                           : make_moons_pair(spec);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

DomainDataset load_tabular(const std::filesystem::path& path,
                           const TabularSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file: " + path.string(), 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto header = split_csv_line(line);
  bool has_label = !header.empty() && header.back() == "label";
  Index dim = static_cast<Index>(header.size()) - (has_label ? 1 : 0);
  if (dim < 1) throw ParseError("header has no feature columns", 1);
  for (Index j = 0; j < dim; ++j) {
    if (header[j] != "f" + std::to_string(j))
      throw ParseError("unexpected header column '" + header[j] + "'", 1);
  }
  if (schema.feature_dim && *schema.feature_dim != dim)
    throw SchemaError("expected " + std::to_string(*schema.feature_dim) +
                      " feature columns, file has " + std::to_string(dim));

  std::vector<double> values;
  std::vector<int> labels;
  long long line_no = 1;
  Index rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (static_cast<Index>(fields.size()) != dim + (has_label ? 1 : 0))
      throw ParseError("expected " + std::to_string(dim + (has_label ? 1 : 0)) +
                           " columns, got " + std::to_string(fields.size()),
                       line_no);
    for (Index j = 0; j < dim; ++j) {
      const std::string& f = fields[j];
      char* end = nullptr;
      double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size())
        throw ParseError("bad numeric value '" + f + "'", line_no);
      values.push_back(v);
    }
    if (has_label) {
      const std::string& f = fields[dim];
      char* end = nullptr;
      long v = std::strtol(f.c_str(), &end, 10);
      if (f.empty() || end != f.c_str() + f.size())
        throw ParseError("bad label value '" + f + "'", line_no);
      if (v < 0 || (schema.num_classes && v >= *schema.num_classes))
        throw SchemaError("label " + std::to_string(v) + " out of range at line " +
                          std::to_string(line_no));
      labels.push_back(static_cast<int>(v));
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("file has no data rows", line_no);

  DomainDataset data;
  data.inputs.resize(rows, dim);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < dim; ++j) data.inputs(i, j) = values[i * dim + j];
  if (has_label) {
    Eigen::VectorXi lab(rows);
    for (Index i = 0; i < rows; ++i) lab(i) = labels[i];
    data.labels = lab;
  }
  data.domain_tag = path.filename().string();
  return data;
}

void save_tabular(const std::filesystem::path& path, const DomainDataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const Index dim = data.dim();
  for (Index j = 0; j < dim; ++j) out << (j ? ",f" : "f") << j;
  if (data.labels) out << ",label";
  out << "\n";
  char buf[64];
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.inputs(i, j));
      if (j) out << ",";
      out << buf;
    }
    if (data.labels) out << "," << (*data.labels)(i);
    out << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::vector<Index>> batch_indices(Index n, Index batch_size,
                                              std::uint64_t shuffle_seed) {
  if (n < 1) throw ParameterError("batch_indices requires n >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index(0));
  Rng rng(shuffle_seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Index>> batches;
  for (Index start = 0; start < n; start += batch_size) {
    Index len = std::min(batch_size, n - start);
    batches.emplace_back(perm.begin() + start, perm.begin() + start + len);
  }
  return batches;
}

std::vector<std::vector<Index>> batch_iterator(const DomainDataset& data,
                                               Index batch_size,
                                               std::uint64_t shuffle_seed) {
  return batch_indices(data.size(), batch_size, shuffle_seed);
}

}  // namespace vda
