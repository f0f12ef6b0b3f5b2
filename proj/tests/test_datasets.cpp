#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "test_util.hpp"
#include "vda/datasets.hpp"

using vda::Index;
using vda::Matrix;
using vda::Vector;

namespace {

vda::ShiftSpec base_spec() {
  vda::ShiftSpec spec;
  spec.family = vda::ShiftFamily::blobs;
  spec.num_classes = 3;
  spec.samples_per_class = 400;
  spec.input_dim = 2;
  spec.noise_std = 0.3;
  spec.seed = 11;
  return spec;
}

Matrix<double> per_class_means(const vda::DomainDataset& data, int k_classes) {
  Matrix<double> means = Matrix<double>::Zero(k_classes, data.dim());
  std::vector<Index> counts(k_classes, 0);
  for (Index i = 0; i < data.size(); ++i) {
    const int y = (*data.labels)(i);
    means.row(y) += data.inputs.row(i);
    ++counts[y];
  }
  for (int k = 0; k < k_classes; ++k) means.row(k) /= double(counts[k]);
  return means;
}

}  // namespace

TEST_CASE("blob pairs have exact counts and balanced labels") {
  auto spec = base_spec();
  auto [source, target] = vda::make_blobs_pair(spec);
  CHECK(source.size() == 1200);
  CHECK(target.size() == 1200);
  CHECK(source.dim() == 2);
  REQUIRE(source.labels.has_value());
  REQUIRE(target.labels.has_value());

  std::vector<int> counts(3, 0);
  for (Index i = 0; i < source.size(); ++i) ++counts[(*source.labels)(i)];
  for (int c : counts) CHECK(c == 400);
  CHECK(source.inputs.allFinite());
  CHECK(target.inputs.allFinite());
  CHECK(source.domain_tag != target.domain_tag);
}

TEST_CASE("identical specs generate bit-identical datasets") {
  auto spec = base_spec();
  auto [s1, t1] = vda::make_blobs_pair(spec);
  auto [s2, t2] = vda::make_blobs_pair(spec);
  CHECK(testutil::matrix_bits_equal(s1.inputs, s2.inputs));
  CHECK(testutil::matrix_bits_equal(t1.inputs, t2.inputs));
  CHECK(*s1.labels == *s2.labels);

  auto other = spec;
  other.seed = 999;
  auto [s3, t3] = vda::make_blobs_pair(other);
  (void)t3;
  CHECK_FALSE(testutil::matrix_bits_equal(s1.inputs, s3.inputs));
}

TEST_CASE("an identity transform leaves the domains aligned") {
  auto spec = base_spec();
  spec.rotation_degrees = 0.0;
  spec.scale = 1.0;
  auto [source, target] = vda::make_blobs_pair(spec);
  // Same distribution parameters: the per-class means agree up to noise.
  Matrix<double> ms = per_class_means(source, 3);
  Matrix<double> mt = per_class_means(target, 3);
  const double tol = 4.0 * spec.noise_std / std::sqrt(400.0);
  CHECK((ms - mt).cwiseAbs().maxCoeff() <= tol);
}

TEST_CASE("rotated targets have rotated class means") {
  auto spec = base_spec();
  spec.rotation_degrees = 90.0;
  auto [source, target] = vda::make_blobs_pair(spec);
  (void)source;

  Matrix<double> centers = vda::blob_class_means(spec);
  Matrix<double> mt = per_class_means(target, 3);
  const double tol = 4.0 * spec.noise_std / std::sqrt(400.0);
  for (int k = 0; k < 3; ++k) {
    // 90 degrees in the first two coordinates: (x, y) -> (-y, x).
    const double rx = -centers(k, 1);
    const double ry = centers(k, 0);
    CHECK(std::abs(mt(k, 0) - rx) <= tol);
    CHECK(std::abs(mt(k, 1) - ry) <= tol);
  }
}

TEST_CASE("translation and scale act after the rotation") {
  auto spec = base_spec();
  spec.num_classes = 2;
  spec.rotation_degrees = 0.0;
  spec.scale = 2.0;
  spec.translation = (Vector<double>(2) << 1.0, -3.0).finished();
  auto [source, target] = vda::make_blobs_pair(spec);
  (void)source;
  Matrix<double> centers = vda::blob_class_means(spec);
  Matrix<double> mt = per_class_means(target, 2);
  const double tol = 2.0 * 4.0 * spec.noise_std / std::sqrt(400.0);
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(mt(k, 0) - (2.0 * centers(k, 0) + 1.0)) <= tol);
    CHECK(std::abs(mt(k, 1) - (2.0 * centers(k, 1) - 3.0)) <= tol);
  }
}

TEST_CASE("class centers keep a learnable separation margin") {
  for (int k_classes : {2, 3, 4, 6}) {
    for (double noise : {0.3, 0.45, 1.0}) {
      vda::ShiftSpec spec;
      spec.num_classes = k_classes;
      spec.samples_per_class = 1;
      spec.input_dim = std::max(2, 2 + k_classes - 1);
      spec.noise_std = noise;
      Matrix<double> centers = vda::blob_class_means(spec);
      double min_dist = std::numeric_limits<double>::infinity();
      for (int m = 0; m < k_classes; ++m)
        for (int n = m + 1; n < k_classes; ++n)
          min_dist = std::min(min_dist,
                              (centers.row(m) - centers.row(n)).norm());
      CHECK(min_dist >= 6.0 * noise - 1e-9);
    }
  }
}

TEST_CASE("blob specs are validated") {
  auto spec = base_spec();
  spec.num_classes = 1;
  CHECK_THROWS_AS(vda::make_blobs_pair(spec), vda::ParameterError);

  spec = base_spec();
  spec.samples_per_class = 0;
  CHECK_THROWS_AS(vda::make_blobs_pair(spec), vda::ParameterError);

  spec = base_spec();
  spec.noise_std = 0.0;
  CHECK_THROWS_AS(vda::make_blobs_pair(spec), vda::ParameterError);

  spec = base_spec();
  spec.scale = -1.0;
  CHECK_THROWS_AS(vda::make_blobs_pair(spec), vda::ParameterError);

  spec = base_spec();
  spec.input_dim = 1;
  CHECK_THROWS_AS(vda::make_blobs_pair(spec), vda::ParameterError);

  spec = base_spec();
  spec.translation = Vector<double>::Constant(1, 1.0);  // wrong dimension
  CHECK_THROWS_AS(vda::make_blobs_pair(spec), vda::ParameterError);
}

TEST_CASE("moon pairs require two classes in the plane") {
  vda::ShiftSpec spec;
  spec.family = vda::ShiftFamily::moons;
  spec.num_classes = 3;
  spec.samples_per_class = 10;
  spec.input_dim = 2;
  CHECK_THROWS_AS(vda::make_moons_pair(spec), vda::UnsupportedError);
  spec.num_classes = 2;
  spec.input_dim = 4;
  CHECK_THROWS_AS(vda::make_moons_pair(spec), vda::UnsupportedError);
}

TEST_CASE("moon pairs rotate the shared curve") {
  vda::ShiftSpec spec;
  spec.family = vda::ShiftFamily::moons;
  spec.num_classes = 2;
  spec.samples_per_class = 600;
  spec.input_dim = 2;
  spec.noise_std = 0.15;
  spec.rotation_degrees = 30.0;
  spec.seed = 21;
  auto [source, target] = vda::make_moons_pair(spec);
  CHECK(source.size() == 1200);
  CHECK(target.size() == 1200);

  const double theta = 30.0 * std::numbers::pi / 180.0;
  Matrix<double> ms = per_class_means(source, 2);
  Matrix<double> mt = per_class_means(target, 2);
  const double tol = 6.0 * spec.noise_std / std::sqrt(600.0);
  for (int k = 0; k < 2; ++k) {
    const double rx = std::cos(theta) * ms(k, 0) - std::sin(theta) * ms(k, 1);
    const double ry = std::sin(theta) * ms(k, 0) + std::cos(theta) * ms(k, 1);
    CHECK(std::abs(mt(k, 0) - rx) <= tol);
    CHECK(std::abs(mt(k, 1) - ry) <= tol);
  }
}

TEST_CASE("moon pairs with no rotation share their geometry") {
  vda::ShiftSpec spec;
  spec.family = vda::ShiftFamily::moons;
  spec.num_classes = 2;
  spec.samples_per_class = 500;
  spec.input_dim = 2;
  spec.noise_std = 0.1;
  spec.rotation_degrees = 0.0;
  spec.seed = 5;
  auto [source, target] = vda::make_moons_pair(spec);
  Matrix<double> ms = per_class_means(source, 2);
  Matrix<double> mt = per_class_means(target, 2);
  const double tol = 6.0 * spec.noise_std / std::sqrt(500.0);
  CHECK((ms - mt).cwiseAbs().maxCoeff() <= tol);
}

TEST_CASE("the family dispatcher routes to the right generator") {
  vda::ShiftSpec spec;
  spec.family = vda::ShiftFamily::moons;
  spec.num_classes = 2;
  spec.samples_per_class = 50;
  spec.input_dim = 2;
  spec.seed = 3;
  auto [moons_src, moons_tgt] = vda::make_shift_pair(spec);
  auto [direct_src, direct_tgt] = vda::make_moons_pair(spec);
  CHECK(testutil::matrix_bits_equal(moons_src.inputs, direct_src.inputs));
  CHECK(testutil::matrix_bits_equal(moons_tgt.inputs, direct_tgt.inputs));

  spec.family = vda::ShiftFamily::blobs;
  auto [blob_src, blob_tgt] = vda::make_shift_pair(spec);
  (void)blob_tgt;
  auto [blob_direct, blob_direct_tgt] = vda::make_blobs_pair(spec);
  (void)blob_direct_tgt;
  CHECK(testutil::matrix_bits_equal(blob_src.inputs, blob_direct.inputs));
}

TEST_CASE("hand-written tables parse exactly") {
  testutil::TempDir dir;
  const auto path = dir.path / "tiny.csv";
  {
    std::ofstream out(path);
    out << "f0,f1,label\n";
    out << "1.5,-2.25,0\n";
    out << "0.125,3,1\n";
    out << "-0.5,0.75,0\n";
  }
  vda::TabularSchema schema;
  schema.num_classes = 2;
  auto data = vda::load_tabular(path, schema);
  REQUIRE(data.size() == 3);
  REQUIRE(data.labels.has_value());
  CHECK(data.inputs(0, 0) == 1.5);
  CHECK(data.inputs(0, 1) == -2.25);
  CHECK(data.inputs(1, 0) == 0.125);
  CHECK(data.inputs(1, 1) == 3.0);
  CHECK(data.inputs(2, 0) == -0.5);
  CHECK(data.inputs(2, 1) == 0.75);
  CHECK((*data.labels)(0) == 0);
  CHECK((*data.labels)(1) == 1);
  CHECK((*data.labels)(2) == 0);
}

TEST_CASE("tables without a label column load unlabeled") {
  testutil::TempDir dir;
  const auto path = dir.path / "unlabeled.csv";
  {
    std::ofstream out(path);
    out << "f0,f1,f2\n";
    out << "1,2,3\n";
    out << "4,5,6\n";
  }
  vda::TabularSchema schema;
  auto data = vda::load_tabular(path, schema);
  CHECK(data.size() == 2);
  CHECK(data.dim() == 3);
  CHECK_FALSE(data.labels.has_value());
}

TEST_CASE("tables round-trip generated data losslessly") {
  auto spec = base_spec();
  spec.samples_per_class = 40;
  auto [source, target] = vda::make_blobs_pair(spec);
  (void)target;

  testutil::TempDir dir;
  const auto path = dir.path / "roundtrip.csv";
  vda::save_tabular(path, source);
  vda::TabularSchema schema;
  schema.num_classes = 3;
  auto loaded = vda::load_tabular(path, schema);
  CHECK(testutil::matrix_bits_equal(loaded.inputs, source.inputs));
  CHECK(*loaded.labels == *source.labels);
}

TEST_CASE("carriage returns and trailing blank lines are tolerated") {
  testutil::TempDir dir;
  const auto path = dir.path / "crlf.csv";
  {
    std::ofstream out(path);
    out << "f0,f1\r\n";
    out << "1,2\r\n";
    out << "3,4\r\n";
    out << "\n";
  }
  vda::TabularSchema schema;
  auto data = vda::load_tabular(path, schema);
  CHECK(data.size() == 2);
  CHECK(data.inputs(1, 1) == 4.0);
}

TEST_CASE("malformed tables raise parse errors with line numbers") {
  testutil::TempDir dir;
  vda::TabularSchema schema;
  schema.num_classes = 2;

  const auto bad_header = dir.path / "bad_header.csv";
  {
    std::ofstream out(bad_header);
    out << "x,y\n1,2\n";
  }
  CHECK_THROWS_AS(vda::load_tabular(bad_header, schema), vda::ParseError);

  const auto bad_value = dir.path / "bad_value.csv";
  {
    std::ofstream out(bad_value);
    out << "f0,f1,label\n";
    out << "1,2,0\n";
    out << "1,zebra,1\n";
  }
  try {
    vda::load_tabular(bad_value, schema);
    FAIL("expected a parse error");
  } catch (const vda::ParseError& e) {
    CHECK(e.line == 3);  // 1-based line of the offending row
  }

  const auto missing_field = dir.path / "missing_field.csv";
  {
    std::ofstream out(missing_field);
    out << "f0,f1,label\n";
    out << "1,0\n";
  }
  CHECK_THROWS_AS(vda::load_tabular(missing_field, schema), vda::ParseError);

  const auto bad_label = dir.path / "bad_label.csv";
  {
    std::ofstream out(bad_label);
    out << "f0,f1,label\n";
    out << "1,2,5\n";
  }
  CHECK_THROWS_AS(vda::load_tabular(bad_label, schema), vda::SchemaError);

  CHECK_THROWS_AS(vda::load_tabular(dir.path / "missing.csv", schema),
                  vda::IoError);
}

TEST_CASE("batch index sequences partition the dataset") {
  auto batches = vda::batch_indices(50, 16, 7);
  CHECK(batches.size() == 4);
  CHECK(batches[0].size() == 16);
  CHECK(batches[3].size() == 2);  // partial final batch kept

  std::set<Index> seen;
  for (const auto& batch : batches)
    for (Index i : batch) {
      CHECK(seen.insert(i).second);  // no duplicates
      CHECK(i >= 0);
      CHECK(i < 50);
    }
  CHECK(seen.size() == 50);

  // Oversized batches collapse to a single batch.
  auto one = vda::batch_indices(10, 64, 3);
  CHECK(one.size() == 1);
  CHECK(one[0].size() == 10);

  // Determinism and seed sensitivity.
  CHECK(vda::batch_indices(50, 16, 7) == batches);
  CHECK(vda::batch_indices(50, 16, 8) != batches);

  CHECK_THROWS_AS(vda::batch_indices(0, 4, 1), vda::ParameterError);
  CHECK_THROWS_AS(vda::batch_indices(4, 0, 1), vda::ParameterError);
}

TEST_CASE("the dataset-level batch iterator mirrors the index helper") {
  auto spec = base_spec();
  spec.samples_per_class = 20;
  auto [source, target] = vda::make_blobs_pair(spec);
  (void)target;
  auto via_data = vda::batch_iterator(source, 8, 15);
  auto via_n = vda::batch_indices(source.size(), 8, 15);
  CHECK(via_data == via_n);
}
