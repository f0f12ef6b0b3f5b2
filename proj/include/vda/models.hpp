#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vda/datasets.hpp"
#include "vda/errors.hpp"
#include "vda/optim.hpp"
#include "vda/types.hpp"

namespace vda {

/// Shapes of the feature extractor, classifier, and domain discriminator.
struct NetworkSpec {
  Index input_dim = 2;
  Index feature_dim = 2;
  std::vector<Index> hidden_widths;                    // extractor hidden layers
  int num_classes = 2;
  std::vector<Index> discriminator_widths{1024, 1024}; // output dim is fixed at 2

  /// With no hidden layers and input_dim == feature_dim the extractor is
  /// the identity map and has no parameters.
  bool identity_extractor() const {
    return hidden_widths.empty() && input_dim == feature_dim;
  }
};

inline void validate_spec(const NetworkSpec& spec) {
  if (spec.input_dim < 1) throw ParameterError("input_dim must be >= 1");
  if (spec.feature_dim < 1) throw ParameterError("feature_dim must be >= 1");
  if (spec.num_classes < 2) throw ParameterError("num_classes must be >= 2");
  for (Index w : spec.hidden_widths)
    if (w < 1) throw ParameterError("hidden widths must be >= 1");
  for (Index w : spec.discriminator_widths)
    if (w < 1) throw ParameterError("discriminator widths must be >= 1");
}

/// in -> out affine map; weight is out x in.
template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
};

/// A stack of dense layers with rectifier activations on all but the last
/// layer (the last layer is linear). An empty stack is the identity.
template <typename Scalar>
struct Mlp {
  std::vector<DenseLayer<Scalar>> layers;
};

template <typename Scalar>
Index mlp_param_count(const Mlp<Scalar>& mlp) {
  Index n = 0;
  for (const auto& l : mlp.layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename Scalar>
bool mlp_all_finite(const Mlp<Scalar>& mlp) {
  for (const auto& l : mlp.layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

/// Scaled uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
/// for both weights and biases, drawn in a fixed order.
template <typename Scalar>
Mlp<Scalar> init_mlp(const std::vector<Index>& dims, Rng& rng) {
  Mlp<Scalar> mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer<Scalar> layer;
    const Index in = dims[l], out = dims[l + 1];
    const Scalar bound = Scalar(1) / std::sqrt(Scalar(in));
    std::uniform_real_distribution<Scalar> dist(-bound, bound);
    layer.weight.resize(out, in);
    layer.bias.resize(out);
    for (Index i = 0; i < out; ++i)
      for (Index j = 0; j < in; ++j) layer.weight(i, j) = dist(rng);
    for (Index i = 0; i < out; ++i) layer.bias(i) = dist(rng);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

template <typename Scalar>
Matrix<Scalar> mlp_forward(const Mlp<Scalar>& mlp, const Matrix<Scalar>& x) {
  Matrix<Scalar> z = x;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    if (z.cols() != layer.weight.cols())
      throw ShapeError("mlp input has " + std::to_string(z.cols()) +
                       " columns, layer expects " +
                       std::to_string(layer.weight.cols()));
    Matrix<Scalar> a = z * layer.weight.transpose();
    a.rowwise() += layer.bias.transpose();
    z = (l + 1 < mlp.layers.size()) ? a.cwiseMax(Scalar(0)).eval() : a;
  }
  return z;
}

/// Activations recorded during a forward pass, for backpropagation.
template <typename Scalar>
struct MlpCache {
  Matrix<Scalar> input;
  std::vector<Matrix<Scalar>> pre;   // pre-activation per layer
  std::vector<Matrix<Scalar>> post;  // post-activation per layer
};

template <typename Scalar>
Matrix<Scalar> mlp_forward_cached(const Mlp<Scalar>& mlp, const Matrix<Scalar>& x,
                                  MlpCache<Scalar>& cache) {
  cache.input = x;
  cache.pre.clear();
  cache.post.clear();
  Matrix<Scalar> z = x;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    if (z.cols() != layer.weight.cols())
      throw ShapeError("mlp input has " + std::to_string(z.cols()) +
                       " columns, layer expects " +
                       std::to_string(layer.weight.cols()));
    Matrix<Scalar> a = z * layer.weight.transpose();
    a.rowwise() += layer.bias.transpose();
    cache.pre.push_back(a);
    z = (l + 1 < mlp.layers.size()) ? a.cwiseMax(Scalar(0)).eval() : a;
    cache.post.push_back(z);
  }
  return z;
}

template <typename Scalar>
struct MlpGrads {
  std::vector<Matrix<Scalar>> weight;
  std::vector<Vector<Scalar>> bias;
};

template <typename Scalar>
MlpGrads<Scalar> zero_grads_like(const Mlp<Scalar>& mlp) {
  MlpGrads<Scalar> g;
  for (const auto& l : mlp.layers) {
    g.weight.push_back(Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector<Scalar>::Zero(l.bias.size()));
  }
  return g;
}

/// Backpropagates `grad_output` (d loss / d output) through the stack.
/// Accumulates parameter gradients into `grads` when non-null and returns
/// d loss / d input.
template <typename Scalar>
Matrix<Scalar> mlp_backward(const Mlp<Scalar>& mlp, const MlpCache<Scalar>& cache,
                            const Matrix<Scalar>& grad_output,
                            MlpGrads<Scalar>* grads = nullptr) {
  const std::size_t n_layers = mlp.layers.size();
  if (n_layers == 0) return grad_output;  // identity stack
  Matrix<Scalar> delta = grad_output;     // d loss / d pre-activation
  for (std::size_t l = n_layers; l-- > 0;) {
    const Matrix<Scalar>& below =
        (l == 0) ? cache.input : cache.post[l - 1];
    if (grads) {
      grads->weight[l] += delta.transpose() * below;
      grads->bias[l] += delta.colwise().sum().transpose();
    }
    Matrix<Scalar> grad_below = delta * mlp.layers[l].weight;
    if (l > 0) {
      delta = grad_below.cwiseProduct(
          (cache.pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    } else {
      delta = grad_below;
    }
  }
  return delta;
}

template <typename Scalar>
LayerStackOptState<Scalar> zero_opt_state(const Mlp<Scalar>& mlp) {
  LayerStackOptState<Scalar> st;
  for (const auto& l : mlp.layers) {
    st.vel_weight.push_back(Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()));
    st.vel_bias.push_back(Vector<Scalar>::Zero(l.bias.size()));
  }
  return st;
}

template <typename Scalar>
void sgd_step(Mlp<Scalar>& mlp, const MlpGrads<Scalar>& grads,
              LayerStackOptState<Scalar>& state, Scalar lr,
              const SgdConfig<Scalar>& cfg) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    sgd_update(mlp.layers[l].weight, grads.weight[l], state.vel_weight[l], lr, cfg);
    sgd_update(mlp.layers[l].bias, grads.bias[l], state.vel_bias[l], lr, cfg);
  }
}

/// The feature extractor / classifier / discriminator decomposition.
/// The classifier is a bias-free linear map, so its rows double as class
/// prototypes.
template <typename Scalar>
struct ModelBundle {
  NetworkSpec spec;
  Mlp<Scalar> feature;          // extractor
  Matrix<Scalar> classifier;    // K x d weight matrix, no bias
  Mlp<Scalar> discriminator;    // d -> ... -> 2
};

inline std::vector<Index> feature_layer_dims(const NetworkSpec& spec) {
  if (spec.identity_extractor()) return {};
  std::vector<Index> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden_widths.begin(), spec.hidden_widths.end());
  dims.push_back(spec.feature_dim);
  return dims;
}

inline std::vector<Index> discriminator_layer_dims(const NetworkSpec& spec) {
  std::vector<Index> dims{spec.feature_dim};
  dims.insert(dims.end(), spec.discriminator_widths.begin(),
              spec.discriminator_widths.end());
  dims.push_back(2);
  return dims;
}

template <typename Scalar>
ModelBundle<Scalar> init_bundle(const NetworkSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  ModelBundle<Scalar> bundle;
  bundle.spec = spec;
  Rng rng(seed);
  bundle.feature = init_mlp<Scalar>(feature_layer_dims(spec), rng);
  const Scalar bound = Scalar(1) / std::sqrt(Scalar(spec.feature_dim));
  std::uniform_real_distribution<Scalar> dist(-bound, bound);
  bundle.classifier.resize(spec.num_classes, spec.feature_dim);
  for (Index i = 0; i < bundle.classifier.rows(); ++i)
    for (Index j = 0; j < bundle.classifier.cols(); ++j)
      bundle.classifier(i, j) = dist(rng);
  bundle.discriminator = init_mlp<Scalar>(discriminator_layer_dims(spec), rng);
  return bundle;
}

template <typename Scalar>
void validate_bundle(const ModelBundle<Scalar>& bundle) {
  validate_spec(bundle.spec);
  if (bundle.classifier.rows() != bundle.spec.num_classes ||
      bundle.classifier.cols() != bundle.spec.feature_dim)
    throw ShapeError("classifier weights are not K x d");
  if (!bundle.classifier.allFinite() || !mlp_all_finite(bundle.feature) ||
      !mlp_all_finite(bundle.discriminator))
    throw ValueError("bundle contains non-finite parameters");
}

template <typename Scalar>
Matrix<Scalar> forward_features(const ModelBundle<Scalar>& bundle,
                                const Matrix<Scalar>& x) {
  if (x.rows() < 1) throw ShapeError("empty input batch");
  if (x.cols() != bundle.spec.input_dim)
    throw ShapeError("input has " + std::to_string(x.cols()) +
                     " columns, expected " + std::to_string(bundle.spec.input_dim));
  return mlp_forward(bundle.feature, x);
}

template <typename Scalar>
Matrix<Scalar> classify(const ModelBundle<Scalar>& bundle,
                        const Matrix<Scalar>& features) {
  if (features.cols() != bundle.spec.feature_dim)
    throw ShapeError("features have " + std::to_string(features.cols()) +
                     " columns, expected " +
                     std::to_string(bundle.spec.feature_dim));
  return features * bundle.classifier.transpose();
}

/// Row-wise softmax with max subtraction.
template <typename Scalar>
Matrix<Scalar> softmax_probs(const Matrix<Scalar>& logits) {
  if (!logits.allFinite()) throw ValueError("softmax input is not finite");
  Matrix<Scalar> probs(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    Scalar m = logits.row(i).maxCoeff();
    Eigen::Array<Scalar, 1, Eigen::Dynamic> e =
        (logits.row(i).array() - m).exp();
    probs.row(i) = e / e.sum();
  }
  return probs;
}

template <typename Scalar>
Eigen::VectorXi predict_labels(const Matrix<Scalar>& logits) {
  Eigen::VectorXi labels(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) {
    Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    labels(i) = static_cast<int>(arg);
  }
  return labels;
}

/// Mean negative log-likelihood of the true labels under the row softmax.
template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, const Eigen::VectorXi& labels) {
  if (logits.rows() != labels.size())
    throw ShapeError("logits and labels disagree on batch size");
  Vector<Scalar> lse = logsumexp_rows(logits);
  Scalar total = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    int y = labels(i);
    if (y < 0 || y >= logits.cols())
      throw ValueError("label " + std::to_string(y) + " out of range");
    total += lse(i) - logits(i, y);
  }
  return total / Scalar(logits.rows());
}

/// d cross_entropy / d logits = (softmax - onehot) / N.
template <typename Scalar>
Matrix<Scalar> cross_entropy_grad_logits(const Matrix<Scalar>& logits,
                                         const Eigen::VectorXi& labels) {
  Matrix<Scalar> grad = softmax_probs(logits);
  const Scalar inv_n = Scalar(1) / Scalar(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) grad(i, labels(i)) -= Scalar(1);
  return grad * inv_n;
}

struct PretrainOptions {
  double eta0 = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  Index batch_size = 32;
  Index epochs = 100;
  double extractor_lr_factor = 0.1;
  std::uint64_t seed = 0;
};

/// Trains the extractor and classifier on labeled source data with SGD
/// and cross-entropy; the discriminator is freshly initialized and left
/// untouched. Deterministic given the seed.
template <typename Scalar>
ModelBundle<Scalar> pretrain_source(const DomainDataset& source,
                                    const NetworkSpec& spec,
                                    const PretrainOptions& opt) {
  validate_spec(spec);
  if (!source.labels) throw ValueError("source dataset has no labels");
  if (source.size() < 1) throw ShapeError("source dataset is empty");
  if (source.dim() != spec.input_dim)
    throw ShapeError("source input_dim does not match network spec");
  std::vector<Index> counts(spec.num_classes, 0);
  for (Index i = 0; i < source.size(); ++i) {
    int y = (*source.labels)(i);
    if (y < 0 || y >= spec.num_classes)
      throw ValueError("label " + std::to_string(y) + " out of range");
    ++counts[y];
  }
  for (int k = 0; k < spec.num_classes; ++k)
    if (counts[k] == 0)
      throw DegenerateError("class " + std::to_string(k) +
                            " has no samples in the source dataset");

  ModelBundle<Scalar> bundle = init_bundle<Scalar>(spec, opt.seed);
  if (opt.epochs == 0) return bundle;

  const Matrix<Scalar> inputs = source.inputs.template cast<Scalar>();
  const SgdConfig<Scalar> sgd{Scalar(opt.momentum), Scalar(opt.weight_decay)};
  LayerStackOptState<Scalar> feat_state = zero_opt_state(bundle.feature);
  Matrix<Scalar> cls_vel =
      Matrix<Scalar>::Zero(bundle.classifier.rows(), bundle.classifier.cols());

  const Index n_batches =
      (source.size() + opt.batch_size - 1) / opt.batch_size;
  const long long total_iters = static_cast<long long>(opt.epochs) * n_batches;
  long long iter = 0;
  for (Index epoch = 0; epoch < opt.epochs; ++epoch) {
    auto batches =
        batch_indices(source.size(), opt.batch_size, derive_seed(opt.seed, epoch));
    for (const auto& batch : batches) {
      const double p = double(iter) / double(total_iters);
      const Scalar eta = Scalar(lr_schedule(opt.eta0, p));

      Matrix<Scalar> xb(batch.size(), inputs.cols());
      Eigen::VectorXi yb(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) {
        xb.row(i) = inputs.row(batch[i]);
        yb(i) = (*source.labels)(batch[i]);
      }

      MlpCache<Scalar> cache;
      Matrix<Scalar> feats = mlp_forward_cached(bundle.feature, xb, cache);
      Matrix<Scalar> logits = feats * bundle.classifier.transpose();
      Scalar loss = cross_entropy(logits, yb);
      if (!std::isfinite(double(loss)))
        throw DivergenceError("non-finite pretraining loss", iter, double(loss));

      Matrix<Scalar> dlogits = cross_entropy_grad_logits(logits, yb);
      Matrix<Scalar> dcls = dlogits.transpose() * feats;
      Matrix<Scalar> dfeats = dlogits * bundle.classifier;
      MlpGrads<Scalar> fgrads = zero_grads_like(bundle.feature);
      mlp_backward(bundle.feature, cache, dfeats, &fgrads);

      sgd_update(bundle.classifier, dcls, cls_vel, eta, sgd);
      sgd_step(bundle.feature, fgrads, feat_state,
               Scalar(opt.extractor_lr_factor) * eta, sgd);
      ++iter;
    }
  }
  return bundle;
}

/// Per-class and average accuracy. Classes absent from the evaluation set
/// are flagged and excluded from the average.
struct EvalResult {
  std::vector<double> per_class_accuracy;  // NaN where absent
  std::vector<bool> class_present;
  std::vector<Index> class_counts;
  double average_accuracy = 0.0;
};

template <typename Scalar>
EvalResult evaluate(const ModelBundle<Scalar>& bundle, const DomainDataset& data) {
  if (!data.labels) throw ValueError("evaluation dataset has no labels");
  const int k_classes = bundle.spec.num_classes;
  Matrix<Scalar> feats =
      forward_features(bundle, Matrix<Scalar>(data.inputs.template cast<Scalar>()));
  Eigen::VectorXi pred = predict_labels(Matrix<Scalar>(classify(bundle, feats)));

  EvalResult result;
  result.class_counts.assign(k_classes, 0);
  std::vector<Index> correct(k_classes, 0);
  for (Index i = 0; i < data.size(); ++i) {
    int y = (*data.labels)(i);
    if (y < 0 || y >= k_classes)
      throw ValueError("label " + std::to_string(y) + " out of range");
    ++result.class_counts[y];
    if (pred(i) == y) ++correct[y];
  }
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < k_classes; ++k) {
    bool has = result.class_counts[k] > 0;
    result.class_present.push_back(has);
    if (has) {
      double acc = double(correct[k]) / double(result.class_counts[k]);
      result.per_class_accuracy.push_back(acc);
      sum += acc;
      ++present;
    } else {
      result.per_class_accuracy.push_back(std::nan(""));
    }
  }
  result.average_accuracy = present ? sum / present : std::nan("");
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint archive: named arrays with shapes plus a metadata block.
// See README for the exact layout.

namespace detail {

template <typename Scalar>
nlohmann::json array_to_json(const Matrix<Scalar>& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(double(m(i, j)));
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

template <typename Scalar>
nlohmann::json array_to_json(const Vector<Scalar>& v) {
  nlohmann::json data = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) data.push_back(double(v(i)));
  return {{"shape", {v.size()}}, {"data", std::move(data)}};
}

template <typename Scalar>
Matrix<Scalar> matrix_from_json(const nlohmann::json& j, const std::string& name) {
  const auto& shape = j.at("shape");
  if (shape.size() != 2) throw SchemaError("array " + name + " is not 2-D");
  Index rows = shape[0].get<Index>(), cols = shape[1].get<Index>();
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != rows * cols)
    throw SchemaError("array " + name + " data length mismatch");
  Matrix<Scalar> m(rows, cols);
  Index idx = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j2 = 0; j2 < cols; ++j2) m(i, j2) = Scalar(data[idx++].get<double>());
  return m;
}

template <typename Scalar>
Vector<Scalar> vector_from_json(const nlohmann::json& j, const std::string& name) {
  const auto& shape = j.at("shape");
  if (shape.size() != 1) throw SchemaError("array " + name + " is not 1-D");
  Index n = shape[0].get<Index>();
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != n)
    throw SchemaError("array " + name + " data length mismatch");
  Vector<Scalar> v(n);
  for (Index i = 0; i < n; ++i) v(i) = Scalar(data[i].get<double>());
  return v;
}

}  // namespace detail

inline nlohmann::json network_spec_to_json(const NetworkSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"feature_dim", spec.feature_dim},
          {"hidden_widths", spec.hidden_widths},
          {"num_classes", spec.num_classes},
          {"discriminator_widths", spec.discriminator_widths}};
}

inline NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  spec.input_dim = j.at("input_dim").get<Index>();
  spec.feature_dim = j.at("feature_dim").get<Index>();
  spec.hidden_widths = j.at("hidden_widths").get<std::vector<Index>>();
  spec.num_classes = j.at("num_classes").get<int>();
  spec.discriminator_widths =
      j.at("discriminator_widths").get<std::vector<Index>>();
  return spec;
}

inline constexpr int kCheckpointSchemaVersion = 1;

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path,
                     const ModelBundle<Scalar>& bundle,
                     const std::string& config_hash, std::uint64_t seed) {
  nlohmann::json arrays;
  for (std::size_t l = 0; l < bundle.feature.layers.size(); ++l) {
    arrays["feature." + std::to_string(l) + ".weight"] =
        detail::array_to_json(bundle.feature.layers[l].weight);
    arrays["feature." + std::to_string(l) + ".bias"] =
        detail::array_to_json(bundle.feature.layers[l].bias);
  }
  arrays["classifier.weight"] = detail::array_to_json(bundle.classifier);
  for (std::size_t l = 0; l < bundle.discriminator.layers.size(); ++l) {
    arrays["discriminator." + std::to_string(l) + ".weight"] =
        detail::array_to_json(bundle.discriminator.layers[l].weight);
    arrays["discriminator." + std::to_string(l) + ".bias"] =
        detail::array_to_json(bundle.discriminator.layers[l].bias);
  }
  nlohmann::json doc{{"schema_version", kCheckpointSchemaVersion},
                     {"scalar", sizeof(Scalar) == 8 ? "float64" : "float32"},
                     {"network", network_spec_to_json(bundle.spec)},
                     {"config_hash", config_hash},
                     {"seed", seed},
                     {"arrays", std::move(arrays)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename Scalar>
struct Checkpoint {
  ModelBundle<Scalar> bundle;
  std::string config_hash;
  std::uint64_t seed = 0;
};

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint json: ") + e.what());
  }
  if (doc.value("schema_version", -1) != kCheckpointSchemaVersion)
    throw SchemaError("unsupported checkpoint schema version");

  Checkpoint<Scalar> ckpt;
  ckpt.bundle.spec = network_spec_from_json(doc.at("network"));
  validate_spec(ckpt.bundle.spec);
  ckpt.config_hash = doc.value("config_hash", "");
  ckpt.seed = doc.value("seed", std::uint64_t(0));

  const auto& arrays = doc.at("arrays");
  auto load_stack = [&](const std::string& prefix,
                        const std::vector<Index>& dims) {
    Mlp<Scalar> mlp;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      std::string wname = prefix + "." + std::to_string(l) + ".weight";
      std::string bname = prefix + "." + std::to_string(l) + ".bias";
      if (!arrays.contains(wname) || !arrays.contains(bname))
        throw SchemaError("checkpoint missing array " + wname);
      DenseLayer<Scalar> layer;
      layer.weight = detail::matrix_from_json<Scalar>(arrays.at(wname), wname);
      layer.bias = detail::vector_from_json<Scalar>(arrays.at(bname), bname);
      if (layer.weight.rows() != dims[l + 1] || layer.weight.cols() != dims[l] ||
          layer.bias.size() != dims[l + 1])
        throw SchemaError("array " + wname + " shape does not match spec");
      mlp.layers.push_back(std::move(layer));
    }
    return mlp;
  };
  ckpt.bundle.feature = load_stack("feature", feature_layer_dims(ckpt.bundle.spec));
  ckpt.bundle.classifier = detail::matrix_from_json<Scalar>(
      arrays.at("classifier.weight"), "classifier.weight");
  ckpt.bundle.discriminator =
      load_stack("discriminator", discriminator_layer_dims(ckpt.bundle.spec));
  validate_bundle(ckpt.bundle);
  return ckpt;
}

}  // namespace vda
