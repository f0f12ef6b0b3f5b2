#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "vda/diagnostics.hpp"
#include "vda/errors.hpp"
#include "vda/models.hpp"
#include "vda/optim.hpp"
#include "vda/types.hpp"
#include "vda/virtual_domain.hpp"

namespace vda {

/// Shannon entropy of each probability row, in nats, with 0*log(0) = 0.
template <typename Scalar>
Vector<Scalar> prediction_entropy(const Matrix<Scalar>& probs) {
  if (probs.cols() < 2) throw ShapeError("need at least two class columns");
  Vector<Scalar> h(probs.rows());
  for (Index i = 0; i < probs.rows(); ++i) {
    Scalar row_sum = 0, acc = 0;
    for (Index k = 0; k < probs.cols(); ++k) {
      Scalar p = probs(i, k);
      if (!(p >= Scalar(0)) || p > Scalar(1) + Scalar(1e-9))
        throw ValueError("probabilities must lie in [0, 1]");
      row_sum += p;
      if (p > Scalar(0)) acc -= p * std::log(p);
    }
    if (std::abs(double(row_sum) - 1.0) > 1e-6)
      throw ValueError("probability rows must sum to 1");
    h(i) = acc;
  }
  return h;
}

/// Per-sample certainty weights: entropy normalized by its maximum log K,
/// so a uniform prediction weighs 1 and a one-hot prediction weighs 0.
template <typename Scalar>
Vector<Scalar> uncertainty_weights(const Matrix<Scalar>& probs) {
  Vector<Scalar> alpha = prediction_entropy(probs);
  const Scalar log_k = std::log(Scalar(probs.cols()));
  for (Index i = 0; i < alpha.size(); ++i)
    alpha(i) = std::clamp(alpha(i) / log_k, Scalar(0), Scalar(1));
  return alpha;
}

// ---------------------------------------------------------------------------
// Alignment objectives. The discriminator emits two logits; its "virtual"
// probability is the softmax mass on column 1 (virtual = 1, target = 0).
// Log arguments are clamped below at 1e-12.

inline constexpr double kLogFloor = 1e-12;

template <typename Scalar>
void check_probability_outputs(const Vector<Scalar>& d) {
  for (Index i = 0; i < d.size(); ++i)
    if (!(d(i) >= Scalar(0)) || d(i) > Scalar(1))
      throw ValueError("discriminator output outside [0, 1]");
}

/// Binary discrimination value, maximized over discriminator parameters:
/// mean(log D(virtual)) + mean(alpha * log(1 - D(target))).
template <typename Scalar>
Scalar discriminator_objective(const Vector<Scalar>& d_virtual,
                               const Vector<Scalar>& d_target,
                               const Vector<Scalar>& alpha) {
  if (d_virtual.size() < 1 || d_target.size() < 1)
    throw ShapeError("objective needs non-empty batches");
  if (alpha.size() != d_target.size())
    throw ShapeError("weights and target batch disagree on size");
  check_probability_outputs(d_virtual);
  check_probability_outputs(d_target);
  Scalar v = 0;
  for (Index i = 0; i < d_virtual.size(); ++i)
    v += std::log(std::max(d_virtual(i), Scalar(kLogFloor)));
  v /= Scalar(d_virtual.size());
  Scalar t = 0;
  for (Index i = 0; i < d_target.size(); ++i)
    t += alpha(i) * std::log(std::max(Scalar(1) - d_target(i), Scalar(kLogFloor)));
  return v + t / Scalar(d_target.size());
}

/// Loss minimized over the extractor. Non-saturating by default:
/// -mean(alpha * log D(target)); the saturating variant is
/// mean(alpha * log(1 - D(target))).
template <typename Scalar>
Scalar generator_objective(const Vector<Scalar>& d_target,
                           const Vector<Scalar>& alpha,
                           bool saturating = false) {
  if (d_target.size() < 1) throw ShapeError("objective needs a non-empty batch");
  if (alpha.size() != d_target.size())
    throw ShapeError("weights and target batch disagree on size");
  check_probability_outputs(d_target);
  Scalar acc = 0;
  for (Index i = 0; i < d_target.size(); ++i) {
    if (saturating)
      acc += alpha(i) *
             std::log(std::max(Scalar(1) - d_target(i), Scalar(kLogFloor)));
    else
      acc -= alpha(i) * std::log(std::max(d_target(i), Scalar(kLogFloor)));
  }
  return acc / Scalar(d_target.size());
}

template <typename Scalar>
struct DiscForward {
  MlpCache<Scalar> cache;
  Matrix<Scalar> probs;      // n x 2 softmax over the two logits
  Vector<Scalar> p_virtual;  // probs column 1
};

template <typename Scalar>
DiscForward<Scalar> discriminator_forward(const Mlp<Scalar>& disc,
                                          const Matrix<Scalar>& features) {
  DiscForward<Scalar> fwd;
  Matrix<Scalar> logits = mlp_forward_cached(disc, features, fwd.cache);
  if (logits.cols() != 2)
    throw ShapeError("discriminator must emit exactly two logits");
  fwd.probs = softmax_probs(logits);
  fwd.p_virtual = fwd.probs.col(1);
  return fwd;
}

/// Gradient of the row-wise L2 normalization: given raw rows and the
/// gradient with respect to the normalized rows, returns the gradient with
/// respect to the raw rows.
template <typename Scalar>
Matrix<Scalar> l2_normalize_rows_grad(const Matrix<Scalar>& raw,
                                      const Matrix<Scalar>& grad_normalized,
                                      Scalar floor = Scalar(1e-12)) {
  if (raw.rows() != grad_normalized.rows() || raw.cols() != grad_normalized.cols())
    throw ShapeError("normalization gradient shape mismatch");
  Matrix<Scalar> grad(raw.rows(), raw.cols());
  for (Index i = 0; i < raw.rows(); ++i) {
    Scalar norm = raw.row(i).norm();
    if (norm <= floor) {
      grad.row(i) = grad_normalized.row(i) / floor;  // clamped branch is linear
      continue;
    }
    Vector<Scalar> unit = raw.row(i).transpose() / norm;
    Scalar along = grad_normalized.row(i).dot(unit.transpose());
    grad.row(i) = (grad_normalized.row(i) - along * unit.transpose()) / norm;
  }
  return grad;
}

struct AdaptOptions {
  double eta0 = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  Index batch_size = 32;
  Index epochs = 50;
  double extractor_lr_factor = 0.1;
  bool tc_enabled = true;           // certainty weighting + pseudo-label refinement
  bool saturating_generator = false;
  bool normalize_target_features = true;  // L2 at the discriminator boundary
  double r_percent = 70.0;
  std::uint64_t seed = 0;
  double divergence_limit = 1e6;
};

/// Optimizer state threaded through the adaptation loop. `step` over
/// `total_steps` is the progress clock for the learning-rate decay.
template <typename Scalar>
struct AdaptState {
  LayerStackOptState<Scalar> feature_state;
  LayerStackOptState<Scalar> disc_state;
  long long step = 0;
  long long total_steps = 1;
};

template <typename Scalar>
AdaptState<Scalar> make_adapt_state(const ModelBundle<Scalar>& bundle,
                                    long long total_steps) {
  AdaptState<Scalar> st;
  st.feature_state = zero_opt_state(bundle.feature);
  st.disc_state = zero_opt_state(bundle.discriminator);
  st.total_steps = std::max<long long>(total_steps, 1);
  return st;
}

struct AlignmentStepResult {
  double d_loss = 0.0;  // discrimination value before the discriminator update
  double g_loss = 0.0;  // extractor loss against the updated discriminator
  double mean_alpha = 0.0;
  double discriminator_batch_accuracy = 0.0;
};

/// One adversarial round on one batch: an ascent step on the discriminator,
/// then a descent step on the extractor against the updated discriminator,
/// using a fresh virtual batch of the same size as the target batch.
/// Certainty weights are computed once from the current classifier
/// predictions and treated as constants; the classifier is never touched.
template <typename Scalar>
AlignmentStepResult alignment_step(ModelBundle<Scalar>& bundle,
                                   const VirtualDomainGMM<Scalar>& gmm,
                                   const Matrix<Scalar>& target_batch,
                                   AdaptState<Scalar>& state,
                                   const AdaptOptions& opt, Rng& rng) {
  if (target_batch.rows() < 1)
    throw ShapeError("alignment needs a non-empty target batch");
  if (target_batch.cols() != bundle.spec.input_dim)
    throw ShapeError("target batch width does not match input_dim");
  if (gmm.dim() != bundle.spec.feature_dim)
    throw ShapeError("virtual domain lives in the wrong feature dimension");

  const double p = double(state.step) / double(state.total_steps);
  const Scalar eta = Scalar(lr_schedule(opt.eta0, p));
  const SgdConfig<Scalar> sgd{Scalar(opt.momentum), Scalar(opt.weight_decay)};
  const Index n_t = target_batch.rows();

  auto [virtual_raw, virtual_labels] = sample_virtual_batch(gmm, n_t, rng);
  (void)virtual_labels;  // component identities play no role in alignment
  const Index n_v = virtual_raw.rows();

  // The extractor is untouched by the discriminator update, so one forward
  // pass serves both halves of the round.
  MlpCache<Scalar> feat_cache;
  Matrix<Scalar> feats_raw =
      mlp_forward_cached(bundle.feature, target_batch, feat_cache);
  Matrix<Scalar> feats_t =
      opt.normalize_target_features ? l2_normalize_rows(feats_raw) : feats_raw;
  Matrix<Scalar> feats_v = opt.normalize_target_features
                               ? l2_normalize_rows(virtual_raw)
                               : virtual_raw;

  Vector<Scalar> alpha;
  if (opt.tc_enabled) {
    Matrix<Scalar> probs =
        softmax_probs(Matrix<Scalar>(feats_raw * bundle.classifier.transpose()));
    alpha = uncertainty_weights(probs);
  } else {
    alpha = Vector<Scalar>::Ones(n_t);
  }

  // Discriminator ascent.
  DiscForward<Scalar> fwd_v = discriminator_forward(bundle.discriminator, feats_v);
  DiscForward<Scalar> fwd_t = discriminator_forward(bundle.discriminator, feats_t);
  AlignmentStepResult result;
  result.d_loss =
      double(discriminator_objective(fwd_v.p_virtual, fwd_t.p_virtual, alpha));
  result.mean_alpha = double(alpha.sum()) / double(n_t);

  Index hits = 0;
  for (Index i = 0; i < n_v; ++i) hits += fwd_v.p_virtual(i) > Scalar(0.5);
  for (Index i = 0; i < n_t; ++i) hits += fwd_t.p_virtual(i) < Scalar(0.5);
  result.discriminator_batch_accuracy = double(hits) / double(n_v + n_t);

  // Minimize the negated value: d(-V)/dlogits is (p - onehot(virtual))/n_v
  // on virtual rows and alpha * (p - onehot(target))/n_t on target rows.
  Matrix<Scalar> du_v = fwd_v.probs / Scalar(n_v);
  du_v.col(1).array() -= Scalar(1) / Scalar(n_v);
  Matrix<Scalar> du_t = fwd_t.probs;
  du_t.col(0).array() -= Scalar(1);
  for (Index i = 0; i < n_t; ++i) du_t.row(i) *= alpha(i) / Scalar(n_t);

  MlpGrads<Scalar> d_grads = zero_grads_like(bundle.discriminator);
  mlp_backward(bundle.discriminator, fwd_v.cache, du_v, &d_grads);
  mlp_backward(bundle.discriminator, fwd_t.cache, du_t, &d_grads);
  sgd_step(bundle.discriminator, d_grads, state.disc_state, eta, sgd);

  // Extractor descent against the updated discriminator.
  DiscForward<Scalar> fwd_g = discriminator_forward(bundle.discriminator, feats_t);
  result.g_loss =
      double(generator_objective(fwd_g.p_virtual, alpha, opt.saturating_generator));

  Matrix<Scalar> du_g = fwd_g.probs;
  if (opt.saturating_generator) {
    du_g.col(0).array() -= Scalar(1);
    du_g = -du_g;  // minimize +mean(a log(1-D)): gradient is a (e0 - p)/n
  } else {
    du_g.col(1).array() -= Scalar(1);  // minimize -mean(a log D): a (p - e1)/n
  }
  for (Index i = 0; i < n_t; ++i) du_g.row(i) *= alpha(i) / Scalar(n_t);

  Matrix<Scalar> g_feats =
      mlp_backward(bundle.discriminator, fwd_g.cache, du_g);
  if (opt.normalize_target_features)
    g_feats = l2_normalize_rows_grad(feats_raw, g_feats);
  MlpGrads<Scalar> f_grads = zero_grads_like(bundle.feature);
  mlp_backward(bundle.feature, feat_cache, g_feats, &f_grads);
  sgd_step(bundle.feature, f_grads, state.feature_state,
           Scalar(opt.extractor_lr_factor) * eta, sgd);

  if (!std::isfinite(result.d_loss) || !std::isfinite(result.g_loss) ||
      std::abs(result.d_loss) > opt.divergence_limit ||
      std::abs(result.g_loss) > opt.divergence_limit)
    throw DivergenceError("alignment objective diverged", state.step,
                          result.d_loss, result.g_loss);
  ++state.step;
  return result;
}

// ---------------------------------------------------------------------------
// Pseudo-label selection and refinement.

/// Sample indices ordered from most to least certain prediction
/// (ascending entropy, ties broken by original position).
template <typename Scalar>
std::vector<Index> rank_by_certainty(const Matrix<Scalar>& probs) {
  Vector<Scalar> h = prediction_entropy(probs);
  std::vector<Index> order(probs.rows());
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return h(a) < h(b); });
  return order;
}

struct PseudoLabelSet {
  std::vector<Index> sample_indices;  // positions into the target set
  Eigen::VectorXi labels;             // predicted class per kept position
  std::vector<double> entropies;      // prediction entropy per kept position
  double r_percent = 0.0;
};

/// Number of samples kept when retaining r percent of n, never fewer than
/// one. The small offset absorbs cases like 0.3 * 10 landing just under 3.
inline Index confident_count(double r_percent, Index n) {
  if (!(r_percent > 0.0 && r_percent <= 100.0))
    throw ParameterError("retention percentage must lie in (0, 100]");
  if (n < 1) throw ShapeError("cannot select from an empty set");
  Index count = static_cast<Index>(std::floor(r_percent / 100.0 * double(n) + 1e-9));
  return std::max<Index>(Index(1), std::min(count, n));
}

/// Keeps the r percent most certain rows and labels them by their argmax.
template <typename Scalar>
PseudoLabelSet select_confident(const Matrix<Scalar>& probs, double r_percent) {
  const Index count = confident_count(r_percent, probs.rows());
  std::vector<Index> order = rank_by_certainty(probs);
  Vector<Scalar> h = prediction_entropy(probs);
  PseudoLabelSet set;
  set.r_percent = r_percent;
  set.sample_indices.assign(order.begin(), order.begin() + count);
  set.labels.resize(count);
  for (Index i = 0; i < count; ++i) {
    Index arg = 0;
    probs.row(set.sample_indices[i]).maxCoeff(&arg);
    set.labels(i) = static_cast<int>(arg);
    set.entropies.push_back(double(h(set.sample_indices[i])));
  }
  return set;
}

template <typename Scalar>
PseudoLabelSet select_confident(const ModelBundle<Scalar>& bundle,
                                const Matrix<Scalar>& inputs, double r_percent) {
  Matrix<Scalar> probs = softmax_probs(
      Matrix<Scalar>(classify(bundle, forward_features(bundle, inputs))));
  return select_confident(probs, r_percent);
}

/// One cross-entropy descent step on the extractor using pseudo-labels;
/// the classifier stays frozen. An empty batch is a no-op.
template <typename Scalar>
double refinement_step(ModelBundle<Scalar>& bundle,
                       const Matrix<Scalar>& x_batch,
                       const Eigen::VectorXi& y_batch,
                       AdaptState<Scalar>& state, const AdaptOptions& opt) {
  if (x_batch.rows() == 0) return 0.0;
  if (x_batch.rows() != y_batch.size())
    throw ShapeError("refinement batch and labels disagree on size");

  const double p = double(state.step) / double(state.total_steps);
  const Scalar eta = Scalar(lr_schedule(opt.eta0, p));
  const SgdConfig<Scalar> sgd{Scalar(opt.momentum), Scalar(opt.weight_decay)};

  MlpCache<Scalar> cache;
  Matrix<Scalar> feats = mlp_forward_cached(bundle.feature, x_batch, cache);
  Matrix<Scalar> logits = feats * bundle.classifier.transpose();
  Scalar loss = cross_entropy(logits, y_batch);
  if (!std::isfinite(double(loss)) || std::abs(double(loss)) > opt.divergence_limit)
    throw DivergenceError("refinement loss diverged", state.step, double(loss));

  Matrix<Scalar> dlogits = cross_entropy_grad_logits(logits, y_batch);
  Matrix<Scalar> dfeats = dlogits * bundle.classifier;
  MlpGrads<Scalar> f_grads = zero_grads_like(bundle.feature);
  mlp_backward(bundle.feature, cache, dfeats, &f_grads);
  sgd_step(bundle.feature, f_grads, state.feature_state,
           Scalar(opt.extractor_lr_factor) * eta, sgd);
  ++state.step;
  return double(loss);
}

// ---------------------------------------------------------------------------
// Full adaptation loop.

struct AdaptResult {
  std::vector<double> d_loss_curve;         // epoch means
  std::vector<double> g_loss_curve;
  std::vector<double> mean_alpha_curve;
  std::vector<double> disc_accuracy_curve;  // epoch means of batch accuracies
  std::vector<std::optional<PseudoLabelSet>> pseudo_sets;  // per epoch
  long long steps_taken = 0;
};

/// Adapts the extractor to unlabeled target inputs against the virtual
/// domain. Each epoch runs one alignment pass; from the second epoch on
/// (when certainty weighting is enabled) the confident subset is re-selected
/// and one refinement pass follows. Only the extractor and discriminator
/// move; the classifier is frozen throughout.
template <typename Scalar>
AdaptResult adapt_target(ModelBundle<Scalar>& bundle,
                         const VirtualDomainGMM<Scalar>& gmm,
                         const Matrix<Scalar>& target_inputs,
                         const AdaptOptions& opt, Diagnostics* diag = nullptr) {
  validate_bundle(bundle);
  validate_gmm(gmm);
  if (target_inputs.rows() < 1) throw ShapeError("target set is empty");
  if (target_inputs.cols() != bundle.spec.input_dim)
    throw ShapeError("target width does not match input_dim");
  if (gmm.dim() != bundle.spec.feature_dim)
    throw ShapeError("virtual domain lives in the wrong feature dimension");
  if (gmm.num_components() != bundle.spec.num_classes)
    throw ShapeError("virtual domain component count does not match classes");
  if (opt.batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (opt.epochs < 0) throw ParameterError("epochs must be >= 0");

  const Index n = target_inputs.rows();
  const Index n_align = (n + opt.batch_size - 1) / opt.batch_size;
  Index n_refine = 0;
  long long refine_epochs = 0;
  if (opt.tc_enabled && opt.epochs > 1) {
    const Index count = confident_count(opt.r_percent, n);
    n_refine = (count + opt.batch_size - 1) / opt.batch_size;
    refine_epochs = opt.epochs - 1;
  }
  const long long total =
      static_cast<long long>(opt.epochs) * n_align + refine_epochs * n_refine;

  AdaptResult result;
  if (opt.epochs == 0) return result;
  AdaptState<Scalar> state = make_adapt_state(bundle, total);
  Rng virtual_rng(derive_seed(opt.seed, 0x5eed));
  if (diag) diag->event("adapt_begin");

  for (Index epoch = 0; epoch < opt.epochs; ++epoch) {
    auto batches =
        batch_indices(n, opt.batch_size, derive_seed(opt.seed, 1000 + epoch));
    double d_sum = 0, g_sum = 0, a_sum = 0, acc_sum = 0;
    for (const auto& batch : batches) {
      Matrix<Scalar> xb(batch.size(), target_inputs.cols());
      for (std::size_t i = 0; i < batch.size(); ++i)
        xb.row(i) = target_inputs.row(batch[i]);
      AlignmentStepResult step =
          alignment_step(bundle, gmm, xb, state, opt, virtual_rng);
      d_sum += step.d_loss;
      g_sum += step.g_loss;
      a_sum += step.mean_alpha;
      acc_sum += step.discriminator_batch_accuracy;
      if (diag)
        diag->add({{"step", state.step - 1},
                   {"epoch", epoch},
                   {"d_loss", step.d_loss},
                   {"g_loss", step.g_loss},
                   {"mean_alpha", step.mean_alpha},
                   {"discriminator_batch_accuracy",
                    step.discriminator_batch_accuracy}});
    }
    const double nb = double(batches.size());
    result.d_loss_curve.push_back(d_sum / nb);
    result.g_loss_curve.push_back(g_sum / nb);
    result.mean_alpha_curve.push_back(a_sum / nb);
    result.disc_accuracy_curve.push_back(acc_sum / nb);

    // The first epoch is a warm-up: predictions are still source-shaped, so
    // no confident subset is trusted yet.
    if (opt.tc_enabled && epoch >= 1) {
      PseudoLabelSet pseudo =
          select_confident(bundle, target_inputs, opt.r_percent);
      const Index count = Index(pseudo.sample_indices.size());
      auto rbatches =
          batch_indices(count, opt.batch_size, derive_seed(opt.seed, 5000 + epoch));
      for (const auto& rb : rbatches) {
        Matrix<Scalar> xb(rb.size(), target_inputs.cols());
        Eigen::VectorXi yb(rb.size());
        for (std::size_t i = 0; i < rb.size(); ++i) {
          xb.row(i) = target_inputs.row(pseudo.sample_indices[rb[i]]);
          yb(i) = pseudo.labels(rb[i]);
        }
        refinement_step(bundle, xb, yb, state, opt);
      }
      if (diag) diag->add({{"epoch", epoch}, {"pseudo_count", count}});
      result.pseudo_sets.push_back(std::move(pseudo));
    } else {
      result.pseudo_sets.push_back(std::nullopt);
    }
  }
  result.steps_taken = state.step;
  if (diag) diag->event("adapt_end");
  return result;
}

}  // namespace vda
