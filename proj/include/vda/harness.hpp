#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vda/adaptation.hpp"
#include "vda/datasets.hpp"
#include "vda/diagnostics.hpp"
#include "vda/models.hpp"
#include "vda/virtual_domain.hpp"

namespace vda {

/// Paths to pre-extracted source/target CSV tables. The source table must
/// carry labels; the target table may omit them (headline accuracies are
/// then unavailable).
struct TabularPair {
  std::string source_path;
  std::string target_path;
};

/// Everything a run needs. Defaults follow the reference training recipe
/// (momentum 0.9, weight decay 1e-3, batch 32, eta0 1e-2, lambda 6,
/// r_percent 70) with desk-scale epochs and network sizes.
struct ExperimentConfig {
  NetworkSpec network{
      .input_dim = 16,
      .feature_dim = 16,
      .hidden_widths = {32},
      .num_classes = 4,
      .discriminator_widths = {64, 64},
  };
  std::variant<ShiftSpec, TabularPair> dataset = ShiftSpec{
      .family = ShiftFamily::blobs,
      .num_classes = 4,
      .samples_per_class = 500,
      .input_dim = 16,
      .rotation_degrees = 45.0,
  };
  double lambda = 6.0;
  double r_percent = 70.0;
  double eta0 = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  Index batch_size = 32;
  double extractor_lr_factor = 0.1;
  Index pretrain_epochs = 100;
  Index adapt_epochs = 50;
  bool tc_enabled = true;
  bool saturating_generator = false;
  DistanceMetric metric = DistanceMetric::squared_euclidean;
  bool normalize_target_features = true;
  std::uint64_t seed = 0;
  bool use_single_precision = false;
  double divergence_limit = 1e6;
};

void validate_config(const ExperimentConfig& config);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a of a byte string, as fixed-width hex.
std::string fnv1a_hex(const std::string& bytes);

/// Hash of the canonical (sorted-key) config serialization.
std::string config_hash(const ExperimentConfig& config);

/// Metrics of one full run. Headline accuracies are absent when the target
/// table carries no labels; all curves have length adapt_epochs.
struct MetricsReport {
  std::vector<double> per_class_accuracy;  // adapted model, NaN where absent
  std::optional<double> average_accuracy;  // adapted model on target
  std::optional<double> source_only_accuracy;
  std::optional<double> source_accuracy_on_source;
  std::vector<double> d_loss_curve;
  std::vector<double> g_loss_curve;
  std::vector<double> mean_alpha_curve;
  std::vector<double> disc_accuracy_curve;
  std::vector<std::optional<double>> pseudo_label_agreement_curve;
  std::vector<Index> pseudo_count_curve;  // 0 on epochs without refinement
  double sigma_sq = 0.0;
  std::string config_hash;
  std::uint64_t seed = 0;
  double wall_time_seconds = 0.0;
};

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

/// Canonical serialization with the wall-time field removed; two runs are
/// considered identical when these strings match byte for byte.
std::string serialized_without_wall_time(const nlohmann::json& report_json);

/// Builds the source/target pair described by the config. Synthetic data
/// derives its generator seed from the experiment seed; CSV data is loaded
/// and validated against the network shape.
std::pair<DomainDataset, DomainDataset> build_datasets(
    const ExperimentConfig& config);

/// Re-throws a stage's exception with the stage name prefixed, preserving
/// the exception type (and payload fields where present).
template <typename F>
auto with_stage(const char* stage, F&& f) -> decltype(f()) {
  auto tag = [&](const std::exception& e) {
    return std::string(stage) + ": " + e.what();
  };
  try {
    return f();
  } catch (const DivergenceError& e) {
    throw DivergenceError(tag(e), e.step, e.d_loss, e.g_loss);
  } catch (const ParseError& e) {
    throw ParseError(tag(e), e.line);
  } catch (const ShapeError& e) {
    throw ShapeError(tag(e));
  } catch (const ValueError& e) {
    throw ValueError(tag(e));
  } catch (const ParameterError& e) {
    throw ParameterError(tag(e));
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(tag(e));
  } catch (const DegenerateError& e) {
    throw DegenerateError(tag(e));
  } catch (const SchemaError& e) {
    throw SchemaError(tag(e));
  } catch (const IoError& e) {
    throw IoError(tag(e));
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e));
  }
}

/// Full artifacts of one pipeline run, for callers that save checkpoints
/// or plots on top of the report.
template <typename Scalar>
struct PipelineRun {
  ModelBundle<Scalar> pretrained;
  ModelBundle<Scalar> adapted;
  VirtualDomainGMM<Scalar> gmm;
  DomainDataset target;
  AdaptResult adapt;
  MetricsReport report;
};

/// pretrain -> evaluate baseline -> build virtual domain -> drop the source
/// dataset -> adapt on unlabeled target inputs -> evaluate. Deterministic
/// given the config.
template <typename Scalar>
PipelineRun<Scalar> run_pipeline_typed(const ExperimentConfig& config,
                                       Diagnostics* diag = nullptr) {
  const auto started = std::chrono::steady_clock::now();
  validate_config(config);
  PipelineRun<Scalar> run;

  auto [source, target] = with_stage("dataset", [&] { return build_datasets(config); });
  run.target = target;

  PretrainOptions popt;
  popt.eta0 = config.eta0;
  popt.momentum = config.momentum;
  popt.weight_decay = config.weight_decay;
  popt.batch_size = config.batch_size;
  popt.epochs = config.pretrain_epochs;
  popt.extractor_lr_factor = config.extractor_lr_factor;
  popt.seed = derive_seed(config.seed, 2);
  if (diag) diag->event("pretrain_begin");
  run.pretrained = with_stage("pretrain", [&] {
    return pretrain_source<Scalar>(source, config.network, popt);
  });
  if (diag) diag->event("pretrain_end");

  MetricsReport& report = run.report;
  with_stage("evaluate-source", [&] {
    report.source_accuracy_on_source =
        evaluate(run.pretrained, source).average_accuracy;
    if (target.labels)
      report.source_only_accuracy =
          evaluate(run.pretrained, target).average_accuracy;
  });

  run.gmm = with_stage("virtual-domain", [&] {
    return build_virtual_domain(run.pretrained, Scalar(config.lambda),
                                config.metric);
  });
  report.sigma_sq = double(run.gmm.sigma_sq);

  // Source-free from here on: the source dataset is released before any
  // adaptation work starts, and the adaptation entry point has no way to
  // receive it.
  source = DomainDataset{};
  if (diag)
    diag->add({{"event", "source_released"},
               {"source_rows", source.inputs.rows()},
               {"source_labels", bool(source.labels)}});

  AdaptOptions aopt;
  aopt.eta0 = config.eta0;
  aopt.momentum = config.momentum;
  aopt.weight_decay = config.weight_decay;
  aopt.batch_size = config.batch_size;
  aopt.epochs = config.adapt_epochs;
  aopt.extractor_lr_factor = config.extractor_lr_factor;
  aopt.tc_enabled = config.tc_enabled;
  aopt.saturating_generator = config.saturating_generator;
  aopt.normalize_target_features = config.normalize_target_features;
  aopt.r_percent = config.r_percent;
  aopt.seed = derive_seed(config.seed, 3);
  aopt.divergence_limit = config.divergence_limit;

  run.adapted = run.pretrained;
  Matrix<Scalar> target_inputs = target.inputs.template cast<Scalar>();
  run.adapt = with_stage("adapt", [&] {
    return adapt_target(run.adapted, run.gmm, target_inputs, aopt, diag);
  });

  report.d_loss_curve = run.adapt.d_loss_curve;
  report.g_loss_curve = run.adapt.g_loss_curve;
  report.mean_alpha_curve = run.adapt.mean_alpha_curve;
  report.disc_accuracy_curve = run.adapt.disc_accuracy_curve;
  for (const auto& pseudo : run.adapt.pseudo_sets) {
    if (!pseudo) {
      report.pseudo_count_curve.push_back(0);
      report.pseudo_label_agreement_curve.push_back(std::nullopt);
      continue;
    }
    report.pseudo_count_curve.push_back(Index(pseudo->sample_indices.size()));
    if (target.labels) {
      Index agree = 0;
      for (std::size_t i = 0; i < pseudo->sample_indices.size(); ++i)
        agree += pseudo->labels(Index(i)) == (*target.labels)(pseudo->sample_indices[i]);
      report.pseudo_label_agreement_curve.push_back(
          double(agree) / double(pseudo->sample_indices.size()));
    } else {
      report.pseudo_label_agreement_curve.push_back(std::nullopt);
    }
  }
  if (diag)
    for (std::size_t e = 0; e < report.pseudo_label_agreement_curve.size(); ++e)
      if (report.pseudo_label_agreement_curve[e])
        diag->add({{"epoch", e},
                   {"pseudo_agreement", *report.pseudo_label_agreement_curve[e]}});

  with_stage("evaluate", [&] {
    if (!target.labels) return;
    EvalResult eval = evaluate(run.adapted, target);
    report.average_accuracy = eval.average_accuracy;
    report.per_class_accuracy = eval.per_class_accuracy;
  });

  report.config_hash = config_hash(config);
  report.seed = config.seed;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return run;
}

/// As run_pipeline_typed, dispatching on the configured precision and
/// keeping only the report.
MetricsReport run_pipeline(const ExperimentConfig& config,
                           Diagnostics* diag = nullptr);

/// One grid point of a sweep. `skipped` points were found already done on
/// disk and their stored report is returned unchanged.
struct SweepPoint {
  std::size_t index = 0;
  std::map<std::string, double> overrides;
  std::string status;  // "ok", "skipped", or "failed"
  std::string error;
  std::optional<MetricsReport> report;
};

using SweepGrid = std::vector<std::pair<std::string, std::vector<double>>>;

/// Applies one named scalar override to a config copy (hyperparameters or
/// synthetic-shift fields). Unknown names raise a config error.
void apply_override(ExperimentConfig& config, const std::string& name,
                    double value);

/// Runs the Cartesian product of the grid axes over the base config,
/// writing one point_NNN.json per point into out_dir plus a summary.json.
/// Points whose file already exists are skipped, so an interrupted sweep
/// resumes where it stopped; a failed point is recorded and does not abort
/// the rest.
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                  const SweepGrid& grid,
                                  const std::filesystem::path& out_dir);

/// Feature-space scatter data for the optional diagnostic plot.
struct PlotData {
  Matrix<double> target_points;  // n x 2, already projected
  std::vector<int> target_labels;
  Matrix<double> virtual_points;  // m x 2, already projected
  std::vector<int> virtual_labels;
};

/// Learned 2-D projection: mean-centering plus the top principal axes.
struct PcaBasis {
  Vector<double> mean;
  Matrix<double> components;  // dims x d
};
PcaBasis fit_pca(const Matrix<double>& x, Index dims = 2);
Matrix<double> apply_pca(const PcaBasis& basis, const Matrix<double>& x);

void write_scatter_svg(const std::filesystem::path& path, const PlotData& plot);

/// Writes report.json, config.json, and diagnostics.jsonl into out_dir
/// (created if missing); adds plot.svg when plot data is supplied.
void emit_report(const std::filesystem::path& out_dir,
                 const ExperimentConfig& config, const MetricsReport& report,
                 const Diagnostics& diag, const PlotData* plot = nullptr);

/// Resolves a user-supplied output directory: absolute paths pass through,
/// relative ones land under $VDA_OUT_ROOT when set (else the working
/// directory).
std::filesystem::path resolve_out_dir(const std::string& arg);

}  // namespace vda
