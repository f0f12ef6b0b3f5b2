// Command-line front end: pretrain / adapt / eval / run / sweep / plot.
// Flags mirror the experiment config; --config loads a json file first and
// explicit flags override it. Relative --out paths resolve under
// $VDA_OUT_ROOT when that variable is set.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vda/harness.hpp"

namespace {

using vda::ConfigError;
using vda::Index;

std::vector<Index> parse_index_list(const std::string& s) {
  std::vector<Index> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    std::string tok = s.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      long long v = std::stoll(tok, &used);
      if (used != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(Index(v));
    } catch (const std::exception&) {
      throw ConfigError("bad integer list element: '" + tok + "'");
    }
    pos = comma + 1;
  }
  return out;
}

vda::Vector<double> parse_double_list(const std::string& s) {
  std::vector<double> vals;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    std::string tok = s.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      vals.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad number list element: '" + tok + "'");
    }
    pos = comma + 1;
  }
  vda::Vector<double> out(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) out(Index(i)) = vals[i];
  return out;
}

// Everything settable from the command line; unset fields keep whatever the
// config file (or the defaults) said.
struct CliOverrides {
  std::optional<std::string> config_path;
  std::optional<double> lambda, r_percent, eta0, momentum, weight_decay,
      extractor_lr_factor, divergence_limit, noise_std, rotation_degrees, scale;
  std::optional<long long> batch_size, pretrain_epochs, adapt_epochs,
      samples_per_class, input_dim, feature_dim, num_classes;
  std::optional<std::uint64_t> seed;
  std::optional<bool> tc_enabled, saturating_generator,
      normalize_target_features, use_single_precision;
  std::optional<std::string> metric, family, hidden_widths,
      discriminator_widths, source_csv, target_csv, translation;
};

void add_config_flags(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "json config file (flags override it)");
  cmd->add_option("--lambda", o.lambda, "prototype-spacing divisor for sigma^2");
  cmd->add_option("--r-percent", o.r_percent, "confident-sample retention percent");
  cmd->add_option("--eta0", o.eta0, "initial learning rate");
  cmd->add_option("--momentum", o.momentum, "sgd momentum");
  cmd->add_option("--weight-decay", o.weight_decay, "sgd weight decay");
  cmd->add_option("--batch-size", o.batch_size, "minibatch size");
  cmd->add_option("--extractor-lr-factor", o.extractor_lr_factor,
                  "extractor learning-rate multiplier");
  cmd->add_option("--pretrain-epochs", o.pretrain_epochs, "source training epochs");
  cmd->add_option("--adapt-epochs", o.adapt_epochs, "adaptation epochs");
  cmd->add_option("--seed", o.seed, "experiment seed");
  cmd->add_option("--metric", o.metric,
                  "prototype distance: squared_euclidean or cosine_distance");
  cmd->add_option("--divergence-limit", o.divergence_limit,
                  "abort when |objective| exceeds this");
  cmd->add_flag("--tc,!--no-tc", o.tc_enabled,
                "certainty weighting + pseudo-label refinement");
  cmd->add_flag("--saturating-generator,!--non-saturating-generator",
                o.saturating_generator, "use the literal saturating extractor loss");
  cmd->add_flag("--normalize-target-features,!--no-normalize-target-features",
                o.normalize_target_features,
                "L2-normalize features at the discriminator");
  cmd->add_flag("--single-precision,!--double-precision", o.use_single_precision,
                "run in float32");
  cmd->add_option("--input-dim", o.input_dim, "network input width");
  cmd->add_option("--feature-dim", o.feature_dim, "feature width");
  cmd->add_option("--num-classes", o.num_classes, "class count");
  cmd->add_option("--hidden-widths", o.hidden_widths,
                  "extractor hidden widths, comma separated (empty = none)");
  cmd->add_option("--disc-widths", o.discriminator_widths,
                  "discriminator hidden widths, comma separated");
  cmd->add_option("--family", o.family, "synthetic family: blobs or moons");
  cmd->add_option("--samples-per-class", o.samples_per_class,
                  "synthetic samples per class");
  cmd->add_option("--rotation-degrees", o.rotation_degrees,
                  "target-domain rotation");
  cmd->add_option("--translation", o.translation,
                  "target-domain translation, comma separated");
  cmd->add_option("--shift-scale", o.scale, "target-domain scale factor");
  cmd->add_option("--noise-std", o.noise_std, "synthetic noise level");
  cmd->add_option("--source-csv", o.source_csv, "source table (switches to csv data)");
  cmd->add_option("--target-csv", o.target_csv, "target table (switches to csv data)");
}

vda::ExperimentConfig resolve_config(const CliOverrides& o) {
  vda::ExperimentConfig config;
  if (o.config_path) config = vda::load_config(*o.config_path);

  if (o.lambda) config.lambda = *o.lambda;
  if (o.r_percent) config.r_percent = *o.r_percent;
  if (o.eta0) config.eta0 = *o.eta0;
  if (o.momentum) config.momentum = *o.momentum;
  if (o.weight_decay) config.weight_decay = *o.weight_decay;
  if (o.batch_size) config.batch_size = Index(*o.batch_size);
  if (o.extractor_lr_factor) config.extractor_lr_factor = *o.extractor_lr_factor;
  if (o.pretrain_epochs) config.pretrain_epochs = Index(*o.pretrain_epochs);
  if (o.adapt_epochs) config.adapt_epochs = Index(*o.adapt_epochs);
  if (o.seed) config.seed = *o.seed;
  if (o.metric) config.metric = vda::distance_metric_from_string(*o.metric);
  if (o.divergence_limit) config.divergence_limit = *o.divergence_limit;
  if (o.tc_enabled) config.tc_enabled = *o.tc_enabled;
  if (o.saturating_generator) config.saturating_generator = *o.saturating_generator;
  if (o.normalize_target_features)
    config.normalize_target_features = *o.normalize_target_features;
  if (o.use_single_precision) config.use_single_precision = *o.use_single_precision;

  if (o.input_dim) config.network.input_dim = Index(*o.input_dim);
  if (o.feature_dim) config.network.feature_dim = Index(*o.feature_dim);
  if (o.num_classes) config.network.num_classes = int(*o.num_classes);
  if (o.hidden_widths)
    config.network.hidden_widths = parse_index_list(*o.hidden_widths);
  if (o.discriminator_widths)
    config.network.discriminator_widths = parse_index_list(*o.discriminator_widths);

  if (o.source_csv || o.target_csv) {
    if (!o.source_csv || !o.target_csv)
      throw ConfigError("--source-csv and --target-csv must be given together");
    config.dataset = vda::TabularPair{*o.source_csv, *o.target_csv};
  } else if (auto* shift = std::get_if<vda::ShiftSpec>(&config.dataset)) {
    if (o.family) {
      if (*o.family == "blobs") shift->family = vda::ShiftFamily::blobs;
      else if (*o.family == "moons") shift->family = vda::ShiftFamily::moons;
      else throw ConfigError("unknown dataset family: " + *o.family);
    }
    if (o.samples_per_class) shift->samples_per_class = Index(*o.samples_per_class);
    if (o.rotation_degrees) shift->rotation_degrees = *o.rotation_degrees;
    if (o.translation) shift->translation = parse_double_list(*o.translation);
    if (o.scale) shift->scale = *o.scale;
    if (o.noise_std) shift->noise_std = *o.noise_std;
    if (o.num_classes) shift->num_classes = int(*o.num_classes);
    if (o.input_dim) shift->input_dim = Index(*o.input_dim);
  }
  vda::validate_config(config);
  return config;
}

vda::DomainDataset load_target_only(const vda::ExperimentConfig& config) {
  if (std::holds_alternative<vda::ShiftSpec>(config.dataset))
    return vda::build_datasets(config).second;
  const auto& tab = std::get<vda::TabularPair>(config.dataset);
  vda::TabularSchema schema{config.network.input_dim, config.network.num_classes};
  return vda::load_tabular(tab.target_path, schema);
}

template <typename Scalar>
vda::PlotData make_plot_data(const vda::ModelBundle<Scalar>& bundle,
                             const vda::VirtualDomainGMM<Scalar>& gmm,
                             const vda::Matrix<double>& target_inputs,
                             bool normalize, std::uint64_t seed) {
  vda::Matrix<Scalar> feats = vda::forward_features(
      bundle, vda::Matrix<Scalar>(target_inputs.cast<Scalar>()));
  Eigen::VectorXi pred =
      vda::predict_labels(vda::Matrix<Scalar>(vda::classify(bundle, feats)));
  vda::Rng rng(vda::derive_seed(seed, 0x9107));
  const Index n_virtual = std::min<Index>(feats.rows(), 1000);
  auto [virt, virt_labels] = vda::sample_virtual_batch(gmm, n_virtual, rng);
  if (normalize) {
    feats = vda::l2_normalize_rows(feats);
    virt = vda::l2_normalize_rows(virt);
  }

  vda::Matrix<double> t = feats.template cast<double>();
  vda::Matrix<double> v = virt.template cast<double>();
  vda::Matrix<double> both(t.rows() + v.rows(), t.cols());
  both << t, v;
  vda::PcaBasis basis = vda::fit_pca(both, 2);

  vda::PlotData plot;
  plot.target_points = vda::apply_pca(basis, t);
  plot.virtual_points = vda::apply_pca(basis, v);
  for (Index i = 0; i < pred.size(); ++i) plot.target_labels.push_back(pred(i));
  for (Index i = 0; i < virt_labels.size(); ++i)
    plot.virtual_labels.push_back(virt_labels(i));
  return plot;
}

template <typename Fn>
auto with_scalar(bool single, Fn&& fn) {
  return single ? fn(float{}) : fn(double{});
}

int cmd_pretrain(const CliOverrides& o, const std::string& out_arg) {
  vda::ExperimentConfig config = resolve_config(o);
  auto out_dir = vda::resolve_out_dir(out_arg);
  std::filesystem::create_directories(out_dir);
  return with_scalar(config.use_single_precision, [&](auto tag) {
    using Scalar = decltype(tag);
    auto [source, target] = vda::build_datasets(config);
    vda::PretrainOptions opt;
    opt.eta0 = config.eta0;
    opt.momentum = config.momentum;
    opt.weight_decay = config.weight_decay;
    opt.batch_size = config.batch_size;
    opt.epochs = config.pretrain_epochs;
    opt.extractor_lr_factor = config.extractor_lr_factor;
    opt.seed = vda::derive_seed(config.seed, 2);
    auto bundle = vda::pretrain_source<Scalar>(source, config.network, opt);

    vda::save_checkpoint(out_dir / "checkpoint_pretrained.json", bundle,
                         vda::config_hash(config), config.seed);
    nlohmann::json summary{
        {"checkpoint", (out_dir / "checkpoint_pretrained.json").string()},
        {"source_accuracy_on_source",
         vda::evaluate(bundle, source).average_accuracy}};
    if (target.labels)
      summary["source_only_accuracy"] =
          vda::evaluate(bundle, target).average_accuracy;
    std::cout << summary.dump(2) << "\n";
    return 0;
  });
}

int cmd_adapt(const CliOverrides& o, const std::string& checkpoint,
              const std::string& out_arg) {
  vda::ExperimentConfig config = resolve_config(o);
  auto out_dir = vda::resolve_out_dir(out_arg);
  std::filesystem::create_directories(out_dir);
  return with_scalar(config.use_single_precision, [&](auto tag) {
    using Scalar = decltype(tag);
    auto ckpt = vda::load_checkpoint<Scalar>(checkpoint);
    vda::DomainDataset target = load_target_only(config);
    if (target.dim() != ckpt.bundle.spec.input_dim)
      throw ConfigError("target width does not match the checkpoint network");

    auto gmm = vda::build_virtual_domain(ckpt.bundle, Scalar(config.lambda),
                                         config.metric);
    vda::AdaptOptions opt;
    opt.eta0 = config.eta0;
    opt.momentum = config.momentum;
    opt.weight_decay = config.weight_decay;
    opt.batch_size = config.batch_size;
    opt.epochs = config.adapt_epochs;
    opt.extractor_lr_factor = config.extractor_lr_factor;
    opt.tc_enabled = config.tc_enabled;
    opt.saturating_generator = config.saturating_generator;
    opt.normalize_target_features = config.normalize_target_features;
    opt.r_percent = config.r_percent;
    opt.seed = vda::derive_seed(config.seed, 3);
    opt.divergence_limit = config.divergence_limit;

    vda::Diagnostics diag;
    vda::Matrix<Scalar> target_inputs = target.inputs.cast<Scalar>();
    vda::AdaptResult adapt =
        vda::adapt_target(ckpt.bundle, gmm, target_inputs, opt, &diag);

    vda::MetricsReport report;
    report.d_loss_curve = adapt.d_loss_curve;
    report.g_loss_curve = adapt.g_loss_curve;
    report.mean_alpha_curve = adapt.mean_alpha_curve;
    report.disc_accuracy_curve = adapt.disc_accuracy_curve;
    for (const auto& pseudo : adapt.pseudo_sets) {
      report.pseudo_count_curve.push_back(
          pseudo ? Index(pseudo->sample_indices.size()) : 0);
      report.pseudo_label_agreement_curve.push_back(std::nullopt);
    }
    if (target.labels) {
      auto eval = vda::evaluate(ckpt.bundle, target);
      report.average_accuracy = eval.average_accuracy;
      report.per_class_accuracy = eval.per_class_accuracy;
    }
    report.sigma_sq = double(gmm.sigma_sq);
    report.config_hash = vda::config_hash(config);
    report.seed = config.seed;

    vda::save_checkpoint(out_dir / "checkpoint_adapted.json", ckpt.bundle,
                         vda::config_hash(config), config.seed);
    vda::write_gmm(out_dir / "gmm.txt", gmm);
    vda::emit_report(out_dir, config, report, diag);
    std::cout << vda::report_to_json(report).dump(2) << "\n";
    return 0;
  });
}

int cmd_eval(const CliOverrides& o, const std::string& checkpoint,
             const std::string& side) {
  vda::ExperimentConfig config = resolve_config(o);
  if (side != "source" && side != "target")
    throw ConfigError("--on must be 'source' or 'target'");
  return with_scalar(config.use_single_precision, [&](auto tag) {
    using Scalar = decltype(tag);
    auto ckpt = vda::load_checkpoint<Scalar>(checkpoint);
    vda::DomainDataset data;
    if (side == "source")
      data = vda::build_datasets(config).first;
    else
      data = load_target_only(config);
    auto eval = vda::evaluate(ckpt.bundle, data);
    nlohmann::json per_class = nlohmann::json::array();
    for (double a : eval.per_class_accuracy)
      per_class.push_back(std::isfinite(a) ? nlohmann::json(a) : nullptr);
    std::cout << nlohmann::json{{"on", side},
                                {"average_accuracy", eval.average_accuracy},
                                {"per_class_accuracy", per_class}}
                     .dump(2)
              << "\n";
    return 0;
  });
}

int cmd_run(const CliOverrides& o, const std::string& out_arg, bool plot) {
  vda::ExperimentConfig config = resolve_config(o);
  auto out_dir = vda::resolve_out_dir(out_arg);
  return with_scalar(config.use_single_precision, [&](auto tag) {
    using Scalar = decltype(tag);
    vda::Diagnostics diag;
    auto run = vda::run_pipeline_typed<Scalar>(config, &diag);
    std::filesystem::create_directories(out_dir);
    vda::save_checkpoint(out_dir / "checkpoint_pretrained.json", run.pretrained,
                         run.report.config_hash, config.seed);
    vda::save_checkpoint(out_dir / "checkpoint_adapted.json", run.adapted,
                         run.report.config_hash, config.seed);
    vda::write_gmm(out_dir / "gmm.txt", run.gmm);
    if (plot) {
      vda::PlotData data =
          make_plot_data(run.adapted, run.gmm, run.target.inputs,
                         config.normalize_target_features, config.seed);
      vda::emit_report(out_dir, config, run.report, diag, &data);
    } else {
      vda::emit_report(out_dir, config, run.report, diag);
    }
    std::cout << vda::report_to_json(run.report).dump(2) << "\n";
    return 0;
  });
}

int cmd_sweep(const CliOverrides& o, const std::vector<std::string>& grid_args,
              const std::string& out_arg) {
  vda::ExperimentConfig base = resolve_config(o);
  vda::SweepGrid grid;
  for (const std::string& arg : grid_args) {
    std::size_t eq = arg.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("grid axis must look like name=v1,v2,...: '" + arg + "'");
    vda::Vector<double> vals = parse_double_list(arg.substr(eq + 1));
    if (vals.size() == 0)
      throw ConfigError("grid axis '" + arg.substr(0, eq) + "' has no values");
    std::vector<double> values(vals.data(), vals.data() + vals.size());
    grid.emplace_back(arg.substr(0, eq), std::move(values));
  }
  auto out_dir = vda::resolve_out_dir(out_arg);
  auto points = vda::run_sweep(base, grid, out_dir);
  std::size_t ok = 0, skipped = 0, failed = 0;
  for (const auto& p : points) {
    ok += p.status == "ok";
    skipped += p.status == "skipped";
    failed += p.status == "failed";
  }
  std::cout << nlohmann::json{{"points", points.size()},
                              {"ok", ok},
                              {"skipped", skipped},
                              {"failed", failed},
                              {"summary", (out_dir / "summary.json").string()}}
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_plot(const CliOverrides& o, const std::string& checkpoint,
             const std::string& out_arg) {
  vda::ExperimentConfig config = resolve_config(o);
  auto out_dir = vda::resolve_out_dir(out_arg);
  std::filesystem::create_directories(out_dir);
  auto ckpt = vda::load_checkpoint<double>(checkpoint);
  vda::DomainDataset target = load_target_only(config);
  if (target.dim() != ckpt.bundle.spec.input_dim)
    throw ConfigError("target width does not match the checkpoint network");
  auto gmm = vda::build_virtual_domain(ckpt.bundle, config.lambda, config.metric);
  vda::PlotData data = make_plot_data(ckpt.bundle, gmm, target.inputs,
                                      config.normalize_target_features,
                                      config.seed);
  vda::write_scatter_svg(out_dir / "plot.svg", data);
  std::cout << (out_dir / "plot.svg").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"virtual-domain adaptation toolkit"};
  app.require_subcommand(1);

  CliOverrides o;
  std::string out_arg = "out";
  std::string checkpoint;
  std::string eval_side = "target";
  std::vector<std::string> grid_args;
  bool plot_flag = false;

  auto* pretrain = app.add_subcommand("pretrain", "train the source model");
  add_config_flags(pretrain, o);
  pretrain->add_option("--out", out_arg, "output directory");

  auto* adapt = app.add_subcommand("adapt", "adapt a pretrained model to the target");
  add_config_flags(adapt, o);
  adapt->add_option("--checkpoint", checkpoint, "pretrained checkpoint")->required();
  adapt->add_option("--out", out_arg, "output directory");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on labeled data");
  add_config_flags(eval, o);
  eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();
  eval->add_option("--on", eval_side, "which side to evaluate: source or target");

  auto* run = app.add_subcommand("run", "full pretrain -> adapt -> eval pipeline");
  add_config_flags(run, o);
  run->add_option("--out", out_arg, "output directory");
  run->add_flag("--plot", plot_flag, "write a 2-D feature scatter");

  auto* sweep = app.add_subcommand("sweep", "grid sweep over config fields");
  add_config_flags(sweep, o);
  sweep->add_option("--grid", grid_args, "axis as name=v1,v2,... (repeatable)")
      ->required();
  sweep->add_option("--out", out_arg, "output directory");

  auto* plot = app.add_subcommand("plot", "2-D feature scatter from a checkpoint");
  add_config_flags(plot, o);
  plot->add_option("--checkpoint", checkpoint, "checkpoint to visualize")->required();
  plot->add_option("--out", out_arg, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(o, out_arg);
    if (adapt->parsed()) return cmd_adapt(o, checkpoint, out_arg);
    if (eval->parsed()) return cmd_eval(o, checkpoint, eval_side);
    if (run->parsed()) return cmd_run(o, out_arg, plot_flag);
    if (sweep->parsed()) return cmd_sweep(o, grid_args, out_arg);
    if (plot->parsed()) return cmd_plot(o, checkpoint, out_arg);
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const vda::DivergenceError& e) {
    std::cerr << "divergence at step " << e.step << ": " << e.what() << "\n";
    return 2;
  } catch (const vda::ParseError& e) {
    std::cerr << "parse error";
    if (e.line >= 0) std::cerr << " (line " << e.line << ")";
    std::cerr << ": " << e.what() << "\n";
    return 1;
  } catch (const vda::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const vda::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 1;
  } catch (const vda::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
