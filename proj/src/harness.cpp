#include "vda/harness.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <string_view>

namespace vda {

namespace {

void check_keys(const nlohmann::json& j,
                std::initializer_list<std::string_view> allowed,
                const char* context) {
  if (!j.is_object())
    throw ConfigError(std::string(context) + " must be a json object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto k : allowed) known = known || (it.key() == k);
    if (!known)
      throw ConfigError("unknown key '" + it.key() + "' in " + context);
  }
}

nlohmann::json shift_to_json(const ShiftSpec& spec) {
  nlohmann::json translation = nlohmann::json::array();
  for (Index i = 0; i < spec.translation.size(); ++i)
    translation.push_back(spec.translation(i));
  return {{"kind", "synthetic"},
          {"family", spec.family == ShiftFamily::blobs ? "blobs" : "moons"},
          {"num_classes", spec.num_classes},
          {"samples_per_class", spec.samples_per_class},
          {"input_dim", spec.input_dim},
          {"rotation_degrees", spec.rotation_degrees},
          {"translation", translation},
          {"scale", spec.scale},
          {"noise_std", spec.noise_std}};
}

ShiftSpec shift_from_json(const nlohmann::json& j, ShiftSpec base) {
  check_keys(j,
             {"kind", "family", "num_classes", "samples_per_class", "input_dim",
              "rotation_degrees", "translation", "scale", "noise_std"},
             "dataset");
  if (j.contains("family")) {
    std::string f = j.at("family").get<std::string>();
    if (f == "blobs")
      base.family = ShiftFamily::blobs;
    else if (f == "moons")
      base.family = ShiftFamily::moons;
    else
      throw ConfigError("unknown dataset family: " + f);
  }
  if (j.contains("num_classes")) base.num_classes = j.at("num_classes").get<int>();
  if (j.contains("samples_per_class"))
    base.samples_per_class = j.at("samples_per_class").get<Index>();
  if (j.contains("input_dim")) base.input_dim = j.at("input_dim").get<Index>();
  if (j.contains("rotation_degrees"))
    base.rotation_degrees = j.at("rotation_degrees").get<double>();
  if (j.contains("translation")) {
    const auto& arr = j.at("translation");
    if (!arr.is_array()) throw ConfigError("translation must be an array");
    base.translation.resize(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
      base.translation(Index(i)) = arr[i].get<double>();
  }
  if (j.contains("scale")) base.scale = j.at("scale").get<double>();
  if (j.contains("noise_std")) base.noise_std = j.at("noise_std").get<double>();
  return base;
}

NetworkSpec network_from_json_partial(const nlohmann::json& j, NetworkSpec base) {
  check_keys(j,
             {"input_dim", "feature_dim", "hidden_widths", "num_classes",
              "discriminator_widths"},
             "network");
  if (j.contains("input_dim")) base.input_dim = j.at("input_dim").get<Index>();
  if (j.contains("feature_dim")) base.feature_dim = j.at("feature_dim").get<Index>();
  if (j.contains("hidden_widths"))
    base.hidden_widths = j.at("hidden_widths").get<std::vector<Index>>();
  if (j.contains("num_classes")) base.num_classes = j.at("num_classes").get<int>();
  if (j.contains("discriminator_widths"))
    base.discriminator_widths =
        j.at("discriminator_widths").get<std::vector<Index>>();
  return base;
}

nlohmann::json opt_to_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

std::optional<double> opt_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

void validate_config(const ExperimentConfig& config) {
  validate_spec(config.network);
  if (!(config.lambda > 0)) throw ConfigError("lambda must be positive");
  if (!(config.r_percent > 0 && config.r_percent <= 100))
    throw ConfigError("r_percent must lie in (0, 100]");
  if (!(config.eta0 > 0)) throw ConfigError("eta0 must be positive");
  if (!(config.momentum >= 0 && config.momentum < 1))
    throw ConfigError("momentum must lie in [0, 1)");
  if (!(config.weight_decay >= 0))
    throw ConfigError("weight_decay must be non-negative");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(config.extractor_lr_factor > 0))
    throw ConfigError("extractor_lr_factor must be positive");
  if (config.pretrain_epochs < 0 || config.adapt_epochs < 0)
    throw ConfigError("epoch counts must be non-negative");
  if (!(config.divergence_limit > 0))
    throw ConfigError("divergence_limit must be positive");
  if (const auto* shift = std::get_if<ShiftSpec>(&config.dataset)) {
    if (shift->num_classes != config.network.num_classes)
      throw ConfigError("dataset num_classes does not match the network");
    if (shift->input_dim != config.network.input_dim)
      throw ConfigError("dataset input_dim does not match the network");
  }
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  nlohmann::json dataset;
  if (const auto* shift = std::get_if<ShiftSpec>(&config.dataset)) {
    dataset = shift_to_json(*shift);
  } else {
    const auto& tab = std::get<TabularPair>(config.dataset);
    dataset = {{"kind", "csv"},
               {"source", tab.source_path},
               {"target", tab.target_path}};
  }
  return {{"network", network_spec_to_json(config.network)},
          {"dataset", dataset},
          {"lambda", config.lambda},
          {"r_percent", config.r_percent},
          {"eta0", config.eta0},
          {"momentum", config.momentum},
          {"weight_decay", config.weight_decay},
          {"batch_size", config.batch_size},
          {"extractor_lr_factor", config.extractor_lr_factor},
          {"pretrain_epochs", config.pretrain_epochs},
          {"adapt_epochs", config.adapt_epochs},
          {"tc_enabled", config.tc_enabled},
          {"saturating_generator", config.saturating_generator},
          {"metric", to_string(config.metric)},
          {"normalize_target_features", config.normalize_target_features},
          {"seed", config.seed},
          {"use_single_precision", config.use_single_precision},
          {"divergence_limit", config.divergence_limit}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig config;
  check_keys(j,
             {"network", "dataset", "lambda", "r_percent", "eta0", "momentum",
              "weight_decay", "batch_size", "extractor_lr_factor",
              "pretrain_epochs", "adapt_epochs", "tc_enabled",
              "saturating_generator", "metric", "normalize_target_features",
              "seed", "use_single_precision", "divergence_limit"},
             "config");
  try {
    if (j.contains("network"))
      config.network = network_from_json_partial(j.at("network"), config.network);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      std::string kind = d.value("kind", "synthetic");
      if (kind == "synthetic") {
        ShiftSpec base = std::holds_alternative<ShiftSpec>(config.dataset)
                             ? std::get<ShiftSpec>(config.dataset)
                             : ShiftSpec{};
        config.dataset = shift_from_json(d, base);
      } else if (kind == "csv") {
        check_keys(d, {"kind", "source", "target"}, "dataset");
        config.dataset = TabularPair{d.at("source").get<std::string>(),
                                     d.at("target").get<std::string>()};
      } else {
        throw ConfigError("unknown dataset kind: " + kind);
      }
    }
    if (j.contains("lambda")) config.lambda = j.at("lambda").get<double>();
    if (j.contains("r_percent")) config.r_percent = j.at("r_percent").get<double>();
    if (j.contains("eta0")) config.eta0 = j.at("eta0").get<double>();
    if (j.contains("momentum")) config.momentum = j.at("momentum").get<double>();
    if (j.contains("weight_decay"))
      config.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("batch_size")) config.batch_size = j.at("batch_size").get<Index>();
    if (j.contains("extractor_lr_factor"))
      config.extractor_lr_factor = j.at("extractor_lr_factor").get<double>();
    if (j.contains("pretrain_epochs"))
      config.pretrain_epochs = j.at("pretrain_epochs").get<Index>();
    if (j.contains("adapt_epochs"))
      config.adapt_epochs = j.at("adapt_epochs").get<Index>();
    if (j.contains("tc_enabled")) config.tc_enabled = j.at("tc_enabled").get<bool>();
    if (j.contains("saturating_generator"))
      config.saturating_generator = j.at("saturating_generator").get<bool>();
    if (j.contains("metric"))
      config.metric = distance_metric_from_string(j.at("metric").get<std::string>());
    if (j.contains("normalize_target_features"))
      config.normalize_target_features =
          j.at("normalize_target_features").get<bool>();
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("use_single_precision"))
      config.use_single_precision = j.at("use_single_precision").get<bool>();
    if (j.contains("divergence_limit"))
      config.divergence_limit = j.at("divergence_limit").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid json: " +
                      e.what());
  }
  return config_from_json(j);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& config) {
  return fnv1a_hex(config_to_json(config).dump());
}

nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json per_class = nlohmann::json::array();
  for (double a : report.per_class_accuracy)
    per_class.push_back(std::isfinite(a) ? nlohmann::json(a) : nullptr);
  nlohmann::json agreement = nlohmann::json::array();
  for (const auto& a : report.pseudo_label_agreement_curve)
    agreement.push_back(opt_to_json(a));
  return {{"per_class_accuracy", per_class},
          {"average_accuracy", opt_to_json(report.average_accuracy)},
          {"source_only_accuracy", opt_to_json(report.source_only_accuracy)},
          {"source_accuracy_on_source",
           opt_to_json(report.source_accuracy_on_source)},
          {"d_loss_curve", report.d_loss_curve},
          {"g_loss_curve", report.g_loss_curve},
          {"mean_alpha_curve", report.mean_alpha_curve},
          {"disc_accuracy_curve", report.disc_accuracy_curve},
          {"pseudo_label_agreement_curve", agreement},
          {"pseudo_count_curve", report.pseudo_count_curve},
          {"sigma_sq", report.sigma_sq},
          {"config_hash", report.config_hash},
          {"seed", report.seed},
          {"wall_time_seconds", report.wall_time_seconds}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport report;
  try {
    for (const auto& a : j.at("per_class_accuracy"))
      report.per_class_accuracy.push_back(a.is_null() ? std::nan("")
                                                      : a.get<double>());
    report.average_accuracy = opt_from_json(j.at("average_accuracy"));
    report.source_only_accuracy = opt_from_json(j.at("source_only_accuracy"));
    report.source_accuracy_on_source =
        opt_from_json(j.at("source_accuracy_on_source"));
    report.d_loss_curve = j.at("d_loss_curve").get<std::vector<double>>();
    report.g_loss_curve = j.at("g_loss_curve").get<std::vector<double>>();
    report.mean_alpha_curve = j.at("mean_alpha_curve").get<std::vector<double>>();
    report.disc_accuracy_curve =
        j.at("disc_accuracy_curve").get<std::vector<double>>();
    for (const auto& a : j.at("pseudo_label_agreement_curve"))
      report.pseudo_label_agreement_curve.push_back(opt_from_json(a));
    report.pseudo_count_curve =
        j.at("pseudo_count_curve").get<std::vector<Index>>();
    report.sigma_sq = j.at("sigma_sq").get<double>();
    report.config_hash = j.at("config_hash").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad report json: ") + e.what());
  }
  return report;
}

std::string serialized_without_wall_time(const nlohmann::json& report_json) {
  nlohmann::json copy = report_json;
  copy.erase("wall_time_seconds");
  return copy.dump();
}

std::pair<DomainDataset, DomainDataset> build_datasets(
    const ExperimentConfig& config) {
  if (const auto* shift = std::get_if<ShiftSpec>(&config.dataset)) {
    ShiftSpec seeded = *shift;
    seeded.seed = derive_seed(config.seed, 0xDA7A);
    return make_shift_pair(seeded);
  }
  const auto& tab = std::get<TabularPair>(config.dataset);
  TabularSchema schema{config.network.input_dim, config.network.num_classes};
  DomainDataset source = load_tabular(tab.source_path, schema);
  DomainDataset target = load_tabular(tab.target_path, schema);
  if (!source.labels)
    throw ConfigError("source table " + tab.source_path + " carries no labels");
  return {std::move(source), std::move(target)};
}

MetricsReport run_pipeline(const ExperimentConfig& config, Diagnostics* diag) {
  if (config.use_single_precision)
    return run_pipeline_typed<float>(config, diag).report;
  return run_pipeline_typed<double>(config, diag).report;
}

void apply_override(ExperimentConfig& config, const std::string& name,
                    double value) {
  auto as_count = [&](const char* what) {
    if (value < 0 || value != std::floor(value))
      throw ConfigError(std::string(what) + " override must be a non-negative integer");
    return Index(value);
  };
  if (name == "lambda") config.lambda = value;
  else if (name == "r_percent") config.r_percent = value;
  else if (name == "eta0") config.eta0 = value;
  else if (name == "momentum") config.momentum = value;
  else if (name == "weight_decay") config.weight_decay = value;
  else if (name == "extractor_lr_factor") config.extractor_lr_factor = value;
  else if (name == "divergence_limit") config.divergence_limit = value;
  else if (name == "batch_size") config.batch_size = as_count("batch_size");
  else if (name == "pretrain_epochs") config.pretrain_epochs = as_count("pretrain_epochs");
  else if (name == "adapt_epochs") config.adapt_epochs = as_count("adapt_epochs");
  else if (name == "seed") config.seed = std::uint64_t(as_count("seed"));
  else if (name == "tc_enabled") config.tc_enabled = value != 0;
  else if (name == "saturating_generator") config.saturating_generator = value != 0;
  else if (name == "normalize_target_features")
    config.normalize_target_features = value != 0;
  else if (name == "use_single_precision") config.use_single_precision = value != 0;
  else if (name == "noise_std" || name == "rotation_degrees" || name == "scale" ||
           name == "samples_per_class") {
    auto* shift = std::get_if<ShiftSpec>(&config.dataset);
    if (!shift)
      throw ConfigError("'" + name + "' override applies only to synthetic datasets");
    if (name == "noise_std") shift->noise_std = value;
    else if (name == "rotation_degrees") shift->rotation_degrees = value;
    else if (name == "scale") shift->scale = value;
    else shift->samples_per_class = as_count("samples_per_class");
  } else {
    throw ConfigError("unknown sweep parameter: " + name);
  }
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                  const SweepGrid& grid,
                                  const std::filesystem::path& out_dir) {
  for (const auto& [name, values] : grid) {
    if (values.empty())
      throw ConfigError("sweep axis '" + name + "' has no values");
    ExperimentConfig scratch = base;
    apply_override(scratch, name, values.front());  // validates the name early
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());

  std::size_t total = 1;
  for (const auto& axis : grid) total *= axis.second.size();

  std::vector<SweepPoint> points;
  for (std::size_t index = 0; index < total; ++index) {
    SweepPoint point;
    point.index = index;
    // Row-major decomposition: the first axis varies slowest.
    std::size_t rem = index, block = total;
    for (const auto& [name, values] : grid) {
      block /= values.size();
      point.overrides[name] = values[rem / block];
      rem %= block;
    }

    char fname[32];
    std::snprintf(fname, sizeof(fname), "point_%04zu.json", index);
    const std::filesystem::path point_path = out_dir / fname;

    if (std::filesystem::exists(point_path)) {
      point.status = "skipped";
      try {
        std::ifstream in(point_path);
        nlohmann::json stored;
        in >> stored;
        if (stored.contains("error"))
          point.error = stored.at("error").get<std::string>();
        if (stored.contains("report"))
          point.report = report_from_json(stored.at("report"));
      } catch (const std::exception& e) {
        point.error = std::string("stored point unreadable: ") + e.what();
      }
      points.push_back(std::move(point));
      continue;
    }

    ExperimentConfig config = base;
    for (const auto& [name, value] : point.overrides)
      apply_override(config, name, value);

    nlohmann::json stored{{"index", index}, {"overrides", point.overrides}};
    try {
      MetricsReport report = run_pipeline(config);
      point.status = "ok";
      point.report = report;
      stored["status"] = "ok";
      stored["report"] = report_to_json(report);
    } catch (const std::exception& e) {
      point.status = "failed";
      point.error = e.what();
      stored["status"] = "failed";
      stored["error"] = point.error;
    }
    std::ofstream out(point_path);
    if (!out) throw IoError("cannot write " + point_path.string());
    out << stored.dump(2) << "\n";
    points.push_back(std::move(point));
  }

  nlohmann::json summary = nlohmann::json::array();
  for (const auto& point : points) {
    nlohmann::json row{{"index", point.index},
                       {"overrides", point.overrides},
                       {"status", point.status}};
    if (!point.error.empty()) row["error"] = point.error;
    if (point.report)
      row["average_accuracy"] = opt_to_json(point.report->average_accuracy);
    summary.push_back(std::move(row));
  }
  std::ofstream out(out_dir / "summary.json");
  if (!out) throw IoError("cannot write sweep summary");
  out << nlohmann::json{{"points", summary}}.dump(2) << "\n";
  return points;
}

PcaBasis fit_pca(const Matrix<double>& x, Index dims) {
  if (x.rows() < 2) throw ShapeError("pca needs at least two rows");
  if (x.cols() < dims)
    throw ShapeError("pca needs at least as many columns as axes");
  PcaBasis basis;
  basis.mean = x.colwise().mean();
  Matrix<double> centered = x.rowwise() - basis.mean.transpose();
  Matrix<double> cov =
      centered.transpose() * centered / double(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Matrix<double>> solver(cov);
  if (solver.info() != Eigen::Success)
    throw ValueError("eigendecomposition failed during pca");
  basis.components.resize(dims, x.cols());
  // Eigenvalues come back ascending; take the top `dims` in descending order
  // and fix each axis sign so its largest-magnitude coordinate is positive.
  for (Index a = 0; a < dims; ++a) {
    Vector<double> axis = solver.eigenvectors().col(x.cols() - 1 - a);
    Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    basis.components.row(a) = axis.transpose();
  }
  return basis;
}

Matrix<double> apply_pca(const PcaBasis& basis, const Matrix<double>& x) {
  if (x.cols() != basis.mean.size())
    throw ShapeError("pca basis dimension mismatch");
  return (x.rowwise() - basis.mean.transpose()) * basis.components.transpose();
}

void write_scatter_svg(const std::filesystem::path& path, const PlotData& plot) {
  if (plot.target_points.cols() != 2 || plot.virtual_points.cols() != 2)
    throw ShapeError("scatter points must be 2-D");
  if (Index(plot.target_labels.size()) != plot.target_points.rows() ||
      Index(plot.virtual_labels.size()) != plot.virtual_points.rows())
    throw ShapeError("scatter labels do not match point counts");

  double lo_x = 0, hi_x = 1, lo_y = 0, hi_y = 1;
  bool first = true;
  auto widen = [&](const Matrix<double>& pts) {
    for (Index i = 0; i < pts.rows(); ++i) {
      if (first) {
        lo_x = hi_x = pts(i, 0);
        lo_y = hi_y = pts(i, 1);
        first = false;
      } else {
        lo_x = std::min(lo_x, pts(i, 0));
        hi_x = std::max(hi_x, pts(i, 0));
        lo_y = std::min(lo_y, pts(i, 1));
        hi_y = std::max(hi_y, pts(i, 1));
      }
    }
  };
  widen(plot.target_points);
  widen(plot.virtual_points);
  const double span_x = std::max(hi_x - lo_x, 1e-9);
  const double span_y = std::max(hi_y - lo_y, 1e-9);
  const double size = 640.0, margin = 40.0, inner = size - 2 * margin;
  auto sx = [&](double v) { return margin + (v - lo_x) / span_x * inner; };
  auto sy = [&](double v) { return size - margin - (v - lo_y) / span_y * inner; };

  static const char* kPalette[] = {"#4269d0", "#efb118", "#ff725c", "#6cc5b0",
                                   "#3ca951", "#ff8ab7", "#a463f2", "#97bbf5"};
  auto color = [&](int label) { return kPalette[((label % 8) + 8) % 8]; };

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << size
      << " " << size << "\">\n";
  out << "<rect width=\"" << size << "\" height=\"" << size
      << "\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" "
         "font-size=\"14\" fill=\"#333\">target (filled) vs virtual (hollow) "
         "features, 2-D projection</text>\n";
  char buf[160];
  for (Index i = 0; i < plot.virtual_points.rows(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"none\" "
                  "stroke=\"%s\" stroke-width=\"1\"/>\n",
                  sx(plot.virtual_points(i, 0)), sy(plot.virtual_points(i, 1)),
                  color(plot.virtual_labels[std::size_t(i)]));
    out << buf;
  }
  for (Index i = 0; i < plot.target_points.rows(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\" "
                  "fill-opacity=\"0.7\"/>\n",
                  sx(plot.target_points(i, 0)), sy(plot.target_points(i, 1)),
                  color(plot.target_labels[std::size_t(i)]));
    out << buf;
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed for " + path.string());
}

void emit_report(const std::filesystem::path& out_dir,
                 const ExperimentConfig& config, const MetricsReport& report,
                 const Diagnostics& diag, const PlotData* plot) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());
  {
    std::ofstream out(out_dir / "report.json");
    if (!out) throw IoError("cannot write report.json");
    out << report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir / "config.json");
    if (!out) throw IoError("cannot write config.json");
    out << config_to_json(config).dump(2) << "\n";
  }
  write_jsonl(out_dir / "diagnostics.jsonl", diag);
  if (plot) write_scatter_svg(out_dir / "plot.svg", *plot);
}

std::filesystem::path resolve_out_dir(const std::string& arg) {
  std::filesystem::path p = arg.empty() ? std::filesystem::path(".")
                                        : std::filesystem::path(arg);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("VDA_OUT_ROOT"); root && *root)
    return std::filesystem::path(root) / p;
  return p;
}

}  // namespace vda
