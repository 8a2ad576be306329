#include "ldlf/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldlf/data.hpp"
#include "ldlf/error.hpp"
#include "ldlf/forest.hpp"
#include "ldlf/metrics.hpp"
#include "ldlf/serialization.hpp"
#include "ldlf/synth.hpp"
#include "ldlf/training.hpp"

namespace ldlf::cli {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// TrainConfig fields exposed as flags and as flat keys of a JSON config file.
/// Precedence: defaults < config file < flags.
class TrainOptions {
 public:
  void attach(CLI::App& app) {
    bind(app, "--trees", &TrainConfig::tree_count, "number of trees K");
    bind(app, "--tree-depth", &TrainConfig::tree_depth, "tree depth h");
    bind(app, "--output-units", &TrainConfig::output_units,
         "output units M of the feature function (M >= 2^(h-1)-1)");
    bind(app, "--leaf-iters", &TrainConfig::leaf_update_iters, "leaf update iterations per phase");
    bind(app, "--buffer-batches", &TrainConfig::buffer_batches,
         "mini-batches retained between leaf phases");
    bind(app, "--batch-size", &TrainConfig::batch_size, "mini-batch size");
    bind(app, "--max-iterations", &TrainConfig::max_iterations, "total SGD steps");
    bind(app, "--learning-rate", &TrainConfig::learning_rate, "SGD learning rate");
    bind(app, "--momentum", &TrainConfig::momentum, "SGD momentum in [0, 1)");
    bind(app, "--theta-std", &TrainConfig::theta_init_std, "std of the Gaussian Theta init");
    bind(app, "--seed", &TrainConfig::seed, "random seed");
    bind(app, "--threads", &TrainConfig::threads, "worker threads (1 = sequential path)");
    bind(app, "--epsilon", &TrainConfig::epsilon, "numerical floor");
    bind_flag(app, "--early-stop", &TrainConfig::early_stop,
              "stop when the windowed loss stops improving");
    no_bias_ = app.add_flag("--no-bias", "drop the bias column of the feature function");
    app.add_option("--config", config_path_, "JSON file with flat keys mirroring the flags");
  }

  TrainConfig resolve() const {
    TrainConfig config;
    if (!config_path_.empty()) {
      json doc;
      try {
        doc = json::parse(read_file(config_path_));
      } catch (const json::exception& e) {
        throw ConfigError("config file: " + std::string(e.what()));
      }
      if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
      for (const auto& [key, value] : doc.items()) {
        if (key == "bias") {
          config.bias = value.get<bool>();
          continue;
        }
        const auto it = std::find_if(fields_.begin(), fields_.end(),
                                     [&](const Field& f) { return f.key == key; });
        if (it == fields_.end()) throw ConfigError("config file: unknown key '" + key + "'");
        try {
          it->from_json(config, value);
        } catch (const json::exception& e) {
          throw ConfigError("config file: bad value for '" + key + "': " + e.what());
        }
      }
    }
    for (const auto& f : fields_) {
      if (f.option->count() > 0) f.from_flags(config, flags_);
    }
    if (no_bias_->count() > 0) config.bias = false;
    return config;
  }

 private:
  struct Field {
    std::string key;
    CLI::Option* option;
    std::function<void(TrainConfig&, const TrainConfig&)> from_flags;
    std::function<void(TrainConfig&, const json&)> from_json;
  };

  template <class T>
  void bind(CLI::App& app, const std::string& flag, T TrainConfig::*member,
            const std::string& desc) {
    auto* option = app.add_option(flag, flags_.*member, desc)->capture_default_str();
    record(flag, option, member);
  }

  void bind_flag(CLI::App& app, const std::string& flag, bool TrainConfig::*member,
                 const std::string& desc) {
    record(flag, app.add_flag(flag, flags_.*member, desc), member);
  }

  template <class T>
  void record(const std::string& flag, CLI::Option* option, T TrainConfig::*member) {
    fields_.push_back(
        {flag.substr(2), option,
         [member](TrainConfig& dst, const TrainConfig& src) { dst.*member = src.*member; },
         [member](TrainConfig& dst, const json& v) { dst.*member = v.get<T>(); }});
  }

  TrainConfig flags_;
  std::vector<Field> fields_;
  CLI::Option* no_bias_ = nullptr;
  std::string config_path_;
};

struct DatasetOptions {
  std::string path;
  std::string format;

  void attach(CLI::App& app, bool required = true) {
    auto* opt = app.add_option("--dataset", path, "dataset file (.ldl or .csv)");
    if (required) opt->required();
    app.add_option("--format", format, "dataset format (default: from extension)")
        ->check(CLI::IsMember({"ldl", "csv"}));
  }

  DatasetFormat resolved_format(const std::string& file) const {
    return format.empty() ? format_from_extension(file) : parse_format(format);
  }

  Dataset load() const { return load_dataset(path, resolved_format(path)); }
};

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    write_file(path, content);
  }
}

// ---------------------------------------------------------------------------

struct TrainCommand {
  DatasetOptions data;
  TrainOptions options;
  std::string model_out;
  std::string log_path;
  std::size_t log_every = 100;

  void attach(CLI::App& app) {
    data.attach(app);
    options.attach(app);
    app.add_option("--out", model_out, "model JSON to write")->required();
    app.add_option("--log", log_path, "training log (.tsv)");
    app.add_option("--log-every", log_every, "SGD steps between log lines")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  int run(std::ostream& out) const {
    const auto config = options.resolve();
    validate(config);
    const auto dataset = data.load();

    std::unique_ptr<std::ofstream> log;
    if (!log_path.empty()) {
      log = std::make_unique<std::ofstream>(log_path, std::ios::binary);
      if (!*log) throw IoError("cannot write log '" + log_path + "'");
      *log << "iteration\tloss\tseconds\n";
    }
    const auto start = std::chrono::steady_clock::now();
    const auto total = config.max_iterations;
    const auto every = log_every;
    ProgressSink sink = [&](const TrainEvent& e) {
      if (!log || e.kind != TrainEvent::Kind::kSgdStep) return;
      if (e.iteration % every != 0 && e.iteration != total) return;
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      *log << e.iteration << '\t' << format_double(e.loss) << '\t' << elapsed.count() << '\n';
    };
    const auto forest = train(dataset, config, sink);
    save_forest(forest, model_out);
    out << "trained " << config.tree_count << " trees (depth " << config.tree_depth << ") on "
        << dataset.size() << " samples; model written to " << model_out << "\n";
    return kSuccess;
  }
};

struct PredictCommand {
  DatasetOptions data;
  std::string model_path;
  std::string out_path;

  void attach(CLI::App& app) {
    data.attach(app);
    app.add_option("--model", model_path, "model JSON")->required();
    app.add_option("--out", out_path, "prediction file (default: stdout)");
  }

  int run(std::ostream& out) const {
    const auto forest = load_forest(model_path);
    const auto dataset = data.load();
    if (dataset.feature_dim() != forest.input_dim()) {
      throw ConfigError("dataset has " + std::to_string(dataset.feature_dim()) +
                        " features, model expects " + std::to_string(forest.input_dim()));
    }
    std::string text;
    for (const auto& sample : dataset.samples()) {
      const auto g = forest_predict(forest, sample.features);
      for (double p : g.probs()) text += format_double(p) + "\t";
      text += std::to_string(g.argmax()) + "\n";
    }
    emit(out_path, text, out);
    return kSuccess;
  }
};

struct EvalCommand {
  DatasetOptions data;
  std::string model_path;
  std::string out_path;

  void attach(CLI::App& app) {
    data.attach(app);
    app.add_option("--model", model_path, "model JSON")->required();
    app.add_option("--out", out_path, "report JSON");
  }

  int run(std::ostream& out) const {
    const auto forest = load_forest(model_path);
    const auto report = evaluate(forest, data.load());
    if (!out_path.empty()) write_file(out_path, format_report_json(report, "evaluation"));
    out << format_report_table(report, "evaluation over samples");
    return kSuccess;
  }
};

struct CvCommand {
  DatasetOptions data;
  TrainOptions options;
  std::size_t folds = 10;
  std::string out_path;

  void attach(CLI::App& app) {
    data.attach(app);
    options.attach(app);
    app.add_option("--folds", folds, "number of folds")->capture_default_str();
    app.add_option("--out", out_path, "report JSON");
  }

  int run(std::ostream& out) const {
    const auto config = options.resolve();
    validate(config);
    const auto dataset = data.load();
    const auto report = cross_validate(dataset, config, folds, config.seed);
    if (!out_path.empty()) write_file(out_path, format_report_json(report, "cross-validation"));
    out << format_report_table(report, std::to_string(folds) + "-fold cross-validation");
    return kSuccess;
  }
};

struct SweepCommand {
  DatasetOptions data;
  TrainOptions options;
  std::size_t folds = 10;
  std::string axis;
  std::vector<std::size_t> values;
  std::string out_path;

  void attach(CLI::App& app) {
    data.attach(app);
    options.attach(app);
    app.add_option("--folds", folds, "number of folds")->capture_default_str();
    app.add_option("--axis", axis, "parameter to vary")
        ->required()
        ->check(CLI::IsMember({"tree_count", "tree_depth"}));
    app.add_option("--values", values, "comma-separated values")->delimiter(',');
    app.add_option("--out", out_path, "sweep table (.tsv, default: stdout)");
  }

  int run(std::ostream& out, std::ostream& err) const {
    if (values.empty()) throw ConfigError("sweep requires a non-empty --values list");
    const auto base = options.resolve();
    const auto dataset = data.load();

    std::string table = axis;
    for (auto m : kAllMeasures) {
      table += "\t" + std::string(measure_name(m)) + "_mean\t" + std::string(measure_name(m)) + "_std";
    }
    table += "\n";
    std::size_t completed = 0;
    for (auto value : values) {
      auto config = base;
      if (axis == "tree_count") {
        config.tree_count = value;
      } else {
        config.tree_depth = value;
        // Depth sweeps pair each depth with M = 2^(h-1).
        if (value >= 2 && value <= 30) config.output_units = std::size_t{1} << (value - 1);
      }
      try {
        validate(config);
        const auto report = cross_validate(dataset, config, folds, config.seed);
        table += std::to_string(value);
        for (auto m : kAllMeasures) {
          table += "\t" + format_double(report[m].mean) + "\t" + format_double(report[m].std);
        }
        table += "\n";
        ++completed;
      } catch (const ConfigError& e) {
        err << "skipping " << axis << "=" << value << ": " << e.what() << "\n";
      }
    }
    emit(out_path, table, out);
    return completed > 0 ? kSuccess : kConfigError;
  }
};

struct SynthCommand {
  SynthSpec spec;
  std::string mode = "two-component-mixture";
  std::string out_path;
  std::string truth_path;
  std::string format;

  void attach(CLI::App& app) {
    app.add_option("--out", out_path, "dataset file to write")->required();
    app.add_option("--truth", truth_path, "ground-truth sidecar (default: <out>.truth.json)");
    app.add_option("--samples", spec.samples, "sample count N")->capture_default_str();
    app.add_option("--features", spec.features, "feature dimension m")->capture_default_str();
    app.add_option("--labels", spec.labels, "label count C")->capture_default_str();
    app.add_option("--components", spec.components, "generating components")->capture_default_str();
    app.add_option("--mode", mode, "gaussian-unimodal or two-component-mixture")
        ->capture_default_str()
        ->check(CLI::IsMember({"gaussian-unimodal", "two-component-mixture"}));
    app.add_option("--noise", spec.noise, "target noise level")->capture_default_str();
    app.add_option("--sigma", spec.sigma, "Gaussian width in label indices")->capture_default_str();
    app.add_option("--center-scale", spec.center_scale, "spread of component centers")
        ->capture_default_str();
    app.add_option("--seed", spec.seed, "random seed")->capture_default_str();
    app.add_option("--format", format, "dataset format (default: from extension)")
        ->check(CLI::IsMember({"ldl", "csv"}));
  }

  int run(std::ostream& out) const {
    auto resolved = spec;
    resolved.mode = parse_synth_mode(mode);
    const auto result = synthesize(resolved);
    const auto fmt = format.empty() ? format_from_extension(out_path) : parse_format(format);
    save_dataset(result.dataset, out_path, fmt);
    const auto sidecar = truth_path.empty() ? out_path + ".truth.json" : truth_path;
    write_file(sidecar, ground_truth_json(resolved, result));
    out << "wrote " << result.dataset.size() << " samples to " << out_path << "\n";
    return kSuccess;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label distribution learning forests"};
  app.name("ldlf");
  app.require_subcommand(1);

  TrainCommand train_cmd;
  PredictCommand predict_cmd;
  EvalCommand eval_cmd;
  CvCommand cv_cmd;
  SweepCommand sweep_cmd;
  SynthCommand synth_cmd;
  auto* train_app = app.add_subcommand("train", "train a forest on a dataset");
  auto* predict_app = app.add_subcommand("predict", "predict label distributions");
  auto* eval_app = app.add_subcommand("eval", "evaluate a model on a dataset");
  auto* cv_app = app.add_subcommand("cv", "k-fold cross-validation");
  auto* sweep_app = app.add_subcommand("sweep", "cross-validate across tree counts or depths");
  auto* synth_app = app.add_subcommand("synth", "generate a synthetic dataset");
  train_cmd.attach(*train_app);
  predict_cmd.attach(*predict_app);
  eval_cmd.attach(*eval_app);
  cv_cmd.attach(*cv_app);
  sweep_cmd.attach(*sweep_app);
  synth_cmd.attach(*synth_app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    if (train_app->parsed()) return train_cmd.run(out);
    if (predict_app->parsed()) return predict_cmd.run(out);
    if (eval_app->parsed()) return eval_cmd.run(out);
    if (cv_app->parsed()) return cv_cmd.run(out);
    if (sweep_app->parsed()) return sweep_cmd.run(out, err);
    if (synth_app->parsed()) return synth_cmd.run(out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  }
  return kConfigError;
}

}  // namespace ldlf::cli
