#include "nimp/experiment.hpp"

#include "nimp/checkpoint.hpp"
#include "nimp/error.hpp"
#include "nimp/quantize.hpp"
#include "nimp/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace nimp {
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
T get(const json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + std::string(where));
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + std::string(where) + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, std::string_view where) {
  return obj.contains(key) ? get<T>(obj, key, where) : fallback;
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "mnist") return DatasetKind::mnist;
  if (name == "fashionmnist") return DatasetKind::fashionmnist;
  if (name == "cifar10") return DatasetKind::cifar10;
  throw ConfigError("unknown dataset '" + std::string(name) + "'");
}

template <typename Parse>
auto parse_enum(const json& obj, const char* key, std::string_view where, Parse parse) {
  const auto text = get<std::string>(obj, key, where);
  try {
    return parse(text);
  } catch (const ConfigError&) {
    throw;
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

std::vector<fs::path> to_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::vector<std::string> to_strings(const std::vector<fs::path>& v) {
  std::vector<std::string> out;
  for (const auto& p : v) out.push_back(p.string());
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

std::ofstream open_output(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(12);
  return out;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::size_t expected_dimension(DatasetKind kind) { return kind == DatasetKind::cifar10 ? 3072 : 784; }

std::vector<MlpModel> load_models(const ExperimentConfig& config, std::span<const fs::path> checkpoints) {
  if (checkpoints.empty()) throw ArgumentError("no checkpoints given");
  std::vector<MlpModel> models;
  for (const auto& path : checkpoints) {
    auto model = load_checkpoint(path);
    if (model.layer_sizes != config.architecture || model.activation != config.activation)
      throw ConsistencyError(path.string() + " does not match the configured architecture");
    models.push_back(std::move(model));
  }
  return models;
}

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::fashionmnist: return "fashionmnist";
    case DatasetKind::cifar10: return "cifar10";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

std::uint64_t random_ablation_seed(const ExperimentConfig& config) {
  return derive_seed(config.seed, "random_ablation");
}

void ExperimentConfig::validate() const {
  if (architecture.size() < 3) throw ConfigError("architecture needs input, at least one hidden layer and output");
  if (std::any_of(architecture.begin(), architecture.end(), [](std::size_t s) { return s == 0; }))
    throw ConfigError("architecture contains an empty layer");
  if (architecture.front() != expected_dimension(dataset.kind))
    throw ConfigError("architecture input " + std::to_string(architecture.front()) + " does not match " +
                      std::string(to_string(dataset.kind)) + " (" +
                      std::to_string(expected_dimension(dataset.kind)) + ")");
  if (architecture.back() != 10) throw ConfigError("architecture output must have 10 classes");
  if (activation == Activation::linear) throw ConfigError("linear activations cannot be quantized");
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (quantizer_bins < 2) throw ConfigError("quantizer_bins must be at least 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in (0, 1)");
  try {
    training.validate(architecture.size() - 2);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }

  std::set<std::string> labels;
  for (const auto& plan : plans) {
    try {
      scope_neurons(architecture, plan.scope);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("plan: ") + e.what());
    }
    if (plan.ranking.measure) {
      const auto names = measure_names();
      if (std::find(names.begin(), names.end(), *plan.ranking.measure) == names.end())
        throw ConfigError("plan: unknown measure '" + *plan.ranking.measure + "'");
      if (*plan.ranking.measure == "js" && !compute_js) throw ConfigError("plan ranks by js but compute_js is false");
    }
    if (plan.step && *plan.step == 0) throw ConfigError("plan step must be at least 1");
    if (!labels.insert(plan.label()).second) throw ConfigError("duplicate plan " + plan.label());
  }

  auto require = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("dataset path '") + what + "' is not set");
    if (!fs::is_regular_file(p)) throw ConfigError(std::string("dataset file ") + p.string() + " (" + what + ") does not exist");
  };
  if (dataset.kind == DatasetKind::cifar10) {
    if (dataset.train_batches.empty() || dataset.test_batches.empty())
      throw ConfigError("cifar10 needs train_batches and test_batches");
    for (const auto& p : dataset.train_batches) require(p, "train_batches");
    for (const auto& p : dataset.test_batches) require(p, "test_batches");
  } else {
    require(dataset.train_images, "train_images");
    require(dataset.train_labels, "train_labels");
    require(dataset.test_images, "test_images");
    require(dataset.test_labels, "test_labels");
  }
}

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root,
             {"dataset", "architecture", "activation", "regularizer", "training", "validation_fraction",
              "quantizer_bins", "compute_js", "replicates", "seed", "workers", "plans", "output_dir"},
             "config");

  ExperimentConfig c;
  const auto& ds = root.contains("dataset") ? root.at("dataset") : throw ConfigError("missing key 'dataset'");
  check_keys(ds, {"name", "train_images", "train_labels", "test_images", "test_labels", "train_batches", "test_batches"},
             "dataset");
  c.dataset.kind = parse_dataset_kind(get<std::string>(ds, "name", "dataset"));
  c.dataset.train_images = get_or<std::string>(ds, "train_images", "", "dataset");
  c.dataset.train_labels = get_or<std::string>(ds, "train_labels", "", "dataset");
  c.dataset.test_images = get_or<std::string>(ds, "test_images", "", "dataset");
  c.dataset.test_labels = get_or<std::string>(ds, "test_labels", "", "dataset");
  c.dataset.train_batches = to_paths(get_or<std::vector<std::string>>(ds, "train_batches", {}, "dataset"));
  c.dataset.test_batches = to_paths(get_or<std::vector<std::string>>(ds, "test_batches", {}, "dataset"));

  c.architecture = get<std::vector<std::size_t>>(root, "architecture", "config");
  c.activation = parse_enum(root, "activation", "config", parse_activation);

  if (root.contains("regularizer")) {
    const auto& reg = root.at("regularizer");
    check_keys(reg, {"kind", "weight_decay", "dropout"}, "regularizer");
    c.training.regularizer = parse_enum(reg, "kind", "regularizer", parse_regularizer);
    c.training.weight_decay = get_or<double>(reg, "weight_decay", 0.0, "regularizer");
    c.training.dropout = get_or<std::vector<double>>(reg, "dropout", {}, "regularizer");
  }
  if (root.contains("training")) {
    const auto& tr = root.at("training");
    check_keys(tr, {"learning_rate", "momentum", "batch_size", "max_epochs", "patience", "rms_decay", "rms_epsilon"},
               "training");
    c.training.learning_rate = get_or<double>(tr, "learning_rate", c.training.learning_rate, "training");
    c.training.momentum = get_or<double>(tr, "momentum", c.training.momentum, "training");
    c.training.batch_size = get_or<std::size_t>(tr, "batch_size", c.training.batch_size, "training");
    c.training.max_epochs = get_or<std::size_t>(tr, "max_epochs", c.training.max_epochs, "training");
    c.training.patience = get_or<std::size_t>(tr, "patience", c.training.patience, "training");
    c.training.rms_decay = get_or<double>(tr, "rms_decay", c.training.rms_decay, "training");
    c.training.rms_epsilon = get_or<double>(tr, "rms_epsilon", c.training.rms_epsilon, "training");
  }

  c.validation_fraction = get_or<double>(root, "validation_fraction", c.validation_fraction, "config");
  c.quantizer_bins = get_or<std::size_t>(root, "quantizer_bins", c.quantizer_bins, "config");
  c.compute_js = get_or<bool>(root, "compute_js", c.compute_js, "config");
  c.replicates = get_or<std::size_t>(root, "replicates", c.replicates, "config");
  c.seed = get_or<std::uint64_t>(root, "seed", c.seed, "config");
  c.workers = get_or<std::size_t>(root, "workers", c.workers, "config");
  c.output_dir = get_or<std::string>(root, "output_dir", c.output_dir.string(), "config");

  if (root.contains("plans")) {
    if (!root.at("plans").is_array()) throw ConfigError("plans must be an array");
    for (const auto& p : root.at("plans")) {
      check_keys(p, {"scope", "layer", "ranking", "direction", "strategy", "step"}, "plan");
      AblationPlan plan;
      const auto scope = get<std::string>(p, "scope", "plan");
      if (scope == "layer") {
        plan.scope = AblationScope::hidden_layer(get<std::size_t>(p, "layer", "plan"));
      } else if (scope == "network") {
        if (p.contains("layer")) throw ConfigError("plan with network scope must not name a layer");
        plan.scope = AblationScope::whole_network();
      } else {
        throw ConfigError("plan scope must be 'network' or 'layer'");
      }
      const auto ranking = get<std::string>(p, "ranking", "plan");
      if (ranking == "random") {
        if (p.contains("direction")) throw ConfigError("random ranking takes no direction");
        plan.ranking.seed = 0;
      } else {
        plan.ranking.measure = ranking;
        plan.ranking.direction = p.contains("direction")
                                     ? parse_enum(p, "direction", "plan", parse_direction)
                                     : RankDirection::lowest_first;
      }
      if (p.contains("strategy")) plan.strategy = parse_enum(p, "strategy", "plan", parse_strategy);
      if (p.contains("step")) plan.step = get<std::size_t>(p, "step", "plan");
      c.plans.push_back(std::move(plan));
    }
  }
  for (auto& plan : c.plans)
    if (plan.ranking.is_random()) plan.ranking.seed = random_ablation_seed(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto c = parse_config(buffer.str());
  const fs::path base = path.parent_path();
  auto resolve = [&](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  resolve(c.dataset.train_images);
  resolve(c.dataset.train_labels);
  resolve(c.dataset.test_images);
  resolve(c.dataset.test_labels);
  for (auto& p : c.dataset.train_batches) resolve(p);
  for (auto& p : c.dataset.test_batches) resolve(p);
  resolve(c.output_dir);
  return c;
}

std::string serialize_config(const ExperimentConfig& c) {
  json root;
  json ds;
  ds["name"] = std::string(to_string(c.dataset.kind));
  if (c.dataset.kind == DatasetKind::cifar10) {
    ds["train_batches"] = to_strings(c.dataset.train_batches);
    ds["test_batches"] = to_strings(c.dataset.test_batches);
  } else {
    ds["train_images"] = c.dataset.train_images.string();
    ds["train_labels"] = c.dataset.train_labels.string();
    ds["test_images"] = c.dataset.test_images.string();
    ds["test_labels"] = c.dataset.test_labels.string();
  }
  root["dataset"] = ds;
  root["architecture"] = c.architecture;
  root["activation"] = std::string(to_string(c.activation));
  json reg;
  reg["kind"] = std::string(to_string(c.training.regularizer));
  reg["weight_decay"] = c.training.weight_decay;
  reg["dropout"] = c.training.dropout;
  root["regularizer"] = reg;
  json tr;
  tr["learning_rate"] = c.training.learning_rate;
  tr["momentum"] = c.training.momentum;
  tr["batch_size"] = c.training.batch_size;
  tr["max_epochs"] = c.training.max_epochs;
  tr["patience"] = c.training.patience;
  tr["rms_decay"] = c.training.rms_decay;
  tr["rms_epsilon"] = c.training.rms_epsilon;
  root["training"] = tr;
  root["validation_fraction"] = c.validation_fraction;
  root["quantizer_bins"] = c.quantizer_bins;
  root["compute_js"] = c.compute_js;
  root["replicates"] = c.replicates;
  root["seed"] = c.seed;
  root["workers"] = c.workers;
  json plans = json::array();
  for (const auto& plan : c.plans) {
    json p;
    if (plan.scope.is_whole_network()) {
      p["scope"] = "network";
    } else {
      p["scope"] = "layer";
      p["layer"] = *plan.scope.layer;
    }
    if (plan.ranking.is_random()) {
      p["ranking"] = "random";
    } else {
      p["ranking"] = *plan.ranking.measure;
      p["direction"] = std::string(to_string(plan.ranking.direction));
    }
    p["strategy"] = std::string(to_string(plan.strategy));
    if (plan.step) p["step"] = *plan.step;
    plans.push_back(p);
  }
  root["plans"] = plans;
  root["output_dir"] = c.output_dir.string();
  return root.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Data and measures
// ---------------------------------------------------------------------------

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  Dataset full_train, test;
  if (config.dataset.kind == DatasetKind::cifar10) {
    full_train = load_cifar10(config.dataset.train_batches);
    test = load_cifar10(config.dataset.test_batches);
  } else {
    full_train = load_idx(config.dataset.train_images, config.dataset.train_labels);
    test = load_idx(config.dataset.test_images, config.dataset.test_labels);
  }
  test.split_tag = SplitTag::test;
  if (full_train.dimension() != config.architecture.front() || test.dimension() != config.architecture.front())
    throw ConsistencyError("dataset dimension does not match the architecture input");
  auto [train, validation] = split(full_train, SplitSpec{config.validation_fraction, config.seed});
  return {std::move(train), std::move(validation), std::move(test)};
}

LayerMeasures measure_network(const MlpModel& model, const Dataset& validation, std::size_t bins,
                              bool compute_js) {
  const auto activations = record_activations(model, validation);
  LayerMeasures out;
  for (const auto& layer : activations) {
    QuantizerSpec spec{bins, model.activation, {}};
    if (spec.needs_maximum()) spec.per_neuron_max = neuron_maxima(layer);
    const auto histograms =
        layer_histograms(layer, validation.labels, spec, static_cast<std::size_t>(validation.num_classes));
    std::vector<NeuronMeasures> measures;
    measures.reserve(histograms.size());
    for (const auto& h : histograms) measures.push_back(measure_all(h, compute_js));
    out.push_back(std::move(measures));
  }
  return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("spearman needs two equally long samples");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * double(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) ma += ra[i], mb += rb[i];
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return (va == vb) ? 1.0 : 0.0;
  return cov / std::sqrt(va * vb);
}

Quartiles summarize(std::vector<double> values) {
  Quartiles q;
  q.count = values.size();
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double h = p * double(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - double(lo)) * (values[hi] - values[lo]);
  };
  q.min = values.front();
  q.max = values.back();
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  double sum = 0.0;
  for (const double v : values) sum += v;
  q.mean = sum / double(values.size());
  return q;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fs::path checkpoint_path(const ExperimentConfig& config, std::size_t replicate) {
  return config.output_dir / "checkpoints" / ("replicate_" + std::to_string(replicate) + ".nimlp");
}

std::vector<fs::path> default_checkpoints(const ExperimentConfig& config) {
  std::vector<fs::path> out;
  for (std::size_t r = 0; r < config.replicates; ++r) out.push_back(checkpoint_path(config, r));
  return out;
}

std::vector<ReplicateTraining> cmd_train(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const auto data = load_experiment_data(config);
  fs::create_directories(config.output_dir / "checkpoints");
  log << "train: " << data.train.size() << " train / " << data.validation.size() << " validation / "
      << data.test.size() << " test samples, " << config.replicates << " replicate(s)\n";

  std::vector<ReplicateTraining> results(config.replicates);
  std::mutex log_mutex;
  parallel_for(config.replicates, config.workers, [&](std::size_t r) {
    auto& out = results[r];
    out.replicate = r;
    out.seed = config.seed + r;
    TrainConfig cfg = config.training;
    cfg.seed = out.seed;
    try {
      auto trained = train(data.train, data.validation, config.architecture, config.activation, cfg);
      out.history = std::move(trained.history);
      out.best_epoch = trained.best_epoch;
      out.test_accuracy = 1.0 - evaluate(trained.model, data.test);
      out.checkpoint = checkpoint_path(config, r);
      save_checkpoint(out.checkpoint, trained.model);
    } catch (const DivergenceError& e) {
      out.status = std::string("diverged: ") + e.what();
      fs::remove(checkpoint_path(config, r));
    }
    std::lock_guard lock(log_mutex);
    log << "  replicate " << r << " (seed " << out.seed << "): " << out.status;
    if (out.status == "ok")
      log << ", best epoch " << out.best_epoch << ", test accuracy " << csv_number(out.test_accuracy);
    log << '\n';
  });

  auto history = open_output(config.output_dir / "train_log.csv");
  history << "replicate,epoch,train_loss,validation_loss\n";
  auto summary = open_output(config.output_dir / "train_summary.csv");
  summary << "replicate,seed,best_epoch,test_accuracy,status\n";
  for (const auto& r : results) {
    for (const auto& e : r.history)
      history << r.replicate << ',' << e.epoch << ',' << e.train_loss << ',' << e.validation_loss << '\n';
    summary << r.replicate << ',' << r.seed << ',' << r.best_epoch << ',' << r.test_accuracy << ','
            << (r.status == "ok" ? "ok" : "diverged") << '\n';
  }
  return results;
}

MeasureOutput cmd_measure(const ExperimentConfig& config, std::span<const fs::path> checkpoints,
                          std::ostream& log, bool dump_histograms) {
  config.validate();
  const auto models = load_models(config, checkpoints);
  const auto data = load_experiment_data(config);
  log << "measure: " << models.size() << " checkpoint(s), " << config.quantizer_bins << " bins, "
      << data.validation.size() << " validation samples\n";

  MeasureOutput out;
  out.measures.resize(models.size());
  parallel_for(models.size(), config.workers, [&](std::size_t r) {
    out.measures[r] = measure_network(models[r], data.validation, config.quantizer_bins, config.compute_js);
  });

  const fs::path dir = config.output_dir / "measures";
  for (std::size_t r = 0; r < models.size(); ++r) {
    auto csv = open_output(dir / ("replicate_" + std::to_string(r) + ".csv"));
    csv << "layer,neuron,entropy,mi,kl_selectivity,kl_argmax,js,js_argmax_bitmask,labeled_mi,labeled_argmax\n";
    auto spectrum = open_output(dir / ("specific_information_" + std::to_string(r) + ".csv"));
    spectrum << "layer,neuron,class,specific_information\n";
    for (std::size_t i = 0; i < out.measures[r].size(); ++i) {
      for (std::size_t j = 0; j < out.measures[r][i].size(); ++j) {
        const auto& m = out.measures[r][i][j];
        csv << i + 1 << ',' << j << ',' << m.entropy << ',' << m.mutual_information << ',' << m.kl_selectivity
            << ',' << m.kl_argmax << ',';
        if (m.js_separation) csv << *m.js_separation;
        csv << ',';
        if (m.js_argmax_mask) csv << *m.js_argmax_mask;
        csv << ',' << m.labeled_mi << ',' << m.labeled_mi_argmax << '\n';
        for (std::size_t c = 0; c < m.specific_information.size(); ++c)
          spectrum << i + 1 << ',' << j << ',' << c << ',' << m.specific_information[c] << '\n';
      }
    }
    if (dump_histograms) {
      auto hist = open_output(dir / ("histograms_" + std::to_string(r) + ".csv"));
      write_histogram_csv_header(hist);
      const auto activations = record_activations(models[r], data.validation);
      for (const auto& layer : activations) {
        QuantizerSpec spec{config.quantizer_bins, config.activation, {}};
        if (spec.needs_maximum()) spec.per_neuron_max = neuron_maxima(layer);
        const auto hs = layer_histograms(layer, data.validation.labels, spec, 10);
        for (std::size_t j = 0; j < hs.size(); ++j) write_histogram_csv(hist, layer.layer, j, hs[j]);
      }
    }
  }

  auto summary = open_output(dir / "summary.csv");
  summary << "layer,measure,count,min,q1,median,q3,max,mean\n";
  const auto names = measure_names();
  const std::size_t hidden = config.architecture.size() - 2;
  out.summary.assign(hidden, std::vector<Quartiles>(names.size()));
  for (std::size_t i = 0; i < hidden; ++i) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (names[k] == "js" && !config.compute_js) continue;
      std::vector<double> pooled;
      for (const auto& replicate : out.measures)
        for (const auto& m : replicate[i]) pooled.push_back(measure_value(m, names[k]));
      const auto q = summarize(std::move(pooled));
      out.summary[i][k] = q;
      summary << i + 1 << ',' << names[k] << ',' << q.count << ',' << q.min << ',' << q.q1 << ',' << q.median
              << ',' << q.q3 << ',' << q.max << ',' << q.mean << '\n';
      if (names[k] == "mi" || names[k] == "kl_selectivity")
        log << "  layer " << i + 1 << ' ' << names[k] << ": median " << csv_number(q.median) << " (q1 "
            << csv_number(q.q1) << ", q3 " << csv_number(q.q3) << ")\n";
    }
  }
  return out;
}

std::vector<ExperimentCurves> cmd_ablate(const ExperimentConfig& config, std::span<const fs::path> checkpoints,
                                         std::ostream& log) {
  config.validate();
  if (config.plans.empty()) throw ConfigError("config has no ablation plans");
  const auto models = load_models(config, checkpoints);
  const auto data = load_experiment_data(config);

  const bool need_measures = std::any_of(config.plans.begin(), config.plans.end(),
                                         [](const AblationPlan& p) { return !p.ranking.is_random(); });
  const bool need_means = std::any_of(config.plans.begin(), config.plans.end(),
                                      [](const AblationPlan& p) { return p.strategy == AblationStrategy::to_mean; });
  std::vector<LayerMeasures> measures(need_measures ? models.size() : 0);
  std::vector<NeuronMean> means(need_means ? models.size() : 0);
  parallel_for(models.size(), config.workers, [&](std::size_t r) {
    if (need_measures)
      measures[r] = measure_network(models[r], data.validation, config.quantizer_bins, config.compute_js);
    if (need_means) means[r] = compute_means(models[r], data.train);
  });

  std::vector<ExperimentCurves> curves(config.plans.size());
  std::mutex log_mutex;
  parallel_for(config.plans.size(), config.workers, [&](std::size_t p) {
    curves[p] = run_experiment(models, data.test, config.plans[p], measures, means);
    std::lock_guard lock(log_mutex);
    const auto& pts = curves[p].aggregate.points;
    log << "  " << config.plans[p].label() << ": " << pts.size() << " points, error " << csv_number(pts.front().mean_error)
        << " -> " << csv_number(pts.back().mean_error) << '\n';
  });

  const fs::path dir = config.output_dir / "curves";
  json manifest;
  manifest["seed"] = config.seed;
  manifest["replicates"] = models.size();
  manifest["quantizer_bins"] = config.quantizer_bins;
  std::vector<std::string> paths;
  for (const auto& c : checkpoints) paths.push_back(c.string());
  manifest["checkpoints"] = paths;
  json plans = json::array();
  for (std::size_t p = 0; p < config.plans.size(); ++p) {
    const auto& plan = config.plans[p];
    const auto label = plan.label();
    auto csv = open_output(dir / (label + ".csv"));
    csv << "k,mean_error,std_error\n";
    for (const auto& pt : curves[p].aggregate.points) csv << pt.k << ',' << pt.mean_error << ',' << pt.std_error << '\n';
    auto per = open_output(dir / (label + "_replicates.csv"));
    per << "replicate,k,error\n";
    for (std::size_t r = 0; r < curves[p].replicates.size(); ++r)
      for (const auto& pt : curves[p].replicates[r].points) per << r << ',' << pt.k << ',' << pt.mean_error << '\n';

    json entry;
    entry["label"] = label;
    entry["scope"] = plan.scope.is_whole_network() ? json("network") : json(*plan.scope.layer);
    entry["ranking"] = plan.ranking.is_random() ? std::string("random") : *plan.ranking.measure;
    if (!plan.ranking.is_random()) entry["direction"] = std::string(to_string(plan.ranking.direction));
    entry["strategy"] = std::string(to_string(plan.strategy));
    entry["step"] = plan.step.value_or(default_step(config.architecture, plan.scope));
    if (plan.ranking.is_random()) {
      std::vector<std::uint64_t> seeds;
      for (const auto& c : curves[p].replicates) seeds.push_back(c.plan.ranking.seed);
      entry["replicate_seeds"] = seeds;
    }
    entry["csv"] = label + ".csv";
    plans.push_back(entry);
  }
  manifest["plans"] = plans;
  auto out = open_output(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  return curves;
}

JointHistogram random_histogram(std::uint64_t seed, std::size_t bins, std::size_t classes) {
  Rng rng(seed);
  JointHistogram h(bins, classes);
  switch (rng.below(3)) {
    case 0:
      for (std::size_t t = 0; t < bins; ++t)
        for (std::size_t c = 0; c < classes; ++c) h.add(t, c, rng.below(61));
      break;
    case 1:
      for (std::size_t t = 0; t < bins; ++t)
        for (std::size_t c = 0; c < classes; ++c)
          if (rng.uniform() >= 0.6) h.add(t, c, 1 + rng.below(100));
      break;
    default: {
      std::vector<std::uint64_t> a(bins), b(classes);
      for (auto& v : a) v = rng.below(21);
      for (auto& v : b) v = rng.uniform() < 0.2 ? 0 : 1 + rng.below(20);
      for (std::size_t t = 0; t < bins; ++t)
        for (std::size_t c = 0; c < classes; ++c) h.add(t, c, a[t] * b[c]);
      break;
    }
  }
  if (h.total() == 0) h.add(0, 0, 1);
  return h;
}

MlpModel random_network(std::uint64_t seed, Activation activation, bool batch_norm) {
  Rng rng(seed);
  std::vector<std::size_t> sizes{2 + rng.below(7)};
  const auto hidden = 1 + rng.below(3);
  for (std::size_t i = 0; i < hidden; ++i) sizes.push_back(2 + rng.below(31));
  sizes.push_back(2 + rng.below(5));
  MlpModel model = MlpModel::initialize(sizes, activation, derive_seed(seed, "init"), batch_norm);
  for (auto& layer : model.layers) {
    for (Eigen::Index k = 0; k < layer.weights.size(); ++k) layer.weights.data()[k] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index k = 0; k < layer.bias.size(); ++k) layer.bias[k] = rng.uniform(-0.5, 0.5);
    if (layer.batch_norm) {
      auto& bn = *layer.batch_norm;
      for (Eigen::Index k = 0; k < bn.gamma.size(); ++k) {
        bn.gamma[k] = rng.uniform(0.5, 1.5);
        bn.beta[k] = rng.uniform(-0.5, 0.5);
        bn.running_mean[k] = rng.uniform(-0.2, 0.2);
        bn.running_var[k] = rng.uniform(0.5, 1.5);
      }
    }
  }
  return model;
}

VerifyResult cmd_verify(const VerifyOptions& options, std::ostream& log) {
  VerifyResult result;
  std::map<std::string, std::size_t> failures;
  std::map<std::string, double> worst;
  constexpr std::array<std::size_t, 3> kBins = {2, 4, 8};

  for (std::size_t i = 0; i < options.histograms; ++i) {
    const auto h = random_histogram(derive_seed(options.seed, "histogram", i), kBins[i % kBins.size()], options.classes);
    LemmaOptions lemma;
    lemma.fault_negate_kl = options.fault_negate_kl;
    for (const auto& check : lemma_oracles(h, lemma).checks) {
      auto [it, inserted] = worst.emplace(check.name, check.slack);
      if (!inserted) it->second = std::min(it->second, check.slack);
      if (!check.passed) ++failures[check.name];
    }
  }
  for (const auto& [name, slack] : worst) {
    const auto failed = failures.count(name) ? failures[name] : 0;
    log << (failed ? "FAIL " : "pass ") << name << ": worst slack " << csv_number(slack) << " over "
        << options.histograms << " histograms";
    if (failed) log << " (" << failed << " failures)";
    log << '\n';
  }

  std::size_t grad_failures = 0;
  for (std::size_t n = 0; n < options.networks; ++n) {
    const auto activation = n % 2 == 0 ? Activation::sigmoid : Activation::relu;
    const auto model = random_network(derive_seed(options.seed, "network", n), activation);
    Rng rng(derive_seed(options.seed, "batch", n));
    const std::size_t rows = 1 + rng.below(8);
    Matrix batch(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(model.input_size()));
    for (Eigen::Index k = 0; k < batch.size(); ++k) batch.data()[k] = rng.uniform(-1.0, 1.0);
    std::vector<int> labels(rows);
    for (auto& y : labels) y = static_cast<int>(rng.below(model.num_classes()));
    const double err = grad_check(model, batch, labels);
    result.worst_gradient_error = std::max(result.worst_gradient_error, err);
    if (err >= 1e-5) ++grad_failures;
  }
  log << (grad_failures ? "FAIL " : "pass ") << "GradientCheck: worst relative error "
      << csv_number(result.worst_gradient_error) << " over " << options.networks << " networks\n";
  if (grad_failures) failures["GradientCheck"] = grad_failures;

  for (const auto& [name, count] : failures) result.failures.push_back(name);
  result.passed = result.failures.empty();
  return result;
}

fs::path cmd_report(const ExperimentConfig& config, std::ostream& out) {
  const fs::path dir = config.output_dir / "curves";
  if (!fs::is_directory(dir)) throw ArgumentError("no curves in " + dir.string() + "; run 'ablate' first");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() == ".csv" && name.find("_replicates") == std::string::npos)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  const fs::path report_path = config.output_dir / "report.csv";
  auto report = open_output(report_path);
  report << "curve,k,mean_error,std_error\n";
  out << std::left << std::setw(48) << "curve" << std::right << std::setw(8) << "points" << std::setw(12)
      << "err@0" << std::setw(12) << "err@mid" << std::setw(12) << "err@end" << '\n';
  for (const auto& file : files) {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> rows;
    while (std::getline(in, line))
      if (!line.empty()) rows.push_back(line);
    const auto curve = file.stem().string();
    for (const auto& row : rows) report << curve << ',' << row << '\n';
    if (rows.empty()) continue;
    auto error_of = [](const std::string& row) {
      const auto a = row.find(','), b = row.find(',', a + 1);
      return row.substr(a + 1, b - a - 1);
    };
    out << std::left << std::setw(48) << curve << std::right << std::setw(8) << rows.size() << std::setw(12)
        << error_of(rows.front()) << std::setw(12) << error_of(rows[rows.size() / 2]) << std::setw(12)
        << error_of(rows.back()) << '\n';
  }
  return report_path;
}

}  // namespace nimp
