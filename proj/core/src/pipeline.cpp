#include "harfuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "harfuse/container.hpp"
#include "harfuse/errors.hpp"
#include "harfuse/rng.hpp"
#include "harfuse/signal_image.hpp"

#ifndef HARFUSE_VERSION
#define HARFUSE_VERSION "0.0.0"
#endif

namespace harfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Error config_error(const std::string& why) { return Error(ErrorCode::config, "config: " + why); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw config_error("unknown key '" + key + "' in " + where);
  }
}

json gabor_to_json(const GaborParams& p) {
  return {{"envelope", p.envelope},
          {"sigma", p.sigma},
          {"frequency", p.frequency},
          {"orientation", p.orientation},
          {"phase", p.phase}};
}

json evaluation_to_json(const Evaluation& e) {
  json per_class = json::array();
  for (double a : e.per_class_accuracy) per_class.push_back(std::isnan(a) ? json(nullptr) : json(a));
  return {{"accuracy", e.accuracy}, {"per_class_accuracy", per_class}, {"confusion", e.confusion}};
}

json series_to_json(const AccuracySeries& s) {
  return {{"accuracies", s.accuracies}, {"mean", s.mean}, {"std", s.stddev}};
}

void write_confusion_csv(const fs::path& path, const std::vector<std::vector<std::size_t>>& m,
                         const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "true\\predicted";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << names[i];
    for (std::size_t v : m[i]) out << ',' << v;
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

std::uint64_t hash_training_set(const PipelineConfig& config, const RepeatData& r, Domain d,
                                const CnnArchitecture& arch) {
  Fnv1a h;
  const json key = {{"arch", json::parse(config_to_json(config)).at("cnn")},
                    {"classes", arch.classes},
                    {"domain", std::string(to_string(d))},
                    {"version", HARFUSE_VERSION}};
  const std::string text = key.dump();
  h.update(text.data(), text.size());
  for (const auto& img : r.train_images[static_cast<std::size_t>(d)]) {
    h.update(img.pixels.values());
    h.update(&img.meta.label, sizeof img.meta.label);
  }
  return h.digest();
}

RunReport run(const PipelineConfig& config, const PipelineHooks& hooks, bool ablate) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = ingest(config);

  RunReport report;
  report.version = version_string();
  report.mode = ablate ? "ablate" : "run";
  report.dataset = data.manifest.name;
  report.class_names = data.manifest.class_names;
  report.config_json = config_to_json(config);
  const std::size_t classes = data.manifest.class_names.size();

  for (std::size_t r = 0; r < config.split.repeats; ++r) {
    const auto tr = std::chrono::steady_clock::now();
    auto annotate = [&](const char* stage, auto&& fn) {
      try {
        return fn();
      } catch (const Error& e) {
        throw Error(e.code(), "repeat " + std::to_string(r) + ", " + stage + ": " + e.what());
      }
    };

    const RepeatData rd = annotate("prepare", [&] { return prepare_repeat(config, data, r, hooks); });
    RepeatResult result;
    result.repeat = r;
    result.train_windows = rd.train.size();
    result.test_windows = rd.test.size();
    Fnv1a model_hash;

    std::array<FeatureMatrix, kDomainCount> train_features;
    std::array<FeatureMatrix, kDomainCount> test_features;
    for (std::size_t d = 0; d < kDomainCount; ++d) {
      const Domain domain = static_cast<Domain>(d);
      const CnnModel cnn = annotate("cnn", [&] { return train_domain_cnn(config, data, rd, domain); });
      const std::uint64_t h = parameter_hash(cnn);
      model_hash.update(&h, sizeof h);
      train_features[d] = extract_features(cnn, rd.train_images[d]);
      test_features[d] = extract_features(cnn, rd.test_images[d]);
    }

    const TwoStageResult fusion = annotate("cca", [&] {
      return two_stage_fuse(train_features[0], train_features[1], train_features[2], config.cca_ridge,
                            config.stage_order);
    });
    for (const CcaModel* m : {&fusion.models.stage1, &fusion.models.stage2}) {
      const std::uint64_t h = parameter_hash(*m);
      model_hash.update(&h, sizeof h);
    }
    result.stage1_lambdas = fusion.models.stage1.lambdas;
    result.stage2_lambdas = fusion.models.stage2.lambdas;
    const FusedFeatures fused_test =
        fusion.models.apply({&test_features[0], &test_features[1], &test_features[2]});

    annotate("svm", [&] {
      const SvmModel svm = svm_train(fusion.fused.values, rd.train_labels, config.svm, classes);
      const std::uint64_t h = parameter_hash(svm);
      model_hash.update(&h, sizeof h);
      result.fused = evaluate(svm, fused_test.values, rd.test_labels);
      if (ablate) {
        for (std::size_t d = 0; d < kDomainCount; ++d) {
          const SvmModel single = svm_train(train_features[d].values, rd.train_labels, config.svm, classes);
          const std::uint64_t hs = parameter_hash(single);
          model_hash.update(&hs, sizeof hs);
          result.domains[d] = evaluate(single, test_features[d].values, rd.test_labels);
        }
      }
      return 0;
    });

    result.model_hash = model_hash.digest();
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - tr).count();
    report.repeats.push_back(std::move(result));
  }

  std::vector<double> fused;
  for (const auto& r : report.repeats) fused.push_back(r.fused.accuracy);
  report.fused = summarize(fused);
  if (ablate) {
    for (std::size_t d = 0; d < kDomainCount; ++d) {
      std::vector<double> acc;
      for (const auto& r : report.repeats) acc.push_back(r.domains[d]->accuracy);
      report.domains[d] = summarize(acc);
    }
  }
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

std::string version_string() { return std::string("harfuse ") + HARFUSE_VERSION; }

void PipelineConfig::validate() const {
  if (dataset_root.empty()) throw config_error("dataset_root is required");
  if (!fs::is_directory(dataset_root))
    throw config_error("dataset_root '" + dataset_root.string() + "' is not a directory");
  if (output_dir.empty()) throw config_error("output_dir must not be empty");
  if (!(window_overlap >= 0.0 && window_overlap < 1.0)) throw config_error("window_overlap must lie in [0, 1)");
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
    throw config_error("split.train_fraction must lie in (0, 1)");
  if (split.repeats < 1) throw config_error("split.repeats must be at least 1");
  if (gabor_filters.empty()) throw config_error("gabor.filters must not be empty");
  if (gabor_half_width < 1) throw config_error("gabor.half_width must be at least 1");
  for (const auto& g : gabor_filters) {
    try {
      g.validate();
    } catch (const Error& e) {
      throw config_error(e.what());
    }
  }
  try {
    cnn.validate();
    CnnArchitecture probe = cnn_architecture;
    probe.classes = std::max<std::size_t>(probe.classes, 2);
    (void)probe.shapes();
    svm.validate();
  } catch (const Error& e) {
    throw config_error(e.what());
  }
  if (!(cca_ridge >= 0.0)) throw config_error("cca.ridge_scale must be non-negative");
  validate_stage_order(stage_order);
  std::set<Domain> enabled(domains.begin(), domains.end());
  if (enabled.size() != kDomainCount || domains.size() != kDomainCount)
    throw config_error("fusion requires three domains (spatial, frequency, time_spectrum)");
}

PipelineConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw config_error("top level must be an object");

  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_relative() ? base_dir / path : path;
  };
  try {
    reject_unknown(doc,
                   {"dataset_root", "output_dir", "cache_dir", "window_overlap", "split", "augmentation",
                    "gabor", "cnn", "cca", "svm", "domains"},
                   "config");
    if (!doc.contains("dataset_root")) throw config_error("dataset_root is required");
    c.dataset_root = resolve(doc.at("dataset_root").get<std::string>());
    if (doc.contains("output_dir")) c.output_dir = resolve(doc["output_dir"].get<std::string>());
    if (doc.contains("cache_dir") && !doc["cache_dir"].get<std::string>().empty())
      c.cache_dir = resolve(doc["cache_dir"].get<std::string>());
    c.window_overlap = doc.value("window_overlap", c.window_overlap);

    if (doc.contains("split")) {
      const json& s = doc["split"];
      reject_unknown(s, {"seed", "train_fraction", "repeats", "stratified", "split_before_augmentation",
                         "subject_holdout"},
                     "split");
      c.split.seed = s.value("seed", c.split.seed);
      c.split.train_fraction = s.value("train_fraction", c.split.train_fraction);
      const auto repeats = s.value("repeats", static_cast<long long>(c.split.repeats));
      if (repeats < 1) throw config_error("split.repeats must be at least 1");
      c.split.repeats = static_cast<std::size_t>(repeats);
      c.split.stratified = s.value("stratified", c.split.stratified);
      c.split.split_before_augmentation = s.value("split_before_augmentation", c.split.split_before_augmentation);
      c.split.subject_holdout = s.value("subject_holdout", c.split.subject_holdout);
    }
    if (doc.contains("augmentation")) {
      const json& a = doc["augmentation"];
      reject_unknown(a, {"enabled", "seed"}, "augmentation");
      c.augment = a.value("enabled", c.augment);
      c.augment_seed = a.value("seed", c.augment_seed);
    }
    if (doc.contains("gabor")) {
      const json& g = doc["gabor"];
      reject_unknown(g, {"half_width", "filters"}, "gabor");
      c.gabor_half_width = g.value("half_width", c.gabor_half_width);
      if (g.contains("filters")) {
        c.gabor_filters.clear();
        for (const auto& f : g["filters"]) {
          reject_unknown(f, {"envelope", "sigma", "frequency", "orientation", "phase"}, "gabor.filters");
          GaborParams p;
          p.envelope = f.value("envelope", p.envelope);
          p.sigma = f.value("sigma", p.sigma);
          p.frequency = f.value("frequency", p.frequency);
          p.orientation = f.value("orientation", p.orientation);
          p.phase = f.value("phase", p.phase);
          c.gabor_filters.push_back(p);
        }
      }
    }
    if (doc.contains("cnn")) {
      const json& n = doc["cnn"];
      reject_unknown(n, {"momentum", "initial_learning_rate", "lr_drop_factor", "lr_drop_period", "l2_weight",
                         "max_epochs", "minibatch_size", "seed", "architecture"},
                     "cnn");
      TrainConfig& t = c.cnn;
      t.momentum = n.value("momentum", t.momentum);
      t.initial_learning_rate = n.value("initial_learning_rate", t.initial_learning_rate);
      t.lr_drop_factor = n.value("lr_drop_factor", t.lr_drop_factor);
      t.lr_drop_period = n.value("lr_drop_period", t.lr_drop_period);
      t.l2_weight = n.value("l2_weight", t.l2_weight);
      t.max_epochs = n.value("max_epochs", t.max_epochs);
      t.minibatch_size = n.value("minibatch_size", t.minibatch_size);
      t.seed = n.value("seed", t.seed);
      if (n.contains("architecture")) {
        const json& a = n["architecture"];
        reject_unknown(a, {"conv1_filters", "conv1_kernel", "conv2_filters", "conv2_kernel", "pool", "fc_units"},
                       "cnn.architecture");
        CnnArchitecture& arch = c.cnn_architecture;
        arch.conv1_filters = a.value("conv1_filters", arch.conv1_filters);
        arch.conv1_kernel = a.value("conv1_kernel", arch.conv1_kernel);
        arch.conv2_filters = a.value("conv2_filters", arch.conv2_filters);
        arch.conv2_kernel = a.value("conv2_kernel", arch.conv2_kernel);
        arch.pool = a.value("pool", arch.pool);
        arch.fc_units = a.value("fc_units", arch.fc_units);
      }
    }
    if (doc.contains("cca")) {
      const json& k = doc["cca"];
      reject_unknown(k, {"ridge_scale", "stage_order"}, "cca");
      c.cca_ridge = k.value("ridge_scale", c.cca_ridge);
      if (k.contains("stage_order")) {
        const auto names = k["stage_order"].get<std::vector<std::string>>();
        if (names.size() != kDomainCount) throw config_error("cca.stage_order must list three domains");
        for (std::size_t i = 0; i < kDomainCount; ++i) {
          const auto d = parse_domain(names[i]);
          if (!d) throw config_error("unknown domain '" + names[i] + "' in cca.stage_order");
          c.stage_order[i] = *d;
        }
      }
    }
    if (doc.contains("svm")) {
      const json& s = doc["svm"];
      reject_unknown(s, {"lambda", "epochs", "seed"}, "svm");
      c.svm.lambda = s.value("lambda", c.svm.lambda);
      c.svm.epochs = s.value("epochs", c.svm.epochs);
      c.svm.seed = s.value("seed", c.svm.seed);
    }
    if (doc.contains("domains")) {
      c.domains.clear();
      for (const auto& name : doc["domains"].get<std::vector<std::string>>()) {
        const auto d = parse_domain(name);
        if (!d) throw config_error("unknown domain '" + name + "'");
        c.domains.push_back(*d);
      }
    }
  } catch (const json::exception& e) {
    throw config_error(e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  PipelineConfig c = parse_config(text, path.parent_path());
  if (const char* out = std::getenv("HARFUSE_OUT"); out != nullptr && *out != '\0') c.output_dir = out;
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  json filters = json::array();
  for (const auto& g : c.gabor_filters) filters.push_back(gabor_to_json(g));
  std::vector<std::string> order;
  for (Domain d : c.stage_order) order.emplace_back(to_string(d));
  std::vector<std::string> domains;
  for (Domain d : c.domains) domains.emplace_back(to_string(d));
  const json doc = {
      {"dataset_root", c.dataset_root.string()},
      {"output_dir", c.output_dir.string()},
      {"cache_dir", c.cache_dir.string()},
      {"window_overlap", c.window_overlap},
      {"split",
       {{"seed", c.split.seed},
        {"train_fraction", c.split.train_fraction},
        {"repeats", c.split.repeats},
        {"stratified", c.split.stratified},
        {"split_before_augmentation", c.split.split_before_augmentation},
        {"subject_holdout", c.split.subject_holdout}}},
      {"augmentation", {{"enabled", c.augment}, {"seed", c.augment_seed}}},
      {"gabor", {{"half_width", c.gabor_half_width}, {"filters", filters}}},
      {"cnn",
       {{"momentum", c.cnn.momentum},
        {"initial_learning_rate", c.cnn.initial_learning_rate},
        {"lr_drop_factor", c.cnn.lr_drop_factor},
        {"lr_drop_period", c.cnn.lr_drop_period},
        {"l2_weight", c.cnn.l2_weight},
        {"max_epochs", c.cnn.max_epochs},
        {"minibatch_size", c.cnn.minibatch_size},
        {"seed", c.cnn.seed},
        {"architecture",
         {{"conv1_filters", c.cnn_architecture.conv1_filters},
          {"conv1_kernel", c.cnn_architecture.conv1_kernel},
          {"conv2_filters", c.cnn_architecture.conv2_filters},
          {"conv2_kernel", c.cnn_architecture.conv2_kernel},
          {"pool", c.cnn_architecture.pool},
          {"fc_units", c.cnn_architecture.fc_units}}}}},
      {"cca", {{"ridge_scale", c.cca_ridge}, {"stage_order", order}}},
      {"svm", {{"lambda", c.svm.lambda}, {"epochs", c.svm.epochs}, {"seed", c.svm.seed}}},
      {"domains", domains},
  };
  return doc.dump();
}

AccuracySeries summarize(std::vector<double> accuracies) {
  AccuracySeries s;
  s.accuracies = std::move(accuracies);
  if (s.accuracies.empty()) return s;
  const double n = static_cast<double>(s.accuracies.size());
  s.mean = std::accumulate(s.accuracies.begin(), s.accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : s.accuracies) ss += (a - s.mean) * (a - s.mean);
  s.stddev = std::sqrt(ss / n);
  return s;
}

Dataset ingest(const PipelineConfig& config) {
  Dataset d;
  d.manifest = load_manifest(config.dataset_root);
  d.windows = load_windows(d.manifest, config.window_overlap);
  if (d.windows.empty()) throw Error(ErrorCode::empty_dataset, "dataset produced no windows");
  if (d.manifest.class_names.size() < 2)
    throw Error(ErrorCode::degenerate_labels, "dataset must define at least two classes");
  return d;
}

RepeatData prepare_repeat(const PipelineConfig& config, const Dataset& data, std::size_t repeat,
                          const PipelineHooks& hooks) {
  const SplitIndices idx = split(data.windows, config.split, repeat);
  RepeatData r;
  std::vector<SignalWindow> train_originals;
  for (std::size_t i : idx.train) train_originals.push_back(data.windows[i]);
  for (std::size_t i : idx.test) r.test.push_back(data.windows[i]);
  r.train = config.augment ? augment_all(train_originals, mix_seed(config.augment_seed, repeat))
                           : std::move(train_originals);
  if (hooks.on_test_windows) hooks.on_test_windows(repeat, r.test);

  const GaborBank bank(config.gabor_filters, config.gabor_half_width);
  auto build = [&](const std::vector<SignalWindow>& windows,
                   std::array<std::vector<DomainImage>, kDomainCount>& images, std::vector<int>& labels) {
    for (auto& v : images) v.reserve(windows.size());
    for (const auto& w : windows) {
      auto views = domain_images(build_signal_image(w), bank);
      for (std::size_t d = 0; d < kDomainCount; ++d) images[d].push_back(std::move(views[d]));
      labels.push_back(w.label);
    }
  };
  build(r.train, r.train_images, r.train_labels);
  build(r.test, r.test_images, r.test_labels);
  return r;
}

CnnModel train_domain_cnn(const PipelineConfig& config, const Dataset& data, const RepeatData& repeat,
                          Domain domain) {
  CnnArchitecture arch = config.cnn_architecture;
  arch.classes = data.manifest.class_names.size();
  TrainConfig cfg = config.cnn;
  cfg.seed = config.cnn.seed + static_cast<std::uint64_t>(domain);

  fs::path cached;
  if (!config.cache_dir.empty()) {
    cached = config.cache_dir / ("cnn_" + hex64(hash_training_set(config, repeat, domain, arch)) + ".hfcnn");
    if (fs::exists(cached)) {
      CnnModel model = load_model(cached);
      if (model.architecture() == arch && model.trained) return model;
    }
  }
  CnnModel model = train(repeat.train_images[static_cast<std::size_t>(domain)], arch, cfg);
  model.class_names = data.manifest.class_names;
  if (!cached.empty()) {
    fs::create_directories(config.cache_dir);
    save_model(model, cached);
  }
  return model;
}

RunReport run_pipeline(const PipelineConfig& config, const PipelineHooks& hooks) {
  return run(config, hooks, false);
}

RunReport run_ablation(const PipelineConfig& config, const PipelineHooks& hooks) {
  return run(config, hooks, true);
}

std::string report_to_json(const RunReport& report, bool include_timings) {
  json repeats = json::array();
  for (const auto& r : report.repeats) {
    json entry = {{"repeat", r.repeat},
                  {"train_windows", r.train_windows},
                  {"test_windows", r.test_windows},
                  {"fused", evaluation_to_json(r.fused)},
                  {"stage1_lambdas", r.stage1_lambdas},
                  {"stage2_lambdas", r.stage2_lambdas},
                  {"model_hash", hex64(r.model_hash)}};
    for (std::size_t d = 0; d < kDomainCount; ++d)
      if (r.domains[d]) entry["domains"][std::string(to_string(static_cast<Domain>(d)))] = evaluation_to_json(*r.domains[d]);
    repeats.push_back(std::move(entry));
  }
  json summary = {{"fused", series_to_json(report.fused)}};
  for (std::size_t d = 0; d < kDomainCount; ++d)
    if (report.domains[d]) summary[std::string(to_string(static_cast<Domain>(d)))] = series_to_json(*report.domains[d]);

  json doc = {{"version", report.version},
              {"mode", report.mode},
              {"dataset", report.dataset},
              {"classes", report.class_names},
              {"repeats", repeats},
              {"summary", summary},
              {"config", json::parse(report.config_json)}};
  if (include_timings) {
    std::vector<double> per_repeat;
    for (const auto& r : report.repeats) per_repeat.push_back(r.seconds);
    doc["timings"] = {{"total_seconds", report.total_seconds}, {"repeat_seconds", per_repeat}};
  }
  return doc.dump(2);
}

void emit_report(const RunReport& report, const fs::path& output_dir) {
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  if (ec || !fs::is_directory(output_dir))
    throw Error(ErrorCode::io, "cannot create output directory " + output_dir.string());

  {
    const fs::path p = output_dir / "report.json";
    std::ofstream out(p);
    if (!out) throw Error(ErrorCode::io, "cannot write " + p.string());
    out << report_to_json(report) << '\n';
    if (!out) throw Error(ErrorCode::io, "failed writing " + p.string());
  }

  const std::size_t classes = report.class_names.size();
  std::vector<std::vector<std::size_t>> total(classes, std::vector<std::size_t>(classes, 0));
  for (const auto& r : report.repeats) {
    write_confusion_csv(output_dir / ("confusion_repeat_" + std::to_string(r.repeat) + ".csv"), r.fused.confusion,
                        report.class_names);
    for (std::size_t i = 0; i < classes; ++i)
      for (std::size_t j = 0; j < classes; ++j) total[i][j] += r.fused.confusion[i][j];
  }
  write_confusion_csv(output_dir / "confusion.csv", total, report.class_names);

  const fs::path p = output_dir / "summary.txt";
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::io, "cannot write " + p.string());
  char line[160];
  out << version_string() << "  mode: " << report.mode << "  dataset: " << report.dataset << '\n';
  out << "repeats: " << report.repeats.size() << "  classes: " << classes << "\n\n";
  std::snprintf(line, sizeof line, "%-24s %12s %12s\n", "Method", "Accuracy%", "Std%");
  out << line;
  auto row = [&](const std::string& name, const AccuracySeries& s) {
    std::snprintf(line, sizeof line, "%-24s %12.2f %12.2f\n", name.c_str(), 100.0 * s.mean, 100.0 * s.stddev);
    out << line;
  };
  for (std::size_t d = 0; d < kDomainCount; ++d)
    if (report.domains[d]) row(std::string(to_string(static_cast<Domain>(d))) + " only", *report.domains[d]);
  row("fused (two-stage CCA)", report.fused);
  std::snprintf(line, sizeof line, "\nfused mean accuracy: %.17g\n", report.fused.mean);
  out << line;
  if (!out) throw Error(ErrorCode::io, "failed writing " + p.string());
}

void save_features(const FeatureMatrix& f, std::span<const int> labels, const fs::path& path) {
  if (labels.size() != f.samples()) throw Error(ErrorCode::contract, "save_features: label count mismatch");
  std::vector<double> ids(f.sample_ids.begin(), f.sample_ids.end());
  std::vector<double> ls(labels.begin(), labels.end());
  const json meta = {{"domain", std::string(to_string(f.domain))}};
  write_container(path, kFeatureMagic, meta.dump(),
                  {matrix_block("values", f.values), {"sample_ids", {ids.size()}, ids}, {"labels", {ls.size()}, ls}});
}

FeatureMatrix load_features(const fs::path& path, std::vector<int>& labels) {
  const ContainerContents c = read_container(path, kFeatureMagic);
  FeatureMatrix f;
  f.values = block_matrix(c.block("values"));
  for (double v : c.block("sample_ids").values) f.sample_ids.push_back(static_cast<std::uint64_t>(v));
  labels.clear();
  for (double v : c.block("labels").values) labels.push_back(static_cast<int>(v));
  try {
    const auto meta = json::parse(c.meta_json);
    f.domain = parse_domain(meta.value("domain", std::string("spatial"))).value_or(Domain::spatial);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::deserialization, path.string() + ": " + e.what());
  }
  if (labels.size() != f.samples()) throw Error(ErrorCode::deserialization, path.string() + ": label count mismatch");
  f.validate();
  return f;
}

void save_windows(const std::vector<SignalWindow>& windows, const fs::path& path) {
  std::vector<double> samples;
  std::vector<double> labels, subjects, origins, variants;
  samples.reserve(windows.size() * kChannels * kWindowLength);
  for (const auto& w : windows) {
    for (const auto& ch : w.channels) samples.insert(samples.end(), ch.begin(), ch.end());
    labels.push_back(w.label);
    subjects.push_back(w.subject);
    origins.push_back(static_cast<double>(w.origin));
    variants.push_back(w.provenance.variant);
  }
  const std::size_t n = windows.size();
  write_container(path, kWindowMagic, "{}",
                  {{"samples", {n, kChannels, kWindowLength}, samples},
                   {"labels", {n}, labels},
                   {"subjects", {n}, subjects},
                   {"origins", {n}, origins},
                   {"variants", {n}, variants}});
}

std::vector<SignalWindow> load_windows_file(const fs::path& path) {
  const ContainerContents c = read_container(path, kWindowMagic);
  const TensorBlock& samples = c.block("samples");
  if (samples.shape.size() != 3 || samples.shape[1] != kChannels || samples.shape[2] != kWindowLength)
    throw Error(ErrorCode::deserialization, path.string() + ": windows must be N×6×52");
  const std::size_t n = samples.shape[0];
  const auto& labels = c.block("labels").values;
  const auto& subjects = c.block("subjects").values;
  const auto& origins = c.block("origins").values;
  const auto& variants = c.block("variants").values;
  if (labels.size() != n || subjects.size() != n || origins.size() != n || variants.size() != n)
    throw Error(ErrorCode::deserialization, path.string() + ": inconsistent window metadata");
  std::vector<SignalWindow> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < kChannels; ++ch)
      for (std::size_t t = 0; t < kWindowLength; ++t)
        out[i].channels[ch][t] = samples.values[(i * kChannels + ch) * kWindowLength + t];
    out[i].label = static_cast<int>(labels[i]);
    out[i].subject = static_cast<int>(subjects[i]);
    out[i].origin = static_cast<std::uint64_t>(origins[i]);
    out[i].provenance = {variants[i] != 0.0, static_cast<int>(variants[i])};
  }
  return out;
}

}  // namespace harfuse
