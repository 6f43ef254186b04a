// harfuse command-line driver.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "harfuse/cca.hpp"
#include "harfuse/errors.hpp"
#include "harfuse/features.hpp"
#include "harfuse/image.hpp"
#include "harfuse/pipeline.hpp"
#include "harfuse/svm.hpp"
#include "harfuse/synthetic.hpp"

namespace fs = std::filesystem;
using namespace harfuse;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t repeat = 0;
};

void add_common(CLI::App* cmd, Common& c, bool with_repeat) {
  cmd->add_option("--config", c.config_path, "pipeline config (JSON)")->required();
  cmd->add_option("--seed", c.seed, "override split, augmentation, CNN and SVM seeds");
  if (with_repeat) cmd->add_option("--repeat", c.repeat, "split repeat index")->capture_default_str();
}

PipelineConfig load(const Common& c) {
  PipelineConfig cfg = load_config(c.config_path);
  if (c.seed) {
    cfg.split.seed = *c.seed;
    cfg.augment_seed = *c.seed;
    cfg.cnn.seed = *c.seed;
    cfg.svm.seed = *c.seed;
  }
  cfg.validate();
  if (c.repeat >= cfg.split.repeats)
    throw Error(ErrorCode::config, "--repeat " + std::to_string(c.repeat) + " is outside the configured " +
                                       std::to_string(cfg.split.repeats) + " repeats");
  return cfg;
}

fs::path stage_dir(const PipelineConfig& cfg, std::size_t repeat) {
  fs::path dir = cfg.output_dir / ("repeat_" + std::to_string(repeat));
  fs::create_directories(dir);
  return dir;
}

std::string feature_file(Domain d, const char* side) {
  return std::string("features_") + std::string(to_string(d)) + "_" + side + ".hffea";
}

int cmd_ingest(const Common& c) {
  const PipelineConfig cfg = load(c);
  const Dataset data = ingest(cfg);
  fs::create_directories(cfg.output_dir);
  save_windows(data.windows, cfg.output_dir / "windows.hfwin");
  std::printf("%s: %zu recordings, %zu windows, %zu classes\n", data.manifest.name.c_str(),
              data.manifest.entries.size(), data.windows.size(), data.manifest.class_names.size());
  return 0;
}

int cmd_images(const Common& c, std::size_t limit) {
  const PipelineConfig cfg = load(c);
  const Dataset data = ingest(cfg);
  const RepeatData rd = prepare_repeat(cfg, data, c.repeat);
  const fs::path dir = stage_dir(cfg, c.repeat) / "images";
  fs::create_directories(dir);
  std::size_t written = 0;
  for (std::size_t d = 0; d < kDomainCount; ++d) {
    const auto& images = rd.train_images[d];
    for (std::size_t i = 0; i < std::min(limit, images.size()); ++i) {
      char name[96];
      std::snprintf(name, sizeof name, "%s_%04zu_c%d.pgm", std::string(to_string(static_cast<Domain>(d))).c_str(), i,
                    images[i].meta.label);
      write_pgm(dir / name, images[i].pixels);
      ++written;
    }
  }
  std::printf("wrote %zu images to %s\n", written, dir.string().c_str());
  return 0;
}

int cmd_train(const Common& c) {
  const PipelineConfig cfg = load(c);
  const Dataset data = ingest(cfg);
  const RepeatData rd = prepare_repeat(cfg, data, c.repeat);
  const fs::path dir = stage_dir(cfg, c.repeat);
  for (std::size_t d = 0; d < kDomainCount; ++d) {
    const Domain domain = static_cast<Domain>(d);
    const CnnModel cnn = train_domain_cnn(cfg, data, rd, domain);
    save_model(cnn, dir / ("cnn_" + std::string(to_string(domain)) + ".hfcnn"));
    save_features(extract_features(cnn, rd.train_images[d]), rd.train_labels, dir / feature_file(domain, "train"));
    save_features(extract_features(cnn, rd.test_images[d]), rd.test_labels, dir / feature_file(domain, "test"));
    const auto& last = cnn.history.back();
    std::printf("%-14s final loss %.6f  train accuracy %.4f\n", std::string(to_string(domain)).c_str(), last.loss,
                last.accuracy);
  }
  return 0;
}

int cmd_fuse(const Common& c) {
  const PipelineConfig cfg = load(c);
  const fs::path dir = stage_dir(cfg, c.repeat);
  std::array<FeatureMatrix, kDomainCount> train, test;
  std::vector<int> train_labels, test_labels;
  for (std::size_t d = 0; d < kDomainCount; ++d) {
    const Domain domain = static_cast<Domain>(d);
    train[d] = load_features(dir / feature_file(domain, "train"), train_labels);
    test[d] = load_features(dir / feature_file(domain, "test"), test_labels);
  }
  const TwoStageResult fusion = two_stage_fuse(train[0], train[1], train[2], cfg.cca_ridge, cfg.stage_order);
  save_cca(fusion.models.stage1, dir / "cca_stage1.hfcca");
  save_cca(fusion.models.stage2, dir / "cca_stage2.hfcca");
  const FusedFeatures fused_test = fusion.models.apply({&test[0], &test[1], &test[2]});
  auto as_features = [](const FusedFeatures& f) {
    FeatureMatrix m;
    m.values = f.values;
    m.sample_ids = f.sample_ids;
    return m;
  };
  save_features(as_features(fusion.fused), train_labels, dir / "fused_train.hffea");
  save_features(as_features(fused_test), test_labels, dir / "fused_test.hffea");
  std::printf("stage 1: d = %zu, top correlation %.6f\n", fusion.models.stage1.d(),
              fusion.models.stage1.lambdas.empty() ? 0.0 : fusion.models.stage1.lambdas.front());
  std::printf("stage 2: d = %zu, top correlation %.6f\n", fusion.models.stage2.d(),
              fusion.models.stage2.lambdas.empty() ? 0.0 : fusion.models.stage2.lambdas.front());
  return 0;
}

int cmd_classify(const Common& c) {
  const PipelineConfig cfg = load(c);
  const fs::path dir = stage_dir(cfg, c.repeat);
  std::vector<int> train_labels, test_labels;
  const FeatureMatrix train = load_features(dir / "fused_train.hffea", train_labels);
  const FeatureMatrix test = load_features(dir / "fused_test.hffea", test_labels);
  const DatasetManifest manifest = load_manifest(cfg.dataset_root);
  SvmModel svm = svm_train(train.values, train_labels, cfg.svm, manifest.class_names.size());
  svm.class_names = manifest.class_names;
  save_svm(svm, dir / "svm.hfsvm");
  const Evaluation e = evaluate(svm, test.values, test_labels);
  std::printf("fused accuracy %.4f on %zu test windows\n", e.accuracy, test_labels.size());
  return 0;
}

int cmd_run(const Common& c, bool ablate) {
  const PipelineConfig cfg = load(c);
  const RunReport report = ablate ? run_ablation(cfg) : run_pipeline(cfg);
  emit_report(report, cfg.output_dir);
  std::printf("fused mean accuracy %.4f (std %.4f) over %zu repeats\n", report.fused.mean, report.fused.stddev,
              report.repeats.size());
  for (std::size_t d = 0; d < kDomainCount; ++d)
    if (report.domains[d])
      std::printf("%-14s mean accuracy %.4f (std %.4f)\n", std::string(to_string(static_cast<Domain>(d))).c_str(),
                  report.domains[d]->mean, report.domains[d]->stddev);
  std::printf("report written to %s\n", cfg.output_dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multidomain CCA fusion for inertial action recognition"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  Common common;
  std::size_t image_limit = 8;
  SyntheticSpec synth;
  std::string synth_out;

  auto* ingest_cmd = app.add_subcommand("ingest", "validate the dataset and cache its windows");
  add_common(ingest_cmd, common, false);
  auto* images_cmd = app.add_subcommand("images", "write domain images of one repeat as PGM");
  add_common(images_cmd, common, true);
  images_cmd->add_option("--limit", image_limit, "images per domain")->capture_default_str();
  auto* train_cmd = app.add_subcommand("train", "train the three domain CNNs and extract features");
  add_common(train_cmd, common, true);
  auto* fuse_cmd = app.add_subcommand("fuse", "fit two-stage CCA on cached features");
  add_common(fuse_cmd, common, true);
  auto* classify_cmd = app.add_subcommand("classify", "train and evaluate the SVM on fused features");
  add_common(classify_cmd, common, true);
  auto* run_cmd = app.add_subcommand("run", "full pipeline over all repeats");
  add_common(run_cmd, common, false);
  auto* ablate_cmd = app.add_subcommand("ablate", "full pipeline plus single-domain baselines");
  add_common(ablate_cmd, common, false);

  auto* synth_cmd = app.add_subcommand("synth", "write the six-class synthetic fixture");
  synth_cmd->add_option("--out", synth_out, "dataset directory")->required();
  synth_cmd->add_option("--recordings-per-class", synth.recordings_per_class)->capture_default_str();
  synth_cmd->add_option("--windows-per-recording", synth.windows_per_recording)->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(common);
    if (*images_cmd) return cmd_images(common, image_limit);
    if (*train_cmd) return cmd_train(common);
    if (*fuse_cmd) return cmd_fuse(common);
    if (*classify_cmd) return cmd_classify(common);
    if (*run_cmd) return cmd_run(common, false);
    if (*ablate_cmd) return cmd_run(common, true);
    if (*synth_cmd) {
      write_synthetic_dataset(synth_out, synth);
      std::printf("wrote %zu recordings to %s\n", synth.recordings_per_class * kSyntheticClasses, synth_out.c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "harfuse: %s error: %s\n", to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "harfuse: %s\n", e.what());
    return 1;
  }
  return 1;
}
