#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "crcseg/calibration.hpp"
#include "crcseg/error.hpp"
#include "crcseg/heatmap.hpp"
#include "crcseg/manifest.hpp"
#include "crcseg/metrics.hpp"
#include "crcseg/npy.hpp"
#include "crcseg/prediction_sets.hpp"
#include "crcseg/serialization.hpp"
#include "crcseg/synth.hpp"
#include "crcseg/version.hpp"

namespace crcseg::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  bool json = false;
  int threads = -1;

  unsigned resolved_threads() const {
    if (threads >= 0)
      return static_cast<unsigned>(threads);
    if (const char* env = std::getenv("CRCSEG_THREADS")) {
      try {
        const int v = std::stoi(env);
        if (v >= 0)
          return static_cast<unsigned>(v);
      } catch (const std::exception&) {
      }
      spdlog::warn("ignoring CRCSEG_THREADS='{}'", env);
    }
    return 0;
  }
};

struct LossFlags {
  std::string kind = "miscoverage";
  double tau = 0.9;
  std::string weights_path;

  LossSpec build() const {
    const auto k = parse_loss_kind(kind);
    if (!k)
      throw Error(ErrorCode::InvalidArgument, "unknown loss '" + kind + "'");
    switch (*k) {
    case LossKind::Binary: return LossSpec::binary();
    case LossKind::BinaryThreshold: return LossSpec::binary_threshold(tau);
    case LossKind::Miscoverage: return LossSpec::miscoverage();
    case LossKind::WeightedMiscoverage:
      if (weights_path.empty())
        throw Error(ErrorCode::InvalidArgument,
                    "--loss weighted-miscoverage requires --weights");
      return LossSpec::weighted_miscoverage(read_weights(weights_path));
    }
    return LossSpec::miscoverage();
  }
};

void add_loss_flags(CLI::App* cmd, LossFlags& f) {
  cmd->add_option("--loss", f.kind, "binary|binary-threshold|miscoverage|weighted-miscoverage")
      ->check(CLI::IsMember({"binary", "binary-threshold", "miscoverage", "weighted-miscoverage"}))
      ->capture_default_str();
  cmd->add_option("--tau", f.tau, "Minimum coverage ratio for binary-threshold")
      ->capture_default_str();
  cmd->add_option("--weights", f.weights_path, "JSON array of per-class weights");
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_flag("--json", c.json, "Machine-readable JSON on stdout");
  cmd->add_option("--threads", c.threads,
                  "Worker threads (default: $CRCSEG_THREADS, else all cores)")
      ->check(CLI::NonNegativeNumber);
}

void emit(const Common& c, const nlohmann::ordered_json& j, const std::string& human) {
  if (c.json)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << human;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

/// Manifest entries for one side of an optional split.
Manifest select_entries(const fs::path& path, std::optional<double> cal_fraction,
                        std::uint64_t seed, bool calibration_side) {
  Manifest m = read_manifest(path);
  if (!cal_fraction)
    return m;
  auto [cal, test] = split(m, SplitSpec{seed, *cal_fraction});
  return calibration_side ? cal : test;
}

std::vector<std::string> ids_of(const Manifest& m) {
  std::vector<std::string> ids;
  for (const auto& e : m)
    ids.push_back(e.id);
  return ids;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateCmd {
  Common common;
  LossFlags loss;
  std::string manifest, out;
  double alpha = 0.1;
  double epsilon = 1e-5;
  std::uint64_t seed = 0;
  std::optional<double> cal_fraction;
  bool no_validate = false;
  bool no_top1 = false;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("calibrate", "Estimate lambda-hat on a calibration manifest");
    cmd->add_option("--manifest", manifest, "JSON Lines manifest")->required();
    cmd->add_option("--alpha", alpha, "Target risk level in (0,1)")->required();
    cmd->add_option("--epsilon", epsilon, "Bisection tolerance on lambda")->capture_default_str();
    cmd->add_option("--seed", seed, "Seed for --cal-fraction shuffling")->capture_default_str();
    cmd->add_option("--cal-fraction", cal_fraction,
                    "Split the manifest and calibrate on the first part");
    cmd->add_option("--out", out, "Artifact JSON path")->required();
    cmd->add_flag("--no-validate", no_validate, "Skip softmax validation");
    cmd->add_flag("--no-top1", no_top1, "Do not force the top-1 class into every set");
    add_loss_flags(cmd, loss);
    add_common(cmd, common);
    cmd->callback([this] { run(); });
  }

  void run() {
    CalibrationConfig cfg;
    cfg.alpha = alpha;
    cfg.epsilon = epsilon;
    cfg.loss = loss.build();
    cfg.top1_fallback = !no_top1;
    cfg.seed = seed;
    cfg.threads = common.resolved_threads();
    cfg.validate();

    const Manifest entries = select_entries(manifest, cal_fraction, seed, true);
    if (entries.empty())
      throw Error(ErrorCode::EmptyCalibrationSet, "manifest has no entries");
    feasibility_check(cfg, entries.size());
    const auto examples = load_examples(entries, !no_validate, cfg.threads);
    const auto art = calibrate(examples, cfg);
    write_artifact(out, art);

    std::ostringstream human;
    human << "lambda_hat   " << fmt_double(art.lambda_hat) << "\n"
          << "alpha        " << fmt_double(art.alpha) << "\n"
          << "n            " << art.n << "\n"
          << "loss         " << loss_kind_name(art.loss.kind) << "\n"
          << "probes       " << art.risk_curve.size() << "\n"
          << "artifact     " << out << "\n";
    emit(common, artifact_to_json(art), human.str());
  }
};

// ---------------------------------------------------------------- predict

struct PredictCmd {
  Common common;
  std::string artifact, scores, out;
  bool no_validate = false;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("predict", "Build the multi-labeled mask for one score tensor");
    cmd->add_option("--artifact", artifact, "Calibration artifact JSON")->required();
    cmd->add_option("--scores", scores, "Score tensor (.npy, <f4, K x H x W)")->required();
    cmd->add_option("--out", out, "Output multi-labeled mask (.npy, |u1)")->required();
    cmd->add_flag("--no-validate", no_validate, "Skip softmax validation");
    add_common(cmd, common);
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto art = read_artifact(artifact);
    const auto s = read_scores(scores, !no_validate);
    const auto z = lac_set(s, CoverageParameter(art.lambda_hat), art.top1_fallback);
    write_multimask(out, z);

    const auto sizes = set_size_map(z);
    double mean = 0.0;
    for (auto c : sizes)
      mean += c;
    mean /= static_cast<double>(sizes.size());
    nlohmann::ordered_json j;
    j["out"] = out;
    j["lambda_hat"] = art.lambda_hat;
    j["k"] = z.dims().k;
    j["height"] = z.dims().h;
    j["width"] = z.dims().w;
    j["mean_set_size"] = mean;
    std::ostringstream human;
    human << "wrote " << out << " (" << z.dims().k << "x" << z.dims().h << "x"
          << z.dims().w << "), mean set size " << fmt_double(mean) << "\n";
    emit(common, j, human.str());
  }
};

// ---------------------------------------------------------------- evaluate

struct EvaluateCmd {
  Common common;
  std::string manifest, artifact, out, csv;
  std::uint64_t seed = 0;
  std::optional<double> cal_fraction;
  bool no_validate = false;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("evaluate", "Empirical risk and activation ratio on a test manifest");
    cmd->add_option("--manifest", manifest, "JSON Lines manifest")->required();
    cmd->add_option("--artifact", artifact, "Calibration artifact JSON")->required();
    cmd->add_option("--seed", seed, "Seed for --cal-fraction shuffling")->capture_default_str();
    cmd->add_option("--cal-fraction", cal_fraction,
                    "Split the manifest and evaluate on the held-out part");
    cmd->add_option("--out", out, "Write the report JSON here");
    cmd->add_option("--csv", csv, "Write one CSV row per image here");
    cmd->add_flag("--no-validate", no_validate, "Skip softmax validation");
    add_common(cmd, common);
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto art = read_artifact(artifact);
    const unsigned threads = common.resolved_threads();
    const Manifest entries = select_entries(manifest, cal_fraction, seed, false);
    const auto examples = load_examples(entries, !no_validate, threads);
    const auto ids = ids_of(entries);
    const auto report = evaluate(examples, art, threads, ids);
    const auto j = report_to_json(report);
    if (!out.empty())
      write_text(out, j.dump(2) + "\n");
    if (!csv.empty())
      write_text(csv, report_to_csv(report));

    std::ostringstream human;
    human << "empirical_risk     " << fmt_double(report.empirical_risk) << "\n"
          << "activation_ratio   " << fmt_double(report.activation_ratio) << "\n"
          << "n_test             " << report.n_test << "\n"
          << "alpha              " << fmt_double(report.alpha) << "\n"
          << "lambda_hat         " << fmt_double(report.lambda_hat) << "\n";
    emit(common, report_to_json(report, false), human.str());
  }
};

// ---------------------------------------------------------------- heatmap

struct HeatmapCmd {
  Common common;
  std::string multimask, out, mode = "k", overlay_path, mask_path;
  double blend = 0.5;
  bool blackout_void = false;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("heatmap", "Render prediction-set sizes as a colour heatmap");
    cmd->add_option("--multimask", multimask, "Multi-labeled mask (.npy)")->required();
    cmd->add_option("--mode", mode, "k: divide by K; max: divide by the largest set size")
        ->check(CLI::IsMember({"k", "max"}))
        ->capture_default_str();
    cmd->add_option("--out", out, "Output image (.png, or .ppm for P6)")->required();
    cmd->add_option("--overlay", overlay_path, "Photo (PNG or PPM) to blend under the heatmap");
    cmd->add_option("--blend", blend, "Heatmap weight when overlaying")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--mask", mask_path, "Ground-truth mask, used by --blackout-void");
    cmd->add_flag("--blackout-void", blackout_void, "Paint void pixels black");
    add_common(cmd, common);
    cmd->callback([this] { run(); });
  }

  void run() {
    const auto z = read_multimask(multimask);
    HeatmapOptions opts;
    opts.normalization = mode == "max" ? Normalization::ByObservedMax : Normalization::ByK;
    if (!overlay_path.empty())
      opts.overlay_blend = blend;
    const auto intensity = intensity_map(z, opts);
    RgbImage img = render(intensity, z.dims().w, z.dims().h, opts);
    if (blackout_void) {
      if (mask_path.empty())
        throw Error(ErrorCode::InvalidArgument, "--blackout-void requires --mask");
      const auto mask = read_mask(mask_path, z.dims().k);
      if (mask.dims() != z.dims())
        throw Error(ErrorCode::DimensionMismatch, "mask does not match the multi-labeled mask");
      blackout(img, validity_map(mask));
    }
    if (opts.overlay_blend)
      img = overlay(img, read_image(overlay_path), *opts.overlay_blend);
    write_image(out, img);

    nlohmann::ordered_json j;
    j["out"] = out;
    j["width"] = img.width;
    j["height"] = img.height;
    j["mode"] = mode;
    emit(common, j, "wrote " + out + "\n");
  }
};

// ---------------------------------------------------------------- synth

struct SynthFlags {
  int k = 5, height = 64, width = 64, blobs = 8;
  double temperature = 1.0, corruption = 0.3, noise = 1.0;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--k", k, "Class count")->capture_default_str();
    cmd->add_option("--height", height, "Image height")->capture_default_str();
    cmd->add_option("--width", width, "Image width")->capture_default_str();
    cmd->add_option("--blobs", blobs, "Voronoi sites per image")->capture_default_str();
    cmd->add_option("--temperature", temperature, "Softmax temperature")->capture_default_str();
    cmd->add_option("--corruption", corruption, "Probability a pixel favours a wrong class")
        ->capture_default_str();
    cmd->add_option("--noise", noise, "Std of the Gaussian logit noise")->capture_default_str();
    cmd->add_option("--seed", seed, "Master seed")->capture_default_str();
  }

  SynthConfig build(std::size_t n_images) const {
    SynthConfig c;
    c.dims = Dims{k, height, width};
    c.n_images = n_images;
    c.blob_count = blobs;
    c.temperature = temperature;
    c.corruption = corruption;
    c.noise = noise;
    c.seed = seed;
    return c;
  }
};

struct SynthCmd {
  Common common;
  SynthFlags flags;
  std::string out;
  std::size_t n_images = 20;
  std::optional<double> cal_fraction;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth", "Write a synthetic dataset (NPY files + manifest)");
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--n-images", n_images, "Number of images")->capture_default_str();
    cmd->add_option("--cal-fraction", cal_fraction,
                    "Also write cal.jsonl / test.jsonl split with --seed");
    flags.attach(cmd);
    add_common(cmd, common);
    cmd->callback([this] { run(); });
  }

  void run() {
    const SynthConfig cfg = flags.build(n_images);
    const auto data = generate(cfg, common.resolved_threads());
    fs::create_directories(out);
    Manifest manifest;
    const int digits = static_cast<int>(std::to_string(n_images - 1).size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::ostringstream id;
      id << "img" << std::setw(digits) << std::setfill('0') << i;
      const std::string scores = id.str() + "_scores.npy";
      const std::string mask = id.str() + "_mask.npy";
      write_scores(fs::path(out) / scores, data[i].scores);
      write_mask(fs::path(out) / mask, data[i].mask);
      manifest.push_back({id.str(), scores, mask, std::nullopt});
    }
    write_manifest(fs::path(out) / "manifest.jsonl", manifest);
    nlohmann::ordered_json j;
    j["out"] = out;
    j["manifest"] = (fs::path(out) / "manifest.jsonl").string();
    j["n_images"] = data.size();
    if (cal_fraction) {
      auto [cal, test] = split(manifest, SplitSpec{flags.seed, *cal_fraction});
      write_manifest(fs::path(out) / "cal.jsonl", cal);
      write_manifest(fs::path(out) / "test.jsonl", test);
      j["n_cal"] = cal.size();
      j["n_test"] = test.size();
    }
    emit(common, j, "wrote " + std::to_string(data.size()) + " images to " + out + "\n");
  }
};

// ---------------------------------------------------------------- validate

struct ValidateCmd {
  Common common;
  SynthFlags flags;
  LossFlags loss;
  std::size_t n_cal = 200, n_test = 200, trials = 50;
  double alpha = 0.1, epsilon = 1e-5;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("validate",
                                   "Monte-Carlo check of the risk guarantee on synthetic data");
    cmd->add_option("--n-cal", n_cal, "Calibration images per trial")->capture_default_str();
    cmd->add_option("--n-test", n_test, "Test images per trial")->capture_default_str();
    cmd->add_option("--trials", trials, "Number of trials")->capture_default_str();
    cmd->add_option("--alpha", alpha, "Target risk level")->capture_default_str();
    cmd->add_option("--epsilon", epsilon, "Bisection tolerance")->capture_default_str();
    cmd->add_option("--out", out, "Write the TrialSummary JSON here");
    flags.attach(cmd);
    add_loss_flags(cmd, loss);
    add_common(cmd, common);
    cmd->callback([this] { run(); });
  }

  void run() {
    GuaranteeHarness h;
    h.data = flags.build(n_cal + n_test);
    h.n_cal = n_cal;
    h.trials = trials;
    CalibrationConfig cfg;
    cfg.alpha = alpha;
    cfg.epsilon = epsilon;
    cfg.loss = loss.build();
    cfg.seed = flags.seed;
    cfg.threads = common.resolved_threads();
    const auto s = validate_guarantee(h, cfg);
    const auto j = summary_to_json(s);
    if (!out.empty())
      write_text(out, j.dump(2) + "\n");
    std::ostringstream human;
    human << "trials            " << s.trials << "\n"
          << "alpha             " << fmt_double(s.alpha) << "\n"
          << "mean_test_risk    " << fmt_double(s.mean_test_risk) << "\n"
          << "std_test_risk     " << fmt_double(s.std_test_risk) << "\n"
          << "standard_error    " << fmt_double(s.standard_error) << "\n"
          << "mean_AR           " << fmt_double(s.mean_activation_ratio) << "\n"
          << "result            " << (s.pass ? "PASS" : "FAIL") << "\n";
    emit(common, j, human.str());
    if (!s.pass)
      throw Error(ErrorCode::InvalidArgument,
                  "mean test risk exceeds alpha + 3 standard errors");
  }
};

} // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Conformal risk control for semantic segmentation", "crcseg"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1, 1);

  CalibrateCmd calibrate_cmd;
  PredictCmd predict_cmd;
  EvaluateCmd evaluate_cmd;
  HeatmapCmd heatmap_cmd;
  SynthCmd synth_cmd;
  ValidateCmd validate_cmd;
  calibrate_cmd.attach(app);
  predict_cmd.attach(app);
  evaluate_cmd.attach(app);
  heatmap_cmd.attach(app);
  synth_cmd.attach(app);
  validate_cmd.attach(app);

  bool json = false;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0)
      return app.exit(e);
    app.exit(e);
    return 1;
  } catch (const Error& e) {
    for (const auto* sub : app.get_subcommands())
      json = json || sub->count("--json") > 0;
    if (json) {
      nlohmann::ordered_json j;
      j["error"] = std::string(error_name(e.code()));
      j["message"] = e.what();
      if (const auto* inf = dynamic_cast<const InfeasibleAlphaError*>(&e)) {
        j["min_alpha"] = inf->min_alpha();
        j["min_n"] = inf->min_n();
      }
      std::cout << j.dump(2) << "\n";
    }
    std::cerr << "error: " << e.what() << "\n";
    return is_io_error(e.code()) ? 2 : 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args)
    argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace crcseg::cli
