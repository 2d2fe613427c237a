// Command-line front end for the indoor-localization pipeline: channel
// simulation, capture parsing, image building, training, prediction,
// evaluation and parameter sweeps. Config schema: docs/config-schema.md.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "secci/bfee.hpp"
#include "secci/channel_sim.hpp"
#include "secci/csi_model.hpp"
#include "secci/experiment.hpp"
#include "secci/imaging.hpp"
#include "secci/locator.hpp"
#include "secci/network.hpp"
#include "secci/rng.hpp"
#include "secci/train.hpp"
#include "secci/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace secci;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("could not open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw StructuralError("could not write " + path.string());
}

json load_json(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + " is not valid JSON: " + e.what());
  }
}

fs::path out_path(const ExperimentConfig& cfg, const std::string& given,
                  const char* fallback) {
  if (!given.empty()) return given;
  return fs::path(cfg.output_dir) / fallback;
}

// One parsed capture with its declared ground truth.
struct CaptureSpec {
  std::string path;
  std::uint32_t site_id = 0;
  std::array<double, 2> coords{};
};

json feature_to_json(const FeatureVector& f) {
  json row = json::array();
  for (double v : f.amp_avg) row.push_back(v);
  for (double v : f.aoa) row.push_back(v);
  for (double v : f.phase_diff) row.push_back(v);
  return row;
}

FeatureVector feature_from_json(const json& row) {
  if (!row.is_array() || row.size() != 3 * kFeaturesPerChannel)
    throw FormatError(FormatError::Kind::shape_mismatch,
                      "each feature row must hold " +
                          std::to_string(3 * kFeaturesPerChannel) +
                          " numbers");
  FeatureVector f;
  for (int i = 0; i < kFeaturesPerChannel; ++i) {
    f.amp_avg[i] = row[i].get<double>();
    f.aoa[i] = row[kFeaturesPerChannel + i].get<double>();
    f.phase_diff[i] = row[2 * kFeaturesPerChannel + i].get<double>();
  }
  return f;
}

json estimate_to_json(const PositionEstimate& est) {
  json support = json::array();
  for (const auto& s : est.support)
    support.push_back({{"site_index", s.site_index},
                       {"frequency", s.frequency},
                       {"probability_mass", s.probability_mass}});
  return {{"estimate", est.coords},
          {"support", support},
          {"shortfall", est.shortfall}};
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out,
                 const std::string& emit_bfee) {
  if (!cfg.grid)
    throw ConfigError("simulate needs a grid data source in the config");
  const SiteLayout layout = make_grid_layout(*cfg.grid);
  SimConfig sim = cfg.sim;
  sim.seed = cfg.seed;

  const Dataset data = simulate_dataset(layout, sim, cfg.packets_per_image);
  const fs::path path = out_path(cfg, out, "dataset.secci");
  fs::create_directories(cfg.output_dir);
  save_dataset(data, path.string());
  std::printf("wrote %s: %zu sites, %zu images (%dx%dx%d)\n",
              path.string().c_str(), data.sites.size(), data.images.size(),
              kNumAntennas, kFeaturesPerChannel, cfg.packets_per_image);

  if (!emit_bfee.empty()) {
    // Mirror the dataset's per-site streams so the captures quantize the
    // very packets that produced the images (8-bit precision).
    fs::create_directories(emit_bfee);
    json manifest = json::array();
    for (std::size_t s = 0; s < layout.site_positions.size(); ++s) {
      Rng site_rng(Rng::mix(sim.seed, s));
      Rng ray_rng = site_rng.child(0);
      const auto rays =
          draw_site_rays(layout.site_positions[s], layout, sim, ray_rng);
      const auto packets = simulate_site_packets(rays, sim,
                                                 sim.packets_per_site, 0,
                                                 site_rng);
      std::vector<BfeeEntry> entries;
      entries.reserve(packets.size());
      for (std::size_t i = 0; i < packets.size(); ++i)
        entries.push_back(
            packet_to_bfee(packets[i], static_cast<std::uint16_t>(i)));
      const std::string name = "site_" + std::to_string(s) + ".dat";
      write_capture_file((fs::path(emit_bfee) / name).string(), entries);
      manifest.push_back({{"path", name},
                          {"site_id", s},
                          {"coords", layout.site_positions[s]}});
    }
    spill(fs::path(emit_bfee) / "manifest.json", manifest.dump(2) + "\n");
    std::printf("wrote %zu captures + manifest.json under %s\n",
                layout.site_positions.size(), emit_bfee.c_str());
  }
  return 0;
}

int cmd_parse_bfee(const ExperimentConfig& cfg, const std::string& manifest,
                   const std::string& input, std::uint32_t site_id, double x,
                   double y, const std::string& out) {
  std::vector<CaptureSpec> specs;
  if (!manifest.empty()) {
    const json m = load_json(manifest);
    if (!m.is_array() || m.empty())
      throw ConfigError("manifest must be a non-empty JSON array");
    const fs::path base = fs::path(manifest).parent_path();
    for (const auto& entry : m) {
      CaptureSpec spec;
      spec.path = (base / entry.at("path").get<std::string>()).string();
      spec.site_id = entry.at("site_id").get<std::uint32_t>();
      const auto& c = entry.at("coords");
      spec.coords = {c.at(0).get<double>(), c.at(1).get<double>()};
      specs.push_back(std::move(spec));
    }
  } else if (!input.empty()) {
    specs.push_back({input, site_id, {x, y}});
  } else {
    throw ConfigError("parse-bfee needs a capture file or --manifest");
  }

  json sites = json::array();
  for (const auto& spec : specs) {
    const ParseResult parsed = read_capture_file(spec.path);
    json features = json::array();
    for (const auto& entry : parsed.entries)
      features.push_back(feature_to_json(
          extract_features(to_csi_packet(entry), cfg.sim.geometry)));
    sites.push_back({{"site_id", spec.site_id},
                     {"coords", spec.coords},
                     {"skipped_frames", parsed.skipped_frames},
                     {"truncated", parsed.truncated_tail},
                     {"features", std::move(features)}});
    std::printf("%s: %zu packets (%zu frames skipped%s)\n", spec.path.c_str(),
                parsed.entries.size(), parsed.skipped_frames,
                parsed.truncated_tail ? ", truncated tail" : "");
  }

  const json doc = {{"version", 1},
                    {"geometry",
                     {{"spacing_m", cfg.sim.geometry.spacing_m},
                      {"carrier_hz", cfg.sim.geometry.carrier_hz}}},
                    {"sites", std::move(sites)}};
  const fs::path path = out_path(cfg, out, "features.json");
  spill(path, doc.dump() + "\n");
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_build_dataset(const ExperimentConfig& cfg, const std::string& features,
                      int window, const std::string& out) {
  const json doc = load_json(features);
  if (!doc.is_object() || doc.value("version", 0) != 1)
    throw FormatError(FormatError::Kind::version_mismatch,
                      features + ": expected a version-1 feature file");
  Dataset data;
  data.provenance = {"capture", 0};
  if (doc.contains("geometry")) {
    data.geometry.spacing_m = doc.at("geometry").at("spacing_m").get<double>();
    data.geometry.carrier_hz =
        doc.at("geometry").at("carrier_hz").get<double>();
  }

  std::vector<std::pair<SiteInfo, std::vector<FeatureVector>>> sites;
  std::vector<FeatureVector> all;
  for (const auto& site : doc.at("sites")) {
    SiteInfo info;
    info.id = site.at("site_id").get<std::uint32_t>();
    const auto& c = site.at("coords");
    info.coords = {c.at(0).get<double>(), c.at(1).get<double>()};
    for (const auto& existing : sites)
      if (existing.first.id == info.id)
        throw ConfigError("duplicate site_id " + std::to_string(info.id));
    std::vector<FeatureVector> fv;
    for (const auto& row : site.at("features"))
      fv.push_back(feature_from_json(row));
    all.insert(all.end(), fv.begin(), fv.end());
    sites.emplace_back(info, std::move(fv));
  }
  if (all.empty()) throw ConfigError(features + " holds no feature rows");

  const NormalizationSpec norm = compute_amp_range(all);
  data.normalization = norm;
  const int w = window > 0 ? window : cfg.packets_per_image;
  for (auto& [info, fv] : sites) {
    data.sites.push_back(info);
    const auto images = build_images(fv, w, norm);
    if (images.empty())
      std::fprintf(stderr,
                   "warning: site %u has %zu packets, fewer than one "
                   "%d-packet window; no images\n",
                   info.id, fv.size(), w);
    for (const auto& img : images) {
      LabeledImage li;
      li.image = img;
      li.site_id = info.id;
      li.coords = info.coords;
      data.images.push_back(std::move(li));
    }
  }

  const fs::path path = out_path(cfg, out, "dataset.secci");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_dataset(data, path.string());
  std::printf("wrote %s: %zu sites, %zu images (window %d)\n",
              path.string().c_str(), data.sites.size(), data.images.size(), w);
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& data_path,
              const std::string& out) {
  const Dataset data = load_dataset(data_path);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const ModelCheckpoint ckpt = train(data, Dataset{}, cfg.net, tc);
  const fs::path path = out_path(cfg, out, "model.mdl");
  fs::create_directories(cfg.output_dir);
  save_checkpoint(ckpt, path.string());
  std::printf("wrote %s: %d classes, best epoch %d, validation accuracy %.4f\n",
              path.string().c_str(), ckpt.class_count, ckpt.best_epoch,
              ckpt.validation_accuracy);
  return 0;
}

int cmd_predict(const ExperimentConfig& cfg, const std::string& model_path,
                const std::string& data_path, const std::string& out) {
  const ModelCheckpoint ckpt = load_checkpoint(model_path);
  const Dataset data = load_dataset(data_path);
  Network net(ckpt);

  std::map<std::uint32_t, std::vector<CsiImage>> by_site;
  std::map<std::uint32_t, std::array<double, 2>> truth;
  for (const auto& img : data.images) by_site[img.site_id].push_back(img.image);
  for (const auto& s : data.sites) truth[s.id] = s.coords;
  if (by_site.empty()) throw ConfigError(data_path + " holds no images");

  json positions = json::array();
  double time_sum = 0.0;
  for (const auto& [site_id, images] : by_site) {
    const auto t0 = std::chrono::steady_clock::now();
    const PredictionMatrix matrix = build_prediction_matrix(net, images);
    const PositionEstimate est =
        estimate_position(matrix, ckpt.class_sites, cfg.greedy);
    const auto t1 = std::chrono::steady_clock::now();
    time_sum += std::chrono::duration<double>(t1 - t0).count();

    json pos = estimate_to_json(est);
    pos["site_id"] = site_id;
    pos["num_images"] = images.size();
    if (auto it = truth.find(site_id); it != truth.end())
      pos["truth"] = it->second;
    positions.push_back(std::move(pos));
  }

  const json doc = {
      {"greedy",
       {{"h", cfg.greedy.h},
        {"k", cfg.greedy.k},
        {"weighting", cfg.greedy.weighting == Weighting::uniform
                          ? "uniform"
                          : "probability"}}},
      {"mean_execution_time_s", time_sum / static_cast<double>(by_site.size())},
      {"positions", std::move(positions)}};
  const fs::path path = out_path(cfg, out, "estimates.json");
  spill(path, doc.dump(2) + "\n");
  std::printf("wrote %s: %zu positions\n", path.string().c_str(),
              by_site.size());
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& estimates,
                 const std::string& truths_path, const std::string& stem) {
  const json doc = load_json(estimates);
  std::map<std::uint32_t, std::array<double, 2>> truths;
  if (!truths_path.empty()) {
    const json t = load_json(truths_path);
    const json& rows = t.is_array() ? t : t.at("positions");
    for (const auto& row : rows)
      truths[row.at("site_id").get<std::uint32_t>()] = {
          row.at("truth").at(0).get<double>(),
          row.at("truth").at(1).get<double>()};
  }

  MetricsReport report;
  for (const auto& pos : doc.at("positions")) {
    MetricsReport::Position p;
    p.site_id = pos.at("site_id").get<std::uint32_t>();
    p.estimate = {pos.at("estimate").at(0).get<double>(),
                  pos.at("estimate").at(1).get<double>()};
    if (auto it = truths.find(p.site_id); it != truths.end())
      p.truth = it->second;
    else if (pos.contains("truth"))
      p.truth = {pos.at("truth").at(0).get<double>(),
                 pos.at("truth").at(1).get<double>()};
    else
      throw ConfigError("no ground truth for site " +
                        std::to_string(p.site_id) +
                        "; embed it in the estimates or pass --truths");
    p.error_m = std::hypot(p.estimate[0] - p.truth[0],
                           p.estimate[1] - p.truth[1]);
    p.num_images = pos.value("num_images", 0);
    report.positions.push_back(p);
    report.per_position_errors.push_back(p.error_m);
  }
  if (report.positions.empty())
    throw ConfigError(estimates + " holds no positions");

  const double n = static_cast<double>(report.per_position_errors.size());
  double sum = 0.0;
  for (double e : report.per_position_errors) sum += e;
  report.mean_error_m = sum / n;
  double sq = 0.0;
  for (double e : report.per_position_errors) {
    const double d = e - report.mean_error_m;
    sq += d * d;
  }
  report.std_error_m = std::sqrt(sq / n);
  report.cdf = error_cdf(report.per_position_errors);
  report.mean_execution_time_s = doc.value("mean_execution_time_s", 0.0);
  report.config_json = experiment_config_json(cfg);

  write_report(report, cfg.output_dir, stem.empty() ? "report" : stem);
  std::printf("%zu positions: mean error %.4f m, std %.4f m\n",
              report.positions.size(), report.mean_error_m,
              report.std_error_m);
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep)
    throw ConfigError("sweep needs a \"sweep\" section in the config");
  const std::size_t cells =
      cfg.sweep->values.size() *
      static_cast<std::size_t>(cfg.sweep->repetitions);
  const auto reports = run_sweep(cfg);
  std::printf("%zu/%zu cells succeeded; results under %s (sweep.csv)\n",
              reports.size(), cells, cfg.output_dir.c_str());
  return reports.size() == cells ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "CSI-image indoor localization: simulate channels, parse captures, "
      "build datasets, train the attention classifier, and locate."};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path, output_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  bool print_config = false;
  auto* opt_config =
      app.add_option("--config", config_path, "Experiment config JSON")
          ->check(CLI::ExistingFile);
  auto* opt_seed = app.add_option("--seed", seed, "Master seed override");
  auto* opt_outdir =
      app.add_option("--output-dir", output_dir, "Directory for outputs");
  auto* opt_workers =
      app.add_option("--workers", workers, "Parallel sweep cells")
          ->check(CLI::PositiveNumber);
  app.add_flag("--print-config", print_config,
               "Print the resolved config JSON and exit");

  auto* sc_simulate = app.add_subcommand(
      "simulate", "Synthesize a multipath dataset from the grid config");
  std::string sim_out, sim_emit;
  sc_simulate->add_option("--out", sim_out, "Dataset path");
  sc_simulate->add_option(
      "--emit-bfee", sim_emit,
      "Also write per-site capture files + manifest.json to this directory");

  auto* sc_parse = app.add_subcommand(
      "parse-bfee", "Extract per-packet features from capture files");
  std::string pb_manifest, pb_input, pb_out;
  std::uint32_t pb_site = 0;
  double pb_x = 0.0, pb_y = 0.0;
  sc_parse->add_option("capture", pb_input, "One capture (.dat) file");
  sc_parse->add_option("--manifest", pb_manifest,
                       "JSON array of {path, site_id, coords}");
  sc_parse->add_option("--site-id", pb_site, "Site id for a single capture");
  sc_parse->add_option("--x", pb_x, "Site x for a single capture");
  sc_parse->add_option("--y", pb_y, "Site y for a single capture");
  sc_parse->add_option("--out", pb_out, "Feature file path");

  auto* sc_build = app.add_subcommand(
      "build-dataset", "Window features into normalized image datasets");
  std::string bd_features, bd_out;
  int bd_window = 0;
  sc_build->add_option("features", bd_features, "Feature file from parse-bfee")
      ->required()
      ->check(CLI::ExistingFile);
  sc_build->add_option("--window", bd_window, "Packets per image")
      ->check(CLI::PositiveNumber);
  sc_build->add_option("--out", bd_out, "Dataset path");

  auto* sc_train =
      app.add_subcommand("train", "Train the classifier on a dataset");
  std::string tr_data, tr_out;
  sc_train->add_option("--data", tr_data, "Dataset path")
      ->required()
      ->check(CLI::ExistingFile);
  sc_train->add_option("--out", tr_out, "Checkpoint path");

  auto* sc_predict = app.add_subcommand(
      "predict", "Estimate positions for every site in a dataset");
  std::string pr_model, pr_data, pr_out;
  sc_predict->add_option("--model", pr_model, "Checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  sc_predict->add_option("--data", pr_data, "Dataset path")
      ->required()
      ->check(CLI::ExistingFile);
  sc_predict->add_option("--out", pr_out, "Estimates JSON path");

  auto* sc_eval = app.add_subcommand(
      "evaluate", "Score estimates against ground truth into a report");
  std::string ev_estimates, ev_truths, ev_stem;
  sc_eval->add_option("--estimates", ev_estimates, "Estimates JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sc_eval->add_option("--truths", ev_truths,
                      "Truth JSON (array of {site_id, truth})")
      ->check(CLI::ExistingFile);
  sc_eval->add_option("--out", ev_stem, "Report file stem");

  auto* sc_sweep = app.add_subcommand(
      "sweep", "Run the parameter sweep from the config's sweep section");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg;
    if (opt_config->count()) {
      cfg = parse_experiment_config(slurp(config_path));
    } else {
      cfg.grid = GridSpec{};  // default: the 4x4 desk-scale grid
    }
    if (opt_seed->count()) cfg.seed = seed;
    if (opt_outdir->count()) cfg.output_dir = output_dir;
    if (opt_workers->count()) cfg.workers = workers;

    if (print_config) {
      std::cout << experiment_config_json(cfg);
      return 0;
    }
    if (*sc_simulate) return cmd_simulate(cfg, sim_out, sim_emit);
    if (*sc_parse)
      return cmd_parse_bfee(cfg, pb_manifest, pb_input, pb_site, pb_x, pb_y,
                            pb_out);
    if (*sc_build) return cmd_build_dataset(cfg, bd_features, bd_window, bd_out);
    if (*sc_train) return cmd_train(cfg, tr_data, tr_out);
    if (*sc_predict) return cmd_predict(cfg, pr_model, pr_data, pr_out);
    if (*sc_eval) return cmd_evaluate(cfg, ev_estimates, ev_truths, ev_stem);
    if (*sc_sweep) return cmd_sweep(cfg);
    std::cout << app.help();
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
