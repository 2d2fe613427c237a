#include "secci/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "secci/rng.hpp"
#include "secci/types.hpp"

namespace secci {

namespace {

using nlohmann::json;

// Seed-derivation labels so each stage draws from its own stream.
constexpr std::uint64_t kSimStream = 101;
constexpr std::uint64_t kSplitStream = 102;
constexpr std::uint64_t kTrainStream = 103;

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* context) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(std::string("unknown key \"") + item.key() +
                        "\" in " + context);
  }
}

double num_field(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number())
    throw ConfigError(std::string("\"") + key + "\" must be a number");
  return j.at(key).get<double>();
}

int int_field(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer())
    throw ConfigError(std::string("\"") + key + "\" must be an integer");
  return v.get<int>();
}

std::array<double, 2> pair_field(const json& j, const char* key,
                                 std::array<double, 2> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() ||
      !v[1].is_number())
    throw ConfigError(std::string("\"") + key +
                      "\" must be a two-number array");
  return {v[0].get<double>(), v[1].get<double>()};
}

GridSpec parse_grid(const json& j) {
  check_keys(j, {"rows", "cols", "spacing_m", "origin", "tx_position"},
             "grid");
  GridSpec g;
  g.rows = int_field(j, "rows", g.rows);
  g.cols = int_field(j, "cols", g.cols);
  g.spacing_m = num_field(j, "spacing_m", g.spacing_m);
  g.origin = pair_field(j, "origin", g.origin);
  g.tx_position = pair_field(j, "tx_position", g.tx_position);
  if (g.rows < 1 || g.cols < 1)
    throw ConfigError("grid needs at least one row and one column");
  if (!(g.spacing_m > 0))
    throw ConfigError("grid spacing must be positive");
  return g;
}

SimConfig parse_sim(const json& j, SimConfig sim) {
  check_keys(j,
             {"los_amplitude", "noise_std", "snr_db", "k_factor_db",
              "n_nlos_rays", "max_excess_delay_s", "packets_per_site"},
             "sim");
  sim.los_amplitude = num_field(j, "los_amplitude", sim.los_amplitude);
  if (j.contains("noise_std") && j.contains("snr_db"))
    throw ConfigError("give either \"noise_std\" or \"snr_db\", not both");
  if (j.contains("snr_db"))
    sim.noise_std =
        noise_std_for_snr_db(sim.los_amplitude, num_field(j, "snr_db", 0.0));
  else
    sim.noise_std = num_field(j, "noise_std", sim.noise_std);
  sim.k_factor_db = num_field(j, "k_factor_db", sim.k_factor_db);
  sim.n_nlos_rays = int_field(j, "n_nlos_rays", sim.n_nlos_rays);
  sim.max_excess_delay_s =
      num_field(j, "max_excess_delay_s", sim.max_excess_delay_s);
  sim.packets_per_site = int_field(j, "packets_per_site", sim.packets_per_site);
  return sim;
}

NetworkConfig parse_net(const json& j, NetworkConfig n) {
  check_keys(j,
             {"input_rows", "input_cols", "input_channels", "block_channels",
              "composite_channels", "num_composite", "se_reduction",
              "dense_units", "dropout", "num_classes"},
             "net");
  n.input_rows = int_field(j, "input_rows", n.input_rows);
  n.input_cols = int_field(j, "input_cols", n.input_cols);
  n.input_channels = int_field(j, "input_channels", n.input_channels);
  if (j.contains("block_channels")) {
    const auto& blocks = j.at("block_channels");
    if (!blocks.is_array() || blocks.empty())
      throw ConfigError("\"block_channels\" must be a non-empty array");
    n.block_channels.clear();
    for (const auto& b : blocks) {
      if (!b.is_number_integer())
        throw ConfigError("\"block_channels\" must hold integers");
      n.block_channels.push_back(b.get<int>());
    }
  }
  n.composite_channels = int_field(j, "composite_channels", n.composite_channels);
  n.num_composite = int_field(j, "num_composite", n.num_composite);
  n.se_reduction = int_field(j, "se_reduction", n.se_reduction);
  n.dense_units = int_field(j, "dense_units", n.dense_units);
  n.dropout = num_field(j, "dropout", n.dropout);
  n.num_classes = int_field(j, "num_classes", n.num_classes);
  return n;
}

TrainConfig parse_train(const json& j, TrainConfig t) {
  check_keys(j,
             {"learning_rate", "epochs", "batch_size", "weight_decay",
              "flip_horizontal_p", "flip_vertical_p", "validation_fraction",
              "beta1", "beta2", "epsilon"},
             "train");
  t.learning_rate = num_field(j, "learning_rate", t.learning_rate);
  t.epochs = int_field(j, "epochs", t.epochs);
  t.batch_size = int_field(j, "batch_size", t.batch_size);
  t.weight_decay = num_field(j, "weight_decay", t.weight_decay);
  t.flip_horizontal_p = num_field(j, "flip_horizontal_p", t.flip_horizontal_p);
  t.flip_vertical_p = num_field(j, "flip_vertical_p", t.flip_vertical_p);
  t.validation_fraction =
      num_field(j, "validation_fraction", t.validation_fraction);
  t.beta1 = num_field(j, "beta1", t.beta1);
  t.beta2 = num_field(j, "beta2", t.beta2);
  t.epsilon = num_field(j, "epsilon", t.epsilon);
  return t;
}

GreedyConfig parse_greedy(const json& j, GreedyConfig g) {
  check_keys(j, {"h", "k", "weighting"}, "greedy");
  g.h = int_field(j, "h", g.h);
  g.k = int_field(j, "k", g.k);
  if (j.contains("weighting")) {
    const std::string w = j.at("weighting").get<std::string>();
    if (w == "uniform")
      g.weighting = Weighting::uniform;
    else if (w == "probability")
      g.weighting = Weighting::probability;
    else
      throw ConfigError("weighting must be \"uniform\" or \"probability\"");
  }
  return g;
}

SweepSpec parse_sweep(const json& j) {
  check_keys(j, {"variable", "values", "repetitions"}, "sweep");
  SweepSpec s;
  if (!j.contains("variable"))
    throw ConfigError("sweep needs a \"variable\"");
  s.variable = sweep_variable_from_name(j.at("variable").get<std::string>());
  if (!j.contains("values") || !j.at("values").is_array() ||
      j.at("values").empty())
    throw ConfigError("sweep needs a non-empty \"values\" array");
  for (const auto& v : j.at("values")) {
    if (!v.is_number()) throw ConfigError("sweep values must be numbers");
    s.values.push_back(v.get<double>());
  }
  s.repetitions = int_field(j, "repetitions", 1);
  if (s.repetitions < 1)
    throw ConfigError("sweep repetitions must be at least 1");
  return s;
}

void validate_config(const ExperimentConfig& cfg) {
  const int sources =
      (cfg.grid.has_value() ? 1 : 0) + (cfg.dataset_path.has_value() ? 1 : 0);
  if (sources != 1)
    throw ConfigError(
        "config needs exactly one data source: \"grid\" or \"dataset_path\"");
  if (cfg.packets_per_image < 1)
    throw ConfigError("packets_per_image must be at least 1");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
  if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  if (cfg.sweep) {
    if (cfg.sweep->values.empty())
      throw ConfigError("sweep needs a non-empty \"values\" array");
    if (cfg.sweep->repetitions < 1)
      throw ConfigError("sweep repetitions must be at least 1");
    if (cfg.sweep->variable == SweepVariable::site_spacing && !cfg.grid)
      throw ConfigError("a site_spacing sweep needs the grid data source");
  }
}

double distance(const std::array<double, 2>& a,
                const std::array<double, 2>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

SiteLayout make_grid_layout(const GridSpec& grid) {
  SiteLayout layout;
  layout.spacing_m = grid.spacing_m;
  layout.tx_position = grid.tx_position;
  layout.site_positions.reserve(static_cast<std::size_t>(grid.rows) *
                                grid.cols);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c)
      layout.site_positions.push_back({grid.origin[0] + c * grid.spacing_m,
                                       grid.origin[1] + r * grid.spacing_m});
  return layout;
}

const char* sweep_variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::num_images: return "num_images";
    case SweepVariable::batch_size: return "batch_size";
    case SweepVariable::learning_rate: return "learning_rate";
    case SweepVariable::h: return "h";
    case SweepVariable::packets_per_image: return "packets_per_image";
    case SweepVariable::site_spacing: return "site_spacing";
  }
  return "unknown";
}

SweepVariable sweep_variable_from_name(const std::string& name) {
  if (name == "num_images") return SweepVariable::num_images;
  if (name == "batch_size") return SweepVariable::batch_size;
  if (name == "learning_rate") return SweepVariable::learning_rate;
  if (name == "h") return SweepVariable::h;
  if (name == "packets_per_image") return SweepVariable::packets_per_image;
  if (name == "site_spacing") return SweepVariable::site_spacing;
  throw ConfigError("unknown sweep variable \"" + name + "\"");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_keys(j,
             {"grid", "dataset_path", "sim", "packets_per_image", "net",
              "train", "greedy", "split", "seed", "output_dir", "sweep",
              "workers"},
             "config");
  ExperimentConfig cfg;
  if (j.contains("grid")) cfg.grid = parse_grid(j.at("grid"));
  if (j.contains("dataset_path"))
    cfg.dataset_path = j.at("dataset_path").get<std::string>();
  if (j.contains("sim")) cfg.sim = parse_sim(j.at("sim"), cfg.sim);
  cfg.packets_per_image =
      int_field(j, "packets_per_image", cfg.packets_per_image);
  if (j.contains("net")) cfg.net = parse_net(j.at("net"), cfg.net);
  if (j.contains("train")) cfg.train = parse_train(j.at("train"), cfg.train);
  if (j.contains("greedy"))
    cfg.greedy = parse_greedy(j.at("greedy"), cfg.greedy);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, {"mode", "test_fraction"}, "split");
    if (s.contains("mode")) {
      const std::string mode = s.at("mode").get<std::string>();
      if (mode == "sites")
        cfg.split_mode = SplitMode::sites;
      else if (mode == "images")
        cfg.split_mode = SplitMode::images;
      else
        throw ConfigError("split mode must be \"sites\" or \"images\"");
    }
    cfg.test_fraction = num_field(s, "test_fraction", cfg.test_fraction);
  }
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw ConfigError("\"seed\" must be an integer");
    cfg.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("output_dir"))
    cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("sweep")) cfg.sweep = parse_sweep(j.at("sweep"));
  cfg.workers = int_field(j, "workers", cfg.workers);
  validate_config(cfg);
  return cfg;
}

std::string experiment_config_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.grid) {
    j["grid"] = {{"rows", cfg.grid->rows},
                 {"cols", cfg.grid->cols},
                 {"spacing_m", cfg.grid->spacing_m},
                 {"origin", cfg.grid->origin},
                 {"tx_position", cfg.grid->tx_position}};
  }
  if (cfg.dataset_path) j["dataset_path"] = *cfg.dataset_path;
  j["sim"] = {{"los_amplitude", cfg.sim.los_amplitude},
              {"noise_std", cfg.sim.noise_std},
              {"k_factor_db", cfg.sim.k_factor_db},
              {"n_nlos_rays", cfg.sim.n_nlos_rays},
              {"max_excess_delay_s", cfg.sim.max_excess_delay_s},
              {"packets_per_site", cfg.sim.packets_per_site}};
  j["packets_per_image"] = cfg.packets_per_image;
  j["net"] = cfg.net.to_json();
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"weight_decay", cfg.train.weight_decay},
                {"flip_horizontal_p", cfg.train.flip_horizontal_p},
                {"flip_vertical_p", cfg.train.flip_vertical_p},
                {"validation_fraction", cfg.train.validation_fraction},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"epsilon", cfg.train.epsilon}};
  j["greedy"] = {
      {"h", cfg.greedy.h},
      {"k", cfg.greedy.k},
      {"weighting",
       cfg.greedy.weighting == Weighting::uniform ? "uniform" : "probability"}};
  j["split"] = {
      {"mode", cfg.split_mode == SplitMode::sites ? "sites" : "images"},
      {"test_fraction", cfg.test_fraction}};
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  if (cfg.sweep) {
    j["sweep"] = {{"variable", sweep_variable_name(cfg.sweep->variable)},
                  {"values", cfg.sweep->values},
                  {"repetitions", cfg.sweep->repetitions}};
  }
  j["workers"] = cfg.workers;
  return j.dump(2) + "\n";
}

double mean_error(const std::vector<std::array<double, 2>>& estimates,
                  const std::vector<std::array<double, 2>>& truths) {
  if (estimates.empty())
    throw StructuralError("mean error needs at least one pair");
  if (estimates.size() != truths.size())
    throw StructuralError("estimate and truth counts differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i)
    sum += distance(estimates[i], truths[i]);
  return sum / static_cast<double>(estimates.size());
}

std::vector<std::pair<double, double>> error_cdf(
    const std::vector<double>& errors) {
  if (errors.empty())
    throw StructuralError("error CDF needs at least one value");
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> cdf;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    cdf.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  return cdf;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);

  Dataset data;
  if (cfg.grid) {
    try {
      SimConfig sim = cfg.sim;
      sim.seed = Rng::mix(cfg.seed, kSimStream);
      data = simulate_dataset(make_grid_layout(*cfg.grid), sim,
                              cfg.packets_per_image);
    } catch (const Error& e) {
      throw StageError("simulate", e.what());
    }
  } else {
    try {
      data = load_dataset(*cfg.dataset_path);
    } catch (const Error& e) {
      throw StageError("load", e.what());
    }
  }

  Dataset train_data, test_data;
  try {
    auto split = split_train_test(data, 1.0 - cfg.test_fraction,
                                  Rng::mix(cfg.seed, kSplitStream),
                                  cfg.split_mode);
    train_data = std::move(split.first);
    test_data = std::move(split.second);
  } catch (const Error& e) {
    throw StageError("split", e.what());
  }

  ModelCheckpoint ckpt;
  try {
    TrainConfig tc = cfg.train;
    tc.seed = Rng::mix(cfg.seed, kTrainStream);
    ckpt = train(train_data, Dataset{}, cfg.net, tc);
  } catch (const Error& e) {
    throw StageError("train", e.what());
  }

  MetricsReport report;
  try {
    Network net(ckpt);

    std::map<std::uint32_t, std::vector<CsiImage>> by_site;
    for (const auto& img : test_data.images)
      by_site[img.site_id].push_back(img.image);
    std::map<std::uint32_t, std::array<double, 2>> truth;
    for (const auto& s : test_data.sites) truth[s.id] = s.coords;

    double baseline_sum = 0.0;
    for (const auto& [site_id, images] : by_site) {
      const auto t0 = std::chrono::steady_clock::now();
      const PredictionMatrix matrix = build_prediction_matrix(net, images);
      const PositionEstimate est =
          estimate_position(matrix, ckpt.class_sites, cfg.greedy);
      const auto t1 = std::chrono::steady_clock::now();

      MetricsReport::Position pos;
      pos.site_id = site_id;
      pos.truth = truth.at(site_id);
      pos.estimate = est.coords;
      pos.error_m = distance(pos.estimate, pos.truth);
      pos.num_images = static_cast<int>(images.size());
      report.positions.push_back(pos);
      report.per_position_errors.push_back(pos.error_m);
      report.per_position_time_s.push_back(
          std::chrono::duration<double>(t1 - t0).count());

      // Expected error of a uniformly random training-site guess.
      double exp_err = 0.0;
      for (const auto& s : ckpt.class_sites)
        exp_err += distance(s.coords, pos.truth);
      baseline_sum += exp_err / static_cast<double>(ckpt.class_sites.size());
    }

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
    report.random_baseline_mean_error_m = baseline_sum / n;
    double tsum = 0.0;
    for (double t : report.per_position_time_s) tsum += t;
    report.mean_execution_time_s = tsum / n;
  } catch (const Error& e) {
    throw StageError("locate", e.what());
  }

  report.config_json = experiment_config_json(cfg);
  return report;
}

std::string report_json(const MetricsReport& report) {
  json j;
  j["config"] = json::parse(report.config_json);
  j["mean_error_m"] = report.mean_error_m;
  j["std_error_m"] = report.std_error_m;
  j["random_baseline_mean_error_m"] = report.random_baseline_mean_error_m;
  j["per_position_errors"] = report.per_position_errors;
  json cdf = json::array();
  for (const auto& [err, frac] : report.cdf) cdf.push_back({err, frac});
  j["cdf"] = cdf;
  json positions = json::array();
  for (const auto& p : report.positions) {
    positions.push_back({{"site_id", p.site_id},
                         {"truth", p.truth},
                         {"estimate", p.estimate},
                         {"error_m", p.error_m},
                         {"num_images", p.num_images}});
  }
  j["positions"] = positions;
  return j.dump(2) + "\n";
}

std::string timing_json(const MetricsReport& report) {
  json j;
  j["mean_execution_time_s"] = report.mean_execution_time_s;
  j["per_position_time_s"] = report.per_position_time_s;
  j["scope"] =
      "per test position: prediction-matrix construction (image tensor "
      "preparation + network inference per image) plus greedy aggregation";
  return j.dump(2) + "\n";
}

void write_report(const MetricsReport& report, const std::string& dir,
                  const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / (stem + ".json");
  const auto tpath = std::filesystem::path(dir) / (stem + "-timing.json");
  std::ofstream out(path, std::ios::binary);
  out << report_json(report);
  if (!out) throw StructuralError("could not write " + path.string());
  std::ofstream tout(tpath, std::ios::binary);
  tout << timing_json(report);
  if (!tout) throw StructuralError("could not write " + tpath.string());
}

namespace {

ExperimentConfig make_cell_config(const ExperimentConfig& base,
                                  std::size_t value_index, int repetition) {
  ExperimentConfig c = base;
  c.sweep.reset();
  const double v = base.sweep->values[value_index];
  switch (base.sweep->variable) {
    case SweepVariable::num_images:
      c.sim.packets_per_site =
          static_cast<int>(std::llround(v)) * c.packets_per_image;
      break;
    case SweepVariable::batch_size:
      c.train.batch_size = static_cast<int>(std::llround(v));
      break;
    case SweepVariable::learning_rate:
      c.train.learning_rate = v;
      break;
    case SweepVariable::h:
      c.greedy.h = static_cast<int>(std::llround(v));
      break;
    case SweepVariable::packets_per_image:
      c.packets_per_image = static_cast<int>(std::llround(v));
      break;
    case SweepVariable::site_spacing:
      c.grid->spacing_m = v;
      break;
  }
  c.seed = Rng::mix(Rng::mix(base.seed, value_index + 1),
                    static_cast<std::uint64_t>(repetition) + 1);
  return c;
}

}  // namespace

std::vector<MetricsReport> run_sweep(const ExperimentConfig& cfg) {
  if (!cfg.sweep) throw ConfigError("run_sweep needs a sweep section");
  validate_config(cfg);
  std::filesystem::create_directories(cfg.output_dir);

  const std::string variable = sweep_variable_name(cfg.sweep->variable);
  std::ofstream csv(std::filesystem::path(cfg.output_dir) / "sweep.csv",
                    std::ios::binary);
  csv << "variable,value,repetition,seed,status,mean_error_m,std_error_m,"
         "random_baseline_mean_error_m,mean_execution_time_s,report\n";
  csv.flush();

  struct Cell {
    std::size_t value_index;
    int repetition;
  };
  std::vector<Cell> cells;
  for (std::size_t vi = 0; vi < cfg.sweep->values.size(); ++vi)
    for (int rep = 0; rep < cfg.sweep->repetitions; ++rep)
      cells.push_back({vi, rep});

  struct CellResult {
    bool ok = false;
    MetricsReport report;
    std::string error;
    std::uint64_t seed = 0;
  };

  std::vector<MetricsReport> reports;
  const std::size_t workers =
      static_cast<std::size_t>(std::max(1, cfg.workers));
  for (std::size_t wave = 0; wave < cells.size(); wave += workers) {
    const std::size_t end = std::min(cells.size(), wave + workers);
    std::vector<CellResult> results(end - wave);
    auto compute = [&](std::size_t slot) {
      const Cell& cell = cells[wave + slot];
      CellResult& out = results[slot];
      try {
        const ExperimentConfig cc =
            make_cell_config(cfg, cell.value_index, cell.repetition);
        out.seed = cc.seed;
        out.report = run_experiment(cc);
        out.ok = true;
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    };
    if (end - wave == 1) {
      compute(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t slot = 0; slot < end - wave; ++slot)
        pool.emplace_back(compute, slot);
      for (auto& t : pool) t.join();
    }

    for (std::size_t slot = 0; slot < end - wave; ++slot) {
      const Cell& cell = cells[wave + slot];
      CellResult& res = results[slot];
      const std::string value = format_value(cfg.sweep->values[cell.value_index]);
      const std::string stem =
          "report_" + variable + "_" + value + "_rep" +
          std::to_string(cell.repetition);
      csv << variable << ',' << value << ',' << cell.repetition << ','
          << res.seed << ',';
      if (res.ok) {
        write_report(res.report, cfg.output_dir, stem);
        csv << "ok," << format_value(res.report.mean_error_m) << ','
            << format_value(res.report.std_error_m) << ','
            << format_value(res.report.random_baseline_mean_error_m) << ','
            << format_value(res.report.mean_execution_time_s) << ','
            << stem + ".json";
        reports.push_back(std::move(res.report));
      } else {
        csv << csv_escape("error: " + res.error) << ",,,,,";
      }
      csv << '\n';
      csv.flush();
    }
  }
  return reports;
}

}  // namespace secci
