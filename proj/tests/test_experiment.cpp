#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "secci/experiment.hpp"
#include "secci/rng.hpp"

using namespace secci;
namespace fs = std::filesystem;

namespace {

NetworkConfig tiny_net() {
  NetworkConfig n;
  n.block_channels = {4};
  n.num_composite = 0;
  n.se_reduction = 2;
  n.dense_units = 8;
  n.dropout = 0.0;
  return n;
}

// A 2x2 grid with four images per site and a two-epoch training run:
// small enough to execute in well under a second.
ExperimentConfig tiny_config(const std::string& outdir) {
  ExperimentConfig c;
  c.grid = GridSpec{};
  c.grid->rows = 2;
  c.grid->cols = 2;
  c.sim.packets_per_site = 4 * kFeaturesPerChannel;
  c.net = tiny_net();
  c.train.epochs = 2;
  c.train.batch_size = 4;
  c.train.validation_fraction = 0.25;
  c.greedy.h = 2;
  c.greedy.k = 2;
  c.split_mode = SplitMode::images;
  c.test_fraction = 0.25;
  c.seed = 7;
  c.output_dir = outdir;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("grid layouts expand row-major with uniform spacing") {
  GridSpec g;  // defaults: 4x4, 1.5 m
  const SiteLayout layout = make_grid_layout(g);
  REQUIRE(layout.site_positions.size() == 16);
  CHECK(layout.spacing_m == 1.5);
  CHECK(layout.site_positions[0] == std::array<double, 2>{0.0, 0.0});
  CHECK(layout.site_positions[1] == std::array<double, 2>{1.5, 0.0});
  // Row 1, column 2 lands at index 1*4 + 2.
  CHECK(layout.site_positions[6] == std::array<double, 2>{3.0, 1.5});
  CHECK(layout.tx_position == g.tx_position);

  GridSpec shifted;
  shifted.rows = 2;
  shifted.cols = 3;
  shifted.spacing_m = 0.5;
  shifted.origin = {10.0, -2.0};
  shifted.tx_position = {4.0, 4.0};
  const SiteLayout s = make_grid_layout(shifted);
  REQUIRE(s.site_positions.size() == 6);
  CHECK(s.site_positions[5] == std::array<double, 2>{11.0, -1.5});
  CHECK(s.tx_position == std::array<double, 2>{4.0, 4.0});
}

TEST_CASE("sweep variable names round-trip") {
  const SweepVariable all[] = {
      SweepVariable::num_images,      SweepVariable::batch_size,
      SweepVariable::learning_rate,   SweepVariable::h,
      SweepVariable::packets_per_image, SweepVariable::site_spacing,
  };
  for (SweepVariable v : all)
    CHECK(sweep_variable_from_name(sweep_variable_name(v)) == v);
  CHECK_THROWS_AS(sweep_variable_from_name("speed"), ConfigError);
}

TEST_CASE("mean error matches hand-checked distances") {
  CHECK(mean_error({{1.0, 1.0}}, {{4.0, 5.0}}) == 5.0);
  CHECK(mean_error({{2.0, 3.0}}, {{2.0, 3.0}}) == 0.0);
  // Errors 1 and 3 average to 2.
  CHECK(mean_error({{0.0, 0.0}, {0.0, 0.0}}, {{1.0, 0.0}, {0.0, 3.0}}) ==
        2.0);
  CHECK_THROWS_AS(mean_error({}, {}), StructuralError);
  CHECK_THROWS_AS(mean_error({{0.0, 0.0}}, {}), StructuralError);
}

TEST_CASE("error CDF steps through sorted unique values") {
  const auto cdf = error_cdf({3.0, 1.0, 2.0});
  REQUIRE(cdf.size() == 3);
  CHECK(cdf[0] == std::pair{1.0, 1.0 / 3.0});
  CHECK(cdf[1] == std::pair{2.0, 2.0 / 3.0});
  CHECK(cdf[2] == std::pair{3.0, 1.0});

  const auto flat = error_cdf({0.7, 0.7, 0.7});
  REQUIRE(flat.size() == 1);
  CHECK(flat[0] == std::pair{0.7, 1.0});

  CHECK_THROWS_AS(error_cdf({}), StructuralError);
}

TEST_CASE("error CDF agrees with a counting oracle") {
  Rng rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 40));
    std::vector<double> errors(n);
    for (auto& e : errors)
      e = rng.bernoulli(0.3) ? 1.25 : rng.uniform(0.0, 5.0);

    const auto cdf = error_cdf(errors);
    REQUIRE(!cdf.empty());
    CHECK(cdf.back().second == 1.0);
    for (std::size_t i = 0; i + 1 < cdf.size(); ++i) {
      CHECK(cdf[i].first < cdf[i + 1].first);
      CHECK(cdf[i].second < cdf[i + 1].second);
    }
    for (const auto& [threshold, fraction] : cdf) {
      const auto count = std::count_if(errors.begin(), errors.end(),
                                       [&](double e) { return e <= threshold; });
      CHECK(fraction == static_cast<double>(count) / n);
    }
  }
}

TEST_CASE("config parsing applies defaults and rejects junk") {
  const ExperimentConfig cfg = parse_experiment_config(R"({"grid": {}})");
  REQUIRE(cfg.grid.has_value());
  CHECK(cfg.grid->rows == 4);
  CHECK(cfg.grid->cols == 4);
  CHECK(cfg.grid->spacing_m == 1.5);
  CHECK(cfg.packets_per_image == kFeaturesPerChannel);
  CHECK(cfg.train.epochs == 40);
  CHECK(cfg.train.learning_rate == 3e-4);
  CHECK(cfg.train.batch_size == 50);
  CHECK(cfg.greedy.h == 5);
  CHECK(cfg.greedy.k == 5);
  CHECK(cfg.split_mode == SplitMode::sites);
  CHECK(cfg.seed == 1);
  CHECK(cfg.workers == 1);
  CHECK(!cfg.dataset_path);
  CHECK(!cfg.sweep);

  // Exactly one data source.
  CHECK_THROWS_AS(parse_experiment_config("{}"), ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config(
          R"({"grid": {}, "dataset_path": "d.secci"})"),
      ConfigError);

  // Unknown keys anywhere are rejected.
  CHECK_THROWS_AS(parse_experiment_config(R"({"grid": {}, "speed": 3})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_config(R"({"grid": {"diagonal": 2}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config(R"({"grid": {}, "train": {"momentum": 0.9}})"),
      ConfigError);

  // Malformed JSON and wrong shapes.
  CHECK_THROWS_AS(parse_experiment_config("not json"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("[1,2]"), ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config(R"({"grid": {}, "train": {"epochs": 2.5}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config(
          R"({"grid": {}, "greedy": {"weighting": "quadratic"}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config(R"({"grid": {}, "split": {"mode": "rows"}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config(R"({"grid": {}, "split": {"test_fraction": 0}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_config(R"({"grid": {"rows": 0}})"), ConfigError);
}

TEST_CASE("noise can be given as an SNR instead of a standard deviation") {
  const ExperimentConfig direct = parse_experiment_config(
      R"({"grid": {}, "sim": {"noise_std": 0.05}})");
  CHECK(direct.sim.noise_std == 0.05);

  const ExperimentConfig via_snr = parse_experiment_config(
      R"({"grid": {}, "sim": {"los_amplitude": 1.0, "snr_db": 25}})");
  CHECK(via_snr.sim.noise_std ==
        doctest::Approx(noise_std_for_snr_db(1.0, 25.0)).epsilon(1e-12));

  CHECK_THROWS_AS(
      parse_experiment_config(
          R"({"grid": {}, "sim": {"noise_std": 0.05, "snr_db": 25}})"),
      ConfigError);
}

TEST_CASE("config echo is resolved, stable, and re-parseable") {
  ExperimentConfig cfg = tiny_config("echo_out");
  cfg.sweep = SweepSpec{SweepVariable::h, {1.0, 2.0}, 2};
  const std::string echo = experiment_config_json(cfg);

  // The echo names the resolved noise level, never the SNR shorthand.
  CHECK(echo.find("noise_std") != std::string::npos);
  CHECK(echo.find("snr_db") == std::string::npos);

  const ExperimentConfig back = parse_experiment_config(echo);
  CHECK(experiment_config_json(back) == echo);
  CHECK(back.grid->rows == 2);
  CHECK(back.sweep->variable == SweepVariable::h);
  CHECK(back.sweep->repetitions == 2);
  CHECK(back.greedy.k == 2);

  ExperimentConfig from_file;
  from_file.dataset_path = "walk.secci";
  const std::string echo2 = experiment_config_json(from_file);
  CHECK(echo2.find("dataset_path") != std::string::npos);
  CHECK(echo2.find("\"grid\"") == std::string::npos);
}

TEST_CASE("experiments are deterministic for a fixed seed") {
  const ExperimentConfig cfg = tiny_config("exp_det_out");
  const MetricsReport a = run_experiment(cfg);
  const MetricsReport b = run_experiment(cfg);

  const std::string ja = report_json(a);
  CHECK(ja == report_json(b));

  // Sanity on the metrics themselves.
  REQUIRE(!a.per_position_errors.empty());
  CHECK(a.positions.size() == a.per_position_errors.size());
  double sum = 0.0;
  for (double e : a.per_position_errors) sum += e;
  CHECK(a.mean_error_m ==
        doctest::Approx(sum / a.per_position_errors.size()).epsilon(1e-9));
  REQUIRE(!a.cdf.empty());
  CHECK(a.cdf.back().second == 1.0);
  for (std::size_t i = 0; i + 1 < a.cdf.size(); ++i)
    CHECK(a.cdf[i].second <= a.cdf[i + 1].second);
  CHECK(a.random_baseline_mean_error_m > 0.0);
  CHECK(a.mean_execution_time_s > 0.0);

  // The run embeds its exact resolved configuration.
  const auto parsed = nlohmann::json::parse(ja);
  CHECK(parsed.at("config").at("seed").get<std::uint64_t>() == 7);
  CHECK(parsed.at("config").at("grid").at("rows").get<int>() == 2);
  // Wall-clock numbers never enter the deterministic report.
  CHECK(ja.find("execution_time") == std::string::npos);

  // A different seed changes the outcome.
  ExperimentConfig other = cfg;
  other.seed = 8;
  CHECK(report_json(run_experiment(other)) != ja);
}

TEST_CASE("failures carry the stage that raised them") {
  ExperimentConfig cfg = tiny_config("exp_stage_out");
  cfg.grid.reset();
  cfg.dataset_path = "no_such_dataset.secci";
  try {
    run_experiment(cfg);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "load");
    CHECK(std::string(e.what()).rfind("stage load: ", 0) == 0);
  }

  ExperimentConfig bad = tiny_config("exp_stage_out");
  bad.greedy.h = 99;  // more ranks than sites
  CHECK_THROWS_AS(run_experiment(bad), StageError);
}

TEST_CASE("an untrained network still yields a full report") {
  ExperimentConfig cfg = tiny_config("exp_epoch0_out");
  cfg.train.epochs = 0;
  const MetricsReport r = run_experiment(cfg);
  REQUIRE(!r.per_position_errors.empty());
  CHECK(r.mean_error_m >= 0.0);
  CHECK(r.random_baseline_mean_error_m > 0.0);
  // With no training the estimate cannot be meaningfully better than
  // guessing; it also must not blow past the grid diagonal.
  CHECK(r.mean_error_m <= 3.0 * r.random_baseline_mean_error_m + 1.5);
}

TEST_CASE("report files split metrics from wall-clock timing") {
  const std::string dir = "exp_report_files";
  fs::remove_all(dir);
  const MetricsReport r = run_experiment(tiny_config(dir));
  write_report(r, dir, "report");

  const std::string report = slurp(fs::path(dir) / "report.json");
  const std::string timing = slurp(fs::path(dir) / "report-timing.json");
  CHECK(report == report_json(r));
  CHECK(report.find("execution_time") == std::string::npos);

  const auto t = nlohmann::json::parse(timing);
  CHECK(t.at("mean_execution_time_s").get<double>() > 0.0);
  CHECK(t.at("per_position_time_s").size() == r.per_position_errors.size());
}

TEST_CASE("sweeps emit one report per cell and keep going on failure") {
  const std::string dir = "exp_sweep_out";
  fs::remove_all(dir);
  ExperimentConfig cfg = tiny_config(dir);
  cfg.sweep = SweepSpec{SweepVariable::h, {1.0, 2.0}, 1};

  const auto reports = run_sweep(cfg);
  REQUIRE(reports.size() == 2);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto parsed = nlohmann::json::parse(reports[i].config_json);
    CHECK(parsed.at("greedy").at("h").get<int>() == static_cast<int>(i + 1));
    // Each cell runs under its own derived seed, not the base seed.
    CHECK(parsed.at("seed").get<std::uint64_t>() != cfg.seed);
  }
  CHECK(fs::exists(fs::path(dir) / "report_h_1_rep0.json"));
  CHECK(fs::exists(fs::path(dir) / "report_h_2_rep0.json"));
  CHECK(fs::exists(fs::path(dir) / "report_h_1_rep0-timing.json"));

  const std::string csv = slurp(fs::path(dir) / "sweep.csv");
  CHECK(csv.rfind("variable,value,repetition,seed,status,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
  CHECK(csv.find(",ok,") != std::string::npos);

  // Deterministic across reruns.
  const auto again = run_sweep(cfg);
  REQUIRE(again.size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(report_json(again[i]) == report_json(reports[i]));

  // A failing cell is recorded without stopping its neighbours.
  const std::string dir2 = "exp_sweep_fail";
  fs::remove_all(dir2);
  ExperimentConfig mixed = tiny_config(dir2);
  mixed.sweep = SweepSpec{SweepVariable::h, {99.0, 2.0}, 1};
  const auto partial = run_sweep(mixed);
  REQUIRE(partial.size() == 1);
  const std::string csv2 = slurp(fs::path(dir2) / "sweep.csv");
  CHECK(csv2.find("error:") != std::string::npos);
  CHECK(csv2.find(",ok,") != std::string::npos);

  // Sweeping spacing needs a grid to act on.
  ExperimentConfig spaced = tiny_config(dir2);
  spaced.grid.reset();
  spaced.dataset_path = "walk.secci";
  spaced.sweep = SweepSpec{SweepVariable::site_spacing, {1.0}, 1};
  CHECK_THROWS_AS(run_sweep(spaced), ConfigError);

  ExperimentConfig no_sweep = tiny_config(dir2);
  CHECK_THROWS_AS(run_sweep(no_sweep), ConfigError);
}

TEST_CASE("parallel sweep workers match the serial schedule") {
  const std::string dir_a = "exp_sweep_serial";
  const std::string dir_b = "exp_sweep_parallel";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  ExperimentConfig serial = tiny_config(dir_a);
  serial.sweep = SweepSpec{SweepVariable::learning_rate, {1e-3, 3e-4}, 1};
  ExperimentConfig parallel = serial;
  parallel.output_dir = dir_b;
  parallel.workers = 2;

  const auto ra = run_sweep(serial);
  const auto rb = run_sweep(parallel);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    // Reports differ only in their embedded output_dir/workers echo, so
    // compare the metrics and the cell seeds.
    CHECK(ra[i].mean_error_m == rb[i].mean_error_m);
    CHECK(ra[i].per_position_errors == rb[i].per_position_errors);
  }
}
