#pragma once

// Experiment driver: dataset acquisition (simulation or file), the
// train/locate/score pipeline, accuracy metrics, parameter sweeps, and
// deterministic report emission. Config schema: docs/config-schema.md.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "secci/channel_sim.hpp"
#include "secci/imaging.hpp"
#include "secci/locator.hpp"
#include "secci/network.hpp"
#include "secci/train.hpp"

namespace secci {

// A failure inside one pipeline stage, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Rectangular training grid, expanded row-major into site positions.
struct GridSpec {
  int rows = 4;
  int cols = 4;
  double spacing_m = 1.5;
  std::array<double, 2> origin{0.0, 0.0};
  std::array<double, 2> tx_position{-1.0, -1.0};

  bool operator==(const GridSpec&) const = default;
};

SiteLayout make_grid_layout(const GridSpec& grid);

enum class SweepVariable {
  num_images,
  batch_size,
  learning_rate,
  h,
  packets_per_image,
  site_spacing,
};

const char* sweep_variable_name(SweepVariable v);
SweepVariable sweep_variable_from_name(const std::string& name);

struct SweepSpec {
  SweepVariable variable = SweepVariable::num_images;
  std::vector<double> values;
  int repetitions = 1;

  bool operator==(const SweepSpec&) const = default;
};

struct ExperimentConfig {
  // Exactly one data source: a grid to simulate or a dataset file.
  std::optional<GridSpec> grid;
  std::optional<std::string> dataset_path;
  SimConfig sim;
  int packets_per_image = kFeaturesPerChannel;
  NetworkConfig net;  // num_classes 0 = derived from the data
  TrainConfig train;
  GreedyConfig greedy;
  SplitMode split_mode = SplitMode::sites;
  double test_fraction = 0.25;
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  std::optional<SweepSpec> sweep;
  int workers = 1;
};

// Parses and validates a config JSON document; unknown keys are
// rejected so typos surface instead of silently using defaults.
ExperimentConfig parse_experiment_config(const std::string& json_text);

// The fully resolved config (defaults materialized) as sorted-key JSON.
// Feeding it back through parse_experiment_config reproduces the run.
std::string experiment_config_json(const ExperimentConfig& cfg);

struct MetricsReport {
  struct Position {
    std::uint32_t site_id = 0;
    std::array<double, 2> truth{0.0, 0.0};
    std::array<double, 2> estimate{0.0, 0.0};
    double error_m = 0.0;
    int num_images = 0;
  };

  double mean_error_m = 0.0;
  double std_error_m = 0.0;  // population standard deviation
  std::vector<std::pair<double, double>> cdf;  // (error, cumulative fraction)
  std::vector<double> per_position_errors;
  // Expected error of guessing a uniformly random training site,
  // averaged over the test positions: the sanity upper bound.
  double random_baseline_mean_error_m = 0.0;
  std::vector<Position> positions;
  std::string config_json;  // resolved config echo

  // Wall-clock mean of the per-position online step (prediction matrix
  // construction plus greedy aggregation). Lives in timing.json, never
  // in report.json, so reports stay byte-deterministic.
  double mean_execution_time_s = 0.0;
  std::vector<double> per_position_time_s;
};

// Mean Euclidean distance between paired estimates and ground truths.
double mean_error(const std::vector<std::array<double, 2>>& estimates,
                  const std::vector<std::array<double, 2>>& truths);

// Empirical CDF sampled at the sorted unique error values.
std::vector<std::pair<double, double>> error_cdf(
    const std::vector<double>& errors);

// Acquire data, split train/test by the configured mode, train, locate
// every test position, and score. Deterministic given the config.
MetricsReport run_experiment(const ExperimentConfig& cfg);

// Deterministic report body (excludes timing).
std::string report_json(const MetricsReport& report);
// Timing sidecar body (wall-clock, non-deterministic by nature).
std::string timing_json(const MetricsReport& report);
// Writes <dir>/<stem>.json and <dir>/<stem>-timing.json.
void write_report(const MetricsReport& report, const std::string& dir,
                  const std::string& stem);

// One report per sweep value and repetition. Each cell runs an isolated
// config under a derived seed; results land incrementally in
// <output_dir>/sweep.csv plus per-cell report files. Cell failures are
// recorded in the CSV and the sweep continues.
std::vector<MetricsReport> run_sweep(const ExperimentConfig& cfg);

}  // namespace secci
