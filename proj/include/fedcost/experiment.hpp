#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedcost/costmodel.hpp"
#include "fedcost/datagen.hpp"
#include "fedcost/learner.hpp"
#include "fedcost/optimizer.hpp"
#include "fedcost/system.hpp"

namespace fedcost {

/// Thrown with every violated field of a config, one per line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class ControlMode { kFixed, kOptimize, kGrid };

struct DatasetConfig {
  enum class Kind { kSynthetic, kIdx } kind = Kind::kSynthetic;
  SyntheticSpec synthetic;
  std::filesystem::path images;
  std::filesystem::path labels;
  LabelPartitionSpec partition;
};

struct SchedulerSweep {
  enum class Axis { kE, kK } axis = Axis::kE;
  std::vector<int> values;
  int fixed = 1;  // K for an E sweep, E for a K sweep
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  double gamma = 0.5;
  ControlMode mode = ControlMode::kFixed;
  DatasetConfig dataset;
  std::optional<ProfileSpec> profile_spec;
  std::optional<std::filesystem::path> profile_file;
  TrainConfig training;  // K, E and seed are filled per run
  int fixed_k = 1;
  int fixed_e = 1;
  std::optional<double> rho;
  std::optional<EstimationPlan> estimation;
  AcsConfig acs;
  std::vector<int> grid_k;
  std::vector<int> grid_e;
  std::vector<SchedulerSweep> sweeps;
  PropertyGrids properties;
};

/// Parses the JSON text of an experiment config. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& json_text);

struct Environment {
  FederatedDataset dataset;
  SystemProfile profile;
};

/// Builds the dataset and system profile; seeds derive from config.seed.
Environment build_environment(const ExperimentConfig& config);

TrainConfig training_for(const ExperimentConfig& config, int k, int e, std::string_view tag);

struct OptimizeOutcome {
  Solution solution;
  double rho = 0.0;
  std::vector<PilotRecord> pilots;  // empty when rho was given
  double overhead_ratio = 0.0;
};

OptimizeOutcome optimize(const ExperimentConfig& config, const Environment& env);

struct GridRun {
  int k = 0;
  int e = 0;
  int rounds = 0;
  double total_time = 0.0;
  double total_energy = 0.0;
  double total_cost = 0.0;
  bool reached = false;
};

std::vector<GridRun> grid_runs(const ExperimentConfig& config, const Environment& env);

struct SchedulerRow {
  char axis = 'E';
  int value = 0;
  Strategy strategy = Strategy::kOptimalTs;
  int rounds = 0;
  double total_time = 0.0;
  bool reached = false;
};

/// One FedAvg run per sweep point; the three strategies are scored on the
/// same sampled clients and communication draws.
std::vector<SchedulerRow> compare_schedulers(const ExperimentConfig& config, const Environment& env);

/// Writes `content` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Runs a CLI subcommand and writes its artifacts into config.output_dir.
/// Returns the list of files written.
std::vector<std::filesystem::path> run_subcommand(const std::string& command,
                                                  const ExperimentConfig& config);

}  // namespace fedcost
