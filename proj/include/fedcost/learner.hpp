#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fedcost/datagen.hpp"
#include "fedcost/rng.hpp"
#include "fedcost/scheduler.hpp"
#include "fedcost/system.hpp"

namespace fedcost {

/// Multinomial logistic regression: logits = W x + b, W is C x d row-major.
struct ModelParams {
  int num_classes = 0;
  int num_features = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  static ModelParams zeros(int num_classes, int num_features);

  double& w(int cls, int feature) {
    return weights[static_cast<std::size_t>(cls) * num_features + feature];
  }
  double w(int cls, int feature) const {
    return weights[static_cast<std::size_t>(cls) * num_features + feature];
  }

  bool same_shape(const ModelParams& other) const {
    return num_classes == other.num_classes && num_features == other.num_features;
  }
  bool all_finite() const;

  bool operator==(const ModelParams&) const = default;
};

/// Cross-entropy of one sample.
double sample_loss(const ModelParams& model, const DataSample& sample);

/// Mean cross-entropy over a shard (F_k).
double shard_loss(const ModelParams& model, const ClientShard& shard);

/// F(w) = sum_k p_k F_k(w).
double global_loss(const ModelParams& model, const FederatedDataset& dataset);

/// Gradient of the mean cross-entropy over `batch` (softmax minus one-hot,
/// outer product with the features).
ModelParams loss_gradient(const ModelParams& model, std::span<const DataSample* const> batch);

/// E mini-batch SGD steps on one shard. Batches are drawn with replacement;
/// when batch_size >= shard size the full shard is used every step.
ModelParams local_sgd(const ModelParams& model, const ClientShard& shard, int steps, double lr,
                      int batch_size, Rng& rng);

/// Weighted average with p_k renormalised over the participating clients.
ModelParams aggregate(const std::vector<std::pair<int, ModelParams>>& updates,
                      const FederatedDataset& dataset);

struct TrainConfig {
  int clients_per_round = 10;  // K
  int local_steps = 20;        // E
  int batch_size = 64;
  double eta0 = 0.1;  // round r uses eta0 / (1 + r)
  int max_rounds = 300;
  std::optional<double> target_loss;
  std::uint64_t seed = 0;
  Strategy strategy = Strategy::kOptimalTs;
  int threads = 1;

  void validate(int num_clients) const;
};

struct RoundTrace {
  int round = 0;
  std::vector<int> sampled;
  double loss = 0.0;
  double round_time = 0.0;    // under the configured strategy
  double round_energy = 0.0;  // sum over sampled clients of e_comp E + e_comm
  std::array<double, 3> strategy_times{};  // indexed by Strategy
};

enum class StopReason { kTargetReached, kRoundCap, kDiverged };

struct FedAvgResult {
  ModelParams model;
  std::vector<RoundTrace> traces;
  double initial_loss = 0.0;
  StopReason stop = StopReason::kRoundCap;

  double total_time() const;
  double total_energy() const;
  double total_time(Strategy s) const;
  /// gamma * energy + (1 - gamma) * time
  double total_cost(double gamma) const;
};

/// Federated averaging from w0 = 0. Each round samples K clients uniformly
/// without replacement, runs local_sgd on each, aggregates, evaluates F on
/// the aggregate, and books simulated time and energy from `system`.
FedAvgResult run_fedavg(const FederatedDataset& dataset, const SystemProfile& system,
                        const TrainConfig& config);

/// round,loss,round_time_s,round_energy_J,sampled_ids
void write_traces_csv(std::ostream& out, const std::vector<RoundTrace>& traces);

}  // namespace fedcost
