#include "fedcost/learner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace fedcost {

ModelParams ModelParams::zeros(int num_classes, int num_features) {
  ModelParams m;
  m.num_classes = num_classes;
  m.num_features = num_features;
  m.weights.assign(static_cast<std::size_t>(num_classes) * num_features, 0.0);
  m.bias.assign(static_cast<std::size_t>(num_classes), 0.0);
  return m;
}

bool ModelParams::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(weights.begin(), weights.end(), finite) &&
         std::all_of(bias.begin(), bias.end(), finite);
}

namespace {

void check_sample(const ModelParams& model, const DataSample& s) {
  if (static_cast<int>(s.features.size()) != model.num_features || s.label < 0 ||
      s.label >= model.num_classes)
    throw std::invalid_argument("model dimensions do not match data");
}

// Writes logits into `out` and returns log-sum-exp.
double logits(const ModelParams& model, const DataSample& s, std::vector<double>& out) {
  const int d = model.num_features;
  out.resize(static_cast<std::size_t>(model.num_classes));
  double top = -INFINITY;
  for (int c = 0; c < model.num_classes; ++c) {
    const double* row = &model.weights[static_cast<std::size_t>(c) * d];
    double z = model.bias[c];
    for (int j = 0; j < d; ++j) z += row[j] * s.features[j];
    out[c] = z;
    top = std::max(top, z);
  }
  double sum = 0.0;
  for (double z : out) sum += std::exp(z - top);
  return top + std::log(sum);
}

// grad <- mean over batch of (softmax - onehot) (x, 1)
void gradient_into(const ModelParams& model, std::span<const DataSample* const> batch,
                   ModelParams& grad, std::vector<double>& scratch) {
  std::fill(grad.weights.begin(), grad.weights.end(), 0.0);
  std::fill(grad.bias.begin(), grad.bias.end(), 0.0);
  const int d = model.num_features;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const DataSample* s : batch) {
    const double lse = logits(model, *s, scratch);
    for (int c = 0; c < model.num_classes; ++c) {
      double diff = std::exp(scratch[c] - lse);
      if (c == s->label) diff -= 1.0;
      diff *= scale;
      if (diff == 0.0) continue;
      double* row = &grad.weights[static_cast<std::size_t>(c) * d];
      for (int j = 0; j < d; ++j) row[j] += diff * s->features[j];
      grad.bias[c] += diff;
    }
  }
}

}  // namespace

double sample_loss(const ModelParams& model, const DataSample& sample) {
  check_sample(model, sample);
  std::vector<double> z;
  const double lse = logits(model, sample, z);
  return lse - z[sample.label];
}

double shard_loss(const ModelParams& model, const ClientShard& shard) {
  if (shard.samples.empty()) throw std::invalid_argument("empty shard");
  std::vector<double> z;
  double total = 0.0;
  for (const auto& s : shard.samples) {
    check_sample(model, s);
    total += logits(model, s, z) - z[s.label];
  }
  return total / static_cast<double>(shard.samples.size());
}

double global_loss(const ModelParams& model, const FederatedDataset& dataset) {
  if (model.num_features != dataset.num_features || model.num_classes != dataset.num_classes)
    throw std::invalid_argument("model dimensions do not match dataset");
  double f = 0.0;
  for (std::size_t k = 0; k < dataset.shards.size(); ++k)
    f += dataset.weights[k] * shard_loss(model, dataset.shards[k]);
  return f;
}

ModelParams loss_gradient(const ModelParams& model, std::span<const DataSample* const> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  for (const DataSample* s : batch) check_sample(model, *s);
  ModelParams grad = ModelParams::zeros(model.num_classes, model.num_features);
  std::vector<double> scratch;
  gradient_into(model, batch, grad, scratch);
  return grad;
}

ModelParams local_sgd(const ModelParams& model, const ClientShard& shard, int steps, double lr,
                      int batch_size, Rng& rng) {
  if (shard.samples.empty()) throw std::invalid_argument("local_sgd on empty shard");
  if (steps < 1) throw std::invalid_argument("local_sgd needs steps >= 1");
  if (!(lr >= 0.0)) throw std::invalid_argument("local_sgd needs lr >= 0");
  if (batch_size < 1) throw std::invalid_argument("local_sgd needs batch_size >= 1");
  for (const auto& s : shard.samples) check_sample(model, s);

  ModelParams w = model;
  if (lr == 0.0) return w;

  const std::size_t n = shard.samples.size();
  const bool full_batch = static_cast<std::size_t>(batch_size) >= n;
  std::vector<const DataSample*> batch;
  if (full_batch) {
    for (const auto& s : shard.samples) batch.push_back(&s);
  } else {
    batch.resize(static_cast<std::size_t>(batch_size));
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  ModelParams grad = ModelParams::zeros(model.num_classes, model.num_features);
  std::vector<double> scratch;
  for (int step = 0; step < steps; ++step) {
    if (!full_batch) {
      for (auto& p : batch) p = &shard.samples[pick(rng)];
    }
    gradient_into(w, batch, grad, scratch);
    for (std::size_t i = 0; i < w.weights.size(); ++i) w.weights[i] -= lr * grad.weights[i];
    for (std::size_t i = 0; i < w.bias.size(); ++i) w.bias[i] -= lr * grad.bias[i];
  }
  return w;
}

ModelParams aggregate(const std::vector<std::pair<int, ModelParams>>& updates,
                      const FederatedDataset& dataset) {
  if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Summation in client-id order makes the result independent of list order.
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return updates[a].first < updates[b].first; });

  double mass = 0.0;
  for (std::size_t i : order) {
    const int id = updates[i].first;
    if (id < 0 || id >= dataset.num_clients())
      throw std::out_of_range("aggregate: unknown client id " + std::to_string(id));
    if (!updates[i].second.same_shape(updates[order.front()].second))
      throw std::invalid_argument("aggregate: model shapes differ");
    mass += dataset.weights[id];
  }
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (updates[order[i]].first == updates[order[i - 1]].first)
      throw std::invalid_argument("aggregate: duplicate client id " +
                                  std::to_string(updates[order[i]].first));
  }

  const auto& first = updates[order.front()].second;
  ModelParams out = ModelParams::zeros(first.num_classes, first.num_features);
  for (std::size_t i : order) {
    const double q = dataset.weights[updates[i].first] / mass;
    const auto& m = updates[i].second;
    for (std::size_t j = 0; j < out.weights.size(); ++j) out.weights[j] += q * m.weights[j];
    for (std::size_t j = 0; j < out.bias.size(); ++j) out.bias[j] += q * m.bias[j];
  }
  return out;
}

void TrainConfig::validate(int num_clients) const {
  if (clients_per_round < 1 || clients_per_round > num_clients)
    throw std::invalid_argument("K must lie in [1, N]");
  if (local_steps < 1) throw std::invalid_argument("E must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(eta0 >= 0.0) || !std::isfinite(eta0)) throw std::invalid_argument("eta0 must be >= 0");
  if (max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

double FedAvgResult::total_time() const {
  double t = 0.0;
  for (const auto& r : traces) t += r.round_time;
  return t;
}

double FedAvgResult::total_time(Strategy s) const {
  double t = 0.0;
  for (const auto& r : traces) t += r.strategy_times[static_cast<std::size_t>(s)];
  return t;
}

double FedAvgResult::total_energy() const {
  double e = 0.0;
  for (const auto& r : traces) e += r.round_energy;
  return e;
}

double FedAvgResult::total_cost(double gamma) const {
  return gamma * total_energy() + (1.0 - gamma) * total_time();
}

FedAvgResult run_fedavg(const FederatedDataset& dataset, const SystemProfile& system,
                        const TrainConfig& config) {
  const int n = dataset.num_clients();
  config.validate(n);
  system.validate();
  if (system.num_clients() != n)
    throw std::invalid_argument("system profile and dataset disagree on client count");

  const int k = config.clients_per_round;
  const int e = config.local_steps;

  FedAvgResult result;
  result.model = ModelParams::zeros(dataset.num_classes, dataset.num_features);
  result.initial_loss = global_loss(result.model, dataset);

  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int r = 0; r < config.max_rounds; ++r) {
    // Uniform K-subset: partial Fisher-Yates on a fresh identity permutation.
    std::iota(ids.begin(), ids.end(), 0);
    Rng sample_rng = make_stream(config.seed, "fedavg/sample", static_cast<std::uint64_t>(r));
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<int> pick(i, n - 1);
      std::swap(ids[i], ids[pick(sample_rng)]);
    }
    std::vector<int> sampled(ids.begin(), ids.begin() + k);
    std::sort(sampled.begin(), sampled.end());

    const double lr = config.eta0 / (1.0 + r);
    std::vector<std::pair<int, ModelParams>> updates(sampled.size());
    auto train_client = [&](std::size_t i) {
      const int id = sampled[i];
      Rng rng = make_stream(config.seed, "fedavg/sgd", static_cast<std::uint64_t>(r),
                            static_cast<std::uint64_t>(id));
      updates[i] = {id, local_sgd(result.model, dataset.shards[id], e, lr, config.batch_size, rng)};
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), sampled.size());
    if (workers <= 1) {
      for (std::size_t i = 0; i < sampled.size(); ++i) train_client(i);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < sampled.size(); i += workers) train_client(i);
        });
      }
      for (auto& t : pool) t.join();
    }
    result.model = aggregate(updates, dataset);

    Rng comm_rng = make_stream(config.seed, "fedavg/comm", static_cast<std::uint64_t>(r));
    const auto comm = draw_round_costs(system, sampled, comm_rng);
    RoundJob job;
    job.ids = sampled;
    double energy = 0.0;
    for (std::size_t i = 0; i < sampled.size(); ++i) {
      job.comp.push_back(system.t_comp[sampled[i]] * e);
      job.comm.push_back(comm.time[i]);
      energy += system.e_comp[sampled[i]] * e + comm.energy[i];
    }

    RoundTrace trace;
    trace.round = r;
    trace.sampled = std::move(sampled);
    trace.loss = global_loss(result.model, dataset);
    for (Strategy s : kAllStrategies)
      trace.strategy_times[static_cast<std::size_t>(s)] = round_time(job, s);
    trace.round_time = trace.strategy_times[static_cast<std::size_t>(config.strategy)];
    trace.round_energy = energy;
    result.traces.push_back(std::move(trace));

    const double loss = result.traces.back().loss;
    if (!std::isfinite(loss) || !result.model.all_finite()) {
      result.stop = StopReason::kDiverged;
      return result;
    }
    if (config.target_loss && loss <= *config.target_loss) {
      result.stop = StopReason::kTargetReached;
      return result;
    }
  }
  result.stop = StopReason::kRoundCap;
  return result;
}

void write_traces_csv(std::ostream& out, const std::vector<RoundTrace>& traces) {
  out << "round,loss,round_time_s,round_energy_J,sampled_ids\n" << std::setprecision(17);
  for (const auto& t : traces) {
    out << t.round << ',' << t.loss << ',' << t.round_time << ',' << t.round_energy << ',';
    for (std::size_t i = 0; i < t.sampled.size(); ++i) out << (i ? " " : "") << t.sampled[i];
    out << '\n';
  }
}

}  // namespace fedcost
